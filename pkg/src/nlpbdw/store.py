"""Artifact store: ``manifest.json`` plus one raw little-endian float64 file per array."""
import json
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .fem import assemble_h1_gram, build_mesh
from .measurement import MeasurementSpace
from .partition import AdmissibleFamily, ParameterCell
from .problem import RNG_ALGORITHM
from .reduced_basis import AffineReducedSpace

MANIFEST = "manifest.json"
FORMAT = "nlpbdw-store/1"
_DTYPE = np.dtype("<f8")


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        self.manifest = {}
        self._arrays = {}

    @classmethod
    def open(cls, root):
        store = cls(root)
        path = store.root / MANIFEST
        if not path.exists():
            raise FileNotFoundError(f"no artifact store at {store.root}")
        store.manifest = json.loads(path.read_text())
        return store

    def put(self, name, array):
        arr = np.ascontiguousarray(array, dtype=_DTYPE)
        self.root.mkdir(parents=True, exist_ok=True)
        fname = f"{name}.f64"
        (self.root / fname).write_bytes(arr.tobytes())
        self.manifest.setdefault("arrays", {})[name] = {
            "file": fname, "shape": list(arr.shape), "dtype": "<f8"}
        self._arrays[name] = arr

    def get(self, name):
        if name not in self._arrays:
            meta = self.manifest["arrays"][name]
            raw = np.fromfile(self.root / meta["file"], dtype=_DTYPE)
            self._arrays[name] = raw.reshape(meta["shape"])
        return self._arrays[name]

    def write_manifest(self):
        self.root.mkdir(parents=True, exist_ok=True)
        text = json.dumps(self.manifest, indent=2, sort_keys=True)
        (self.root / MANIFEST).write_text(text + "\n")

    # typed helpers

    @property
    def config(self):
        return ExperimentConfig(**self.manifest["config"])

    def put_space(self, prefix, space):
        self.put(f"{prefix}_offset", space.offset)
        self.put(f"{prefix}_basis", space.basis.T)
        self.put(f"{prefix}_picked", np.array(space.picked, dtype=float))
        self.put(f"{prefix}_eps_history", np.array(space.eps_history))
        return {"dim": space.dim, "mu": float(space.mu),
                "eps_est": float(space.eps_est),
                "sigma_est": float(space.sigma_est)}

    def get_space(self, prefix, mu):
        offset = self.get(f"{prefix}_offset")
        basis = self.get(f"{prefix}_basis").reshape(-1, offset.shape[0]).T
        picked = tuple(int(i) for i in self.get(f"{prefix}_picked"))
        hist = tuple(float(e) for e in self.get(f"{prefix}_eps_history"))
        return AffineReducedSpace(offset, np.ascontiguousarray(basis), picked,
                                  hist, float(mu))

    def put_measurements(self, ms):
        for name in ("duals", "representers", "basis"):
            self.put(f"meas_{name}", getattr(ms, name).T)
        self.put("meas_triangular", ms.triangular)
        self.put("meas_corners", ms.corners)
        self.manifest["measurements"] = {
            "m": ms.m, "level": ms.level, "width": ms.width,
            "corners": ms.corners.tolist()}

    def get_measurements(self):
        meta = self.manifest["measurements"]
        cols = {name: np.ascontiguousarray(self.get(f"meas_{name}").T)
                for name in ("duals", "representers", "basis")}
        gram = assemble_h1_gram(build_mesh(meta["level"]))
        return MeasurementSpace(meta["level"], meta["width"],
                                self.get("meas_corners"), cols["duals"],
                                cols["representers"], cols["basis"],
                                self.get("meas_triangular"),
                                gram @ cols["basis"])

    def put_family(self, family):
        cells = []
        self.put("family_box", family.box)
        for k, cell in enumerate(family.cells):
            self.put(f"cell{k}_bounds", cell.bounds)
            self.put(f"cell{k}_members", cell.members.astype(float))
            info = self.put_space(f"cell{k}", cell.space)
            info.update(bounds=cell.bounds.tolist(),
                        n_members=int(cell.members.size))
            cells.append(info)
        self.manifest["family"] = {"K": family.K, "cells": cells,
                                   "history": family.history}

    def get_family(self):
        meta = self.manifest["family"]
        cells = []
        for k, info in enumerate(meta["cells"]):
            members = self.get(f"cell{k}_members").astype(np.int64)
            cells.append(ParameterCell(self.get(f"cell{k}_bounds"), members,
                                       self.get_space(f"cell{k}", info["mu"])))
        return AdmissibleFamily(self.get("family_box"), cells,
                                list(meta["history"]))


def new_store(root, config):
    store = ArtifactStore(root)
    store.manifest = {
        "format": FORMAT,
        "code_version": __version__,
        "config": config.to_dict(),
        "rng": {"algorithm": RNG_ALGORITHM,
                "streams": {"train": config.seed, "test": config.seed + 1,
                            "boxes": config.seed + 2}},
    }
    return store
