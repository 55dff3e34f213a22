"""Exception hierarchy shared by all modules."""


class EstimationError(Exception):
    """Base class for every error raised by :mod:`nlpbdw`."""


class NumericalError(EstimationError):
    """Failures of a numerical procedure (CLI exit code 3)."""


class InputError(EstimationError):
    """Invalid arguments, configuration or data files (CLI exit code 2)."""


class DegenerateMesh(InputError):
    pass


class SubdomainMisaligned(InputError):
    pass


class LevelMismatch(InputError):
    pass


class OutOfBox(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class ConfigError(InputError):
    pass


class EmptyTrainingSet(InputError):
    pass


class NonConvergence(NumericalError):
    pass


class SingularOperator(NumericalError):
    pass


class LostEllipticity(NumericalError):
    pass


class DependentRepresenters(NumericalError):
    pass


class UnstableEstimate(NumericalError):
    pass


class UnsplittableCell(NumericalError):
    pass


class AllCellsUnstable(NumericalError):
    pass
