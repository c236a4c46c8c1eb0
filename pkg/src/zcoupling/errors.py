"""Exception and warning classes shared across the package."""


class ZCouplingError(Exception):
    """Base class for all package errors."""


class CutoffError(ZCouplingError, ValueError):
    pass


class ConvergenceError(ZCouplingError):
    pass


class CalibrationError(ZCouplingError, ValueError):
    pass


class TouchstoneError(ZCouplingError, ValueError):
    pass


class CSVFormatError(ZCouplingError, ValueError):
    pass


class SingularNetworkError(ZCouplingError, ArithmeticError):
    pass


class OutOfGridError(ZCouplingError, ValueError):
    """Query frequency outside the tabulated band; we never extrapolate."""


class NotCapacitiveError(ZCouplingError, ValueError):
    pass


class NetlistError(ZCouplingError, ValueError):
    pass


class ResonanceError(ZCouplingError, ArithmeticError):
    """A qubit transition sits exactly on a mode frequency."""


class DimensionError(ZCouplingError, ValueError):
    pass


class LabelingError(ZCouplingError):
    pass


class BandCoverageError(ZCouplingError, ValueError):
    pass


class PoleProximityWarning(UserWarning):
    pass


class TransmonRegimeWarning(UserWarning):
    pass


class DispersiveWarning(UserWarning):
    pass


class ReciprocityWarning(UserWarning):
    pass
