"""Exceptions raised by vistrim"""


class VistrimError(Exception):
    """Base class of all the vistrim errors"""


class ShapeError(VistrimError, ValueError):
    """Dimension mismatch or empty input"""


class NumericError(VistrimError, ValueError):
    """Non finite value where finite values are required"""


class HookError(VistrimError, ValueError):
    """A prefill hook returned an invalid vision token index set"""


class ScheduleError(VistrimError, ValueError):
    """Invalid or infeasible pruning schedule

    :param message: Error description,
    :param feasible: Feasible (low, high) average token budget when the
                     error comes from an infeasible budget
    """

    def __init__(self, message: str,
                 feasible: tuple[float, float] | None = None):
        super().__init__(message)
        self.feasible = feasible


class TraceError(VistrimError, ValueError):
    """Malformed attention trace on disk"""


class ConfigError(VistrimError, ValueError):
    """Invalid run configuration"""


class CostOverflowError(VistrimError, ArithmeticError):
    """A FLOPs count does not fit in a signed 64-bit integer"""
