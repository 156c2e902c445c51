"""Exception hierarchy shared by every module."""


class DobError(Exception):
    """Base class for all package errors."""


class DimensionError(DobError, ValueError):
    pass


class NumericalError(DobError, ArithmeticError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NoSolutionError(DobError):
    """Linear matrix system is inconsistent; ``residual`` is the least-squares residual norm."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class GraphError(DobError, ValueError):
    pass


class ScheduleExhaustedError(DobError, LookupError):
    pass


class SynthesisError(DobError):
    pass


class UnsolvableRegulatorError(SynthesisError):
    def __init__(self, message, pair):
        super().__init__(message)
        self.pair = pair


class DivergenceError(DobError):
    def __init__(self, time):
        super().__init__(f"closed-loop state diverged at t = {time:.6g}")
        self.time = time


class ScenarioError(DobError, ValueError):
    """Scenario text could not be turned into a valid scenario.

    ``location`` is either ``"line L, column C"`` for syntax problems or a
    dotted key path such as ``agents[2].B`` for semantic ones.
    """

    def __init__(self, message, location=None):
        text = f"{location}: {message}" if location else message
        super().__init__(text)
        self.location = location
