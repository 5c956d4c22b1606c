"""Exception hierarchy shared by all modules."""


class PMFrontierError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PMFrontierError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularityError(PMFrontierError, ArithmeticError):
    """A derivative was requested where it is unbounded."""


class GateViolation(PMFrontierError, ValueError):
    """Initial data for a barrier system fails its admissibility inequality.

    ``gate`` names the failed inequality (``"ini1 upper gate"`` etc.).
    """

    def __init__(self, gate: str, message: str):
        super().__init__(f"{gate}: {message}")
        self.gate = gate


class InvariantBreach(PMFrontierError, RuntimeError):
    """An integrated trajectory left its proven invariant region."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class ExtrapolationError(PMFrontierError, ValueError):
    """Evaluation requested outside the integrated time range."""


class InstabilityError(PMFrontierError, RuntimeError):
    """The explicit update produced NaN or a clearly negative density."""


class DomainTooSmall(PMFrontierError, RuntimeError):
    """The support reached the guard band at the edge of the grid."""

    def __init__(self, t: float, radius: float):
        super().__init__(f"domain too small: support reached guard band at t={t:.6g} (radius {radius:.6g})")
        self.t = t
        self.radius = radius


class FitError(PMFrontierError, ValueError):
    """A rate fit could not be computed on the requested window."""


class FrontError(PMFrontierError, ValueError):
    """The free boundary is absent or not resolved by enough cells."""


class ConfigError(PMFrontierError, ValueError):
    """Configuration text failed to parse or validate.

    ``problems`` is a list of ``(key, line, reason)`` triples; ``line`` is
    ``None`` for problems that are not tied to a single line.
    """

    def __init__(self, problems: list[tuple[str, int | None, str]]):
        self.problems = list(problems)
        lines = []
        for key, line, reason in self.problems:
            where = f"line {line}" if line is not None else "config"
            lines.append(f"{where}: {key}: {reason}")
        super().__init__("; ".join(lines))
