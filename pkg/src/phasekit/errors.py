"""Exception taxonomy shared across phasekit modules."""


class PhasekitError(Exception):
    """Base class for all phasekit errors."""


class ExprParseError(PhasekitError):
    """Raised on malformed expression text; carries line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, col {col})")
        self.line = line
        self.col = col


class UnboundParameter(PhasekitError):
    """An expression was evaluated with a parameter left unbound."""


class DomainViolation(PhasekitError):
    """log/sqrt/fractional power outside its real domain, or division by zero."""


class OrderExceeded(PhasekitError):
    """A jet was requested beyond the order it carries."""


class NameCollision(PhasekitError):
    """A parameter name shadows a variable or builtin function name."""


class SupportViolation(PhasekitError):
    """A weight is materially nonzero outside its declared support box."""


class QuadratureFailure(PhasekitError):
    """The adaptive oracle exhausted its panel budget before reaching tolerance."""


class SingularImplicit(PhasekitError):
    """Implicit differentiation of a stationary point hit a vanishing second derivative."""


class NoConvergence(PhasekitError):
    """An iterative solve failed; usually a hypothesis violation upstream."""


class StepHypothesisViolation(PhasekitError):
    """A pipeline step's stationarity or scale hypotheses fail on its box."""


class SchemaError(PhasekitError):
    """Config file violates the schema; carries the offending path."""

    def __init__(self, message: str, path: str = ""):
        loc = f" at {path}" if path else ""
        super().__init__(f"{message}{loc}")
        self.path = path
