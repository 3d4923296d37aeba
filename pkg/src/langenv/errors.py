"""Exception types shared across the package."""


class LangenvError(Exception):
    """Base class for all langenv errors."""


class BadInterval(LangenvError):
    """Time grid with t_end <= t0 or a non-positive step count."""


class GridMismatch(LangenvError):
    """Two paths that must share a grid do not."""


class ModelValidationError(LangenvError):
    """One or more model invariants failed on the probe lattice.

    ``violations`` is a list of ``(code, message)`` pairs, one per failed
    invariant.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [(type(self).__name__, violations)]
        self.violations = list(violations)
        super().__init__("; ".join(msg for _, msg in self.violations))

    @property
    def codes(self):
        return [code for code, _ in self.violations]


class NonpositiveFriction(ModelValidationError):
    """Friction bound kappa0 <= 0 or a probe point has lambda < kappa0."""


class BadGenerator(ModelValidationError):
    """Generator matrix with nonzero row sums or negative off-diagonals."""


class BadCorrelation(ModelValidationError):
    """Noise correlation outside [-1, 1] or non-PSD joint covariance."""


class DimensionMismatch(ModelValidationError):
    """Array shapes inconsistent with the declared dimensions."""


class Reducible(LangenvError):
    """Frozen environment generator has more than one stationary measure."""


class UnsupportedEnvironment(LangenvError):
    """Operation defined only for discrete environments."""


class IntensityExceedsZeta(LangenvError):
    """Jump intensity observed above zeta - 1 at runtime."""


class BlowUp(LangenvError):
    """State exceeded the stability guard; configuration is unstable."""


class StepTooCoarse(LangenvError):
    """Requested step cannot be tiled by the scheme substep."""


class MissingDiagnostics(LangenvError):
    """Trajectory bundle lacks the recorded diagnostics this op needs."""


class NoConvergence(LangenvError):
    """Iterative eigensolve did not reach the requested tolerance."""


class BoundaryHit(LangenvError):
    """Legendre maximizer touched the search box; result may be low."""


class NonscalarModel(LangenvError):
    """Closed-form oracle requires d = m = 1 with constant coefficients."""


class NegativeControl(LangenvError):
    """Jump-cost control v must be nonnegative."""


class ConfigError(LangenvError):
    """Base class for configuration-file problems."""


class ParseError(ConfigError):
    """Config file is not valid TOML."""


class UnknownKey(ConfigError):
    """Config file contains a key the schema does not define."""


class MissingField(ConfigError):
    """Config file lacks a required key."""
