"""Exception types shared across the package."""


class KernelWindowError(ValueError):
    """Kernel evaluated at a time gap below its certified window.

    The truncated series is only trusted for gaps >= t_min; callers must
    either raise the gap or rebuild the kernel with more modes.
    """

    def __init__(self, gap: float, t_min: float):
        super().__init__(
            f"kernel gap {gap:.3e} below certified window t_min={t_min:.3e}"
        )
        self.gap = gap
        self.t_min = t_min


class RegularizationError(RuntimeError):
    """Slope corrector for the regularized initial datum failed to settle."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ContractionError(RuntimeError):
    """Fixed-point iteration made no progress; the horizon is too long.

    Carries the full per-iteration sup-difference and ratio history so the
    caller can see how divergence set in.
    """

    def __init__(self, message: str, sup_diffs, ratios):
        super().__init__(message)
        self.sup_diffs = list(sup_diffs)
        self.ratios = list(ratios)


class SubsolutionConstructionError(RuntimeError):
    """No admissible layer width was found for the boundary subsolution."""

    def __init__(self, message: str, residual_trace):
        super().__init__(message)
        self.residual_trace = list(residual_trace)


class LadderError(RuntimeError):
    """A rung of the epsilon ladder failed to converge."""

    def __init__(self, message: str, epsilon: float, cause=None):
        super().__init__(message)
        self.epsilon = epsilon
        self.cause = cause


class LadderMonotonicityError(RuntimeError):
    """Consecutive ladder rungs came out unordered.

    Ordering of the regularized solutions is guaranteed by the comparison
    principle, so a violation beyond roundoff indicates a solver bug, not a
    property of the problem.
    """
