"""Exception types shared across the package."""


class RitzgeoError(Exception):
    """Base class for package errors."""


class ConfigError(RitzgeoError):
    """Malformed or contradictory user configuration (CLI exit code 2)."""


class EvaluationDomainError(RitzgeoError):
    """An operation left its mathematical domain (sqrt of negative, division by zero)."""

    def __init__(self, op_kind: str, op_index: int, detail: str = ""):
        self.op_kind = op_kind
        self.op_index = op_index
        msg = f"domain error in op #{op_index} ({op_kind})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NonFiniteError(RitzgeoError):
    """A non-finite value appeared during evaluation; names the producing op kind."""

    def __init__(self, op_kind: str, op_index: int):
        self.op_kind = op_kind
        self.op_index = op_index
        super().__init__(f"non-finite value produced by op #{op_index} ({op_kind})")


class EnergyEvaluationError(RitzgeoError):
    """Non-finite metric entry along the path; names the quadrature node."""

    def __init__(self, t: float, theta):
        self.t = t
        self.theta = tuple(float(x) for x in theta)
        super().__init__(
            f"non-finite metric entry at quadrature node t={t:.6g}, theta={self.theta}"
        )


class DivergenceError(RitzgeoError):
    """Training energy became non-finite or exceeded the divergence bound."""

    def __init__(self, epoch: int, energy: float, trace=None):
        self.epoch = epoch
        self.energy = energy
        self.trace = trace
        super().__init__(f"training diverged at epoch {epoch} (energy {energy:.6g})")


class FitError(RitzgeoError):
    """Endpoint displacement fit failed to reach the required accuracy."""

    def __init__(self, mse: float, required: float):
        self.mse = mse
        self.required = required
        super().__init__(f"endpoint fit MSE {mse:.3e} exceeds required {required:.1e}")


class DegenerateMetricError(RitzgeoError):
    """Metric matrix is numerically singular at the requested point."""

    def __init__(self, theta, cond: float):
        self.theta = tuple(float(x) for x in theta)
        self.cond = cond
        super().__init__(
            f"metric is numerically degenerate at theta={self.theta} (cond={cond:.3e})"
        )


class ShootingError(RitzgeoError):
    """Shooting solve failed to converge (CLI exit code 4)."""

    def __init__(self, miss: float, iterations: int):
        self.miss = miss
        self.iterations = iterations
        super().__init__(
            f"shooting failed to converge after {iterations} iterations "
            f"(terminal miss {miss:.3e})"
        )


class GradientCheckError(RitzgeoError):
    """The nested-chain objective gradient failed its finite-difference guard."""

    def __init__(self, rel_err: float, limit: float):
        self.rel_err = rel_err
        self.limit = limit
        super().__init__(
            f"objective gradient disagrees with finite differences "
            f"(rel. err {rel_err:.3e} > {limit:.1e})"
        )
