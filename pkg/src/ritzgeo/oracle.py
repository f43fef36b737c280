"""Classical validation arm: Christoffel symbols, pointwise Euler-Lagrange
residuals of trained paths, and an RK4 shooting solver for the geodesic ODE.

Everything here is independent of the tape-based training objective, so these
routines serve as oracles for the variational solver: a converged path should
have a small EL residual and an energy matching the shooting solution.
"""

from dataclasses import dataclass

import numpy as np

from .engine.dual import MultiDual
from .errors import DegenerateMetricError, DivergenceError, ShootingError
from .metrics import MetricField
from .quadrature import QuadGrid
from .solver import PathModel, energy_of_samples, path_derivatives

COND_LIMIT = 1e12


def metric_derivatives(metric: MetricField, theta) -> np.ndarray:
    """dg[i, j, l] = d g_ij / d theta_l, exact via forward multi-duals."""
    theta = np.asarray(theta, dtype=np.float64)
    k = metric.dim
    seeds = MultiDual.seed([float(x) for x in theta])
    g = metric.matrix_generic(seeds)
    dg = np.zeros((k, k, k))
    for i in range(k):
        for j in range(k):
            e = g[i][j]
            if isinstance(e, MultiDual):
                for l, t in enumerate(e.tangents):
                    dg[i, j, l] = 0.0 if t is None else float(t)
    if not np.all(np.isfinite(dg)):
        raise DegenerateMetricError(theta, float("inf"))
    return dg


@dataclass
class ChristoffelTensor:
    """gamma[i, j, k] in the asymmetric convention
    gamma_ijk = ginv_il (dg_jl/dtheta_k - 1/2 dg_jk/dtheta_l)."""

    gamma: np.ndarray

    def contract(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        return np.einsum("ijk,j,k->i", self.gamma, v, v)


def _checked_inverse(metric: MetricField, theta):
    g = metric.matrix(theta)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise DegenerateMetricError(np.atleast_1d(theta), float(cond))
    return g, np.linalg.inv(g)


def christoffel(metric: MetricField, theta) -> ChristoffelTensor:
    theta = np.asarray(theta, dtype=np.float64)
    _, ginv = _checked_inverse(metric, theta)
    dg = metric_derivatives(metric, theta)
    # gamma_ijk = ginv_il (dg[j,l,k] - 1/2 dg[j,k,l])
    gamma = np.einsum("il,jlk->ijk", ginv, dg) - 0.5 * np.einsum(
        "il,jkl->ijk", ginv, dg
    )
    return ChristoffelTensor(gamma)


def standard_christoffel(metric: MetricField, theta) -> ChristoffelTensor:
    """Textbook symmetrized convention; agrees with `christoffel` under
    contraction with any (v, v) pair."""
    theta = np.asarray(theta, dtype=np.float64)
    _, ginv = _checked_inverse(metric, theta)
    dg = metric_derivatives(metric, theta)
    gamma = 0.5 * (
        np.einsum("il,jlk->ijk", ginv, dg)
        + np.einsum("il,klj->ijk", ginv, dg)
        - np.einsum("il,jkl->ijk", ginv, dg)
    )
    return ChristoffelTensor(gamma)


@dataclass
class ResidualReport:
    """Euler-Lagrange residual r_i = acc_i + gamma_ijk vel_j vel_k at the
    interior quadrature nodes (endpoints are exact by construction)."""

    ts: np.ndarray
    residuals: np.ndarray  # [n_interior, k]
    rms: float
    max_norm: float


def el_residual(model: PathModel, metric: MetricField,
                grid: QuadGrid = None) -> ResidualReport:
    grid = grid or QuadGrid()
    ts = grid.nodes[1:-1]
    pos, vel, acc = path_derivatives(model, ts)
    res = np.zeros_like(pos)
    for i, t in enumerate(ts):
        try:
            gam = christoffel(metric, pos[i])
        except DegenerateMetricError as exc:
            raise DegenerateMetricError(pos[i], exc.cond) from exc
        res[i] = acc[i] + gam.contract(vel[i])
    norms2 = (res ** 2).sum(axis=1)
    return ResidualReport(
        ts=ts,
        residuals=res,
        rms=float(np.sqrt(norms2.mean())),
        max_norm=float(np.sqrt(norms2.max())),
    )


@dataclass
class Trajectory:
    ts: np.ndarray
    thetas: np.ndarray  # [n+1, k]
    vels: np.ndarray  # [n+1, k]

    def energy(self, metric: MetricField) -> float:
        grid = QuadGrid(self.ts.size)
        return energy_of_samples(metric, self.thetas, self.vels, grid)


def _geodesic_rhs(metric: MetricField, theta, v):
    gam = christoffel(metric, theta)
    return v, -gam.contract(v)


def rk4_integrate(metric: MetricField, theta0, v0, steps: int = 1000,
                  t_span: float = 1.0) -> Trajectory:
    """Fixed-step RK4 for the geodesic ODE on the first-order (theta, v) system."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    theta = np.asarray(theta0, dtype=np.float64).copy()
    v = np.asarray(v0, dtype=np.float64).copy()
    h = t_span / steps
    ts = np.linspace(0.0, t_span, steps + 1)
    thetas = np.empty((steps + 1, theta.size))
    vels = np.empty((steps + 1, theta.size))
    thetas[0], vels[0] = theta, v
    for s in range(steps):
        k1t, k1v = _geodesic_rhs(metric, theta, v)
        k2t, k2v = _geodesic_rhs(metric, theta + 0.5 * h * k1t, v + 0.5 * h * k1v)
        k3t, k3v = _geodesic_rhs(metric, theta + 0.5 * h * k2t, v + 0.5 * h * k2v)
        k4t, k4v = _geodesic_rhs(metric, theta + h * k3t, v + h * k3v)
        theta = theta + (h / 6.0) * (k1t + 2 * k2t + 2 * k3t + k4t)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(v))):
            raise DivergenceError(s + 1, float("nan"))
        thetas[s + 1], vels[s + 1] = theta, v
    return Trajectory(ts, thetas, vels)


@dataclass
class ShootingResult:
    v0: np.ndarray
    trajectory: Trajectory
    miss: float
    iterations: int

    def energy(self, metric: MetricField) -> float:
        return self.trajectory.energy(metric)


def shoot(metric: MetricField, theta0, thetaT, v_guess=None, tol: float = 1e-8,
          max_iter: int = 50, steps: int = 1000,
          fd_step: float = 1e-6) -> ShootingResult:
    """Damped Newton iteration on the terminal-miss map v0 -> theta(1; v0) - thetaT."""
    theta0 = np.asarray(theta0, dtype=np.float64)
    thetaT = np.asarray(thetaT, dtype=np.float64)
    k = theta0.size
    v = (thetaT - theta0).astype(np.float64) if v_guess is None else (
        np.asarray(v_guess, dtype=np.float64).copy()
    )

    def terminal(v0):
        traj = rk4_integrate(metric, theta0, v0, steps=steps)
        return traj.thetas[-1], traj

    endpoint, traj = terminal(v)
    miss = endpoint - thetaT
    best = float(np.linalg.norm(miss))
    for it in range(1, max_iter + 1):
        if best < tol:
            return ShootingResult(v, traj, best, it - 1)
        jac = np.empty((k, k))
        for c in range(k):
            dv = v.copy()
            dv[c] += fd_step
            endc, _ = terminal(dv)
            jac[:, c] = (endc - thetaT - miss) / fd_step
        try:
            step = np.linalg.solve(jac, -miss)
        except np.linalg.LinAlgError:
            raise ShootingError(best, it) from None
        scale = 1.0
        for _ in range(10):
            cand = v + scale * step
            endc, trajc = terminal(cand)
            missc = endc - thetaT
            if np.linalg.norm(missc) < best:
                v, miss, traj = cand, missc, trajc
                best = float(np.linalg.norm(missc))
                break
            scale *= 0.5
        else:
            raise ShootingError(best, it)
    if best < tol:
        return ShootingResult(v, traj, best, max_iter)
    raise ShootingError(best, max_iter)
