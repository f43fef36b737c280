"""Variational geodesic solver.

The path between fixed endpoints theta0, theta1 is

    path(t) = theta0 (1 - t) + theta1 t + sin(pi t) N(t; beta)

so the boundary conditions hold for every parameter vector. The geodesic
energy  E = 1/2 integral of path_dot' g(path) path_dot dt  is evaluated by
trapezoid quadrature and minimized with ADAM over the network weights.

The objective is recorded once per configuration on a lane-vectorized tape
(one lane per quadrature node) and re-swept every epoch; gradients flow
end-to-end from the energy through the metric into the path parameters.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from .engine import ParamVector
from .engine.tape import Tape, VarRange
from .errors import DivergenceError, EnergyEvaluationError
from .metrics import MetricField, _segments
from .networks import (
    Architecture,
    fourier_frequencies,
    forward,
    init_params,
    param_count,
)
from .quadrature import QuadGrid
from .engine.dual import Dual2


@dataclass
class PathModel:
    """Network-corrected straight line between fixed endpoints."""

    arch: Architecture
    params: ParamVector
    theta0: np.ndarray
    theta1: np.ndarray

    def __post_init__(self):
        self.theta0 = np.asarray(self.theta0, dtype=np.float64)
        self.theta1 = np.asarray(self.theta1, dtype=np.float64)
        if self.theta0.shape != self.theta1.shape or self.theta0.ndim != 1:
            raise ValueError("endpoints must be 1-d arrays of equal length")
        if self.arch.output_dim != self.theta0.size:
            raise ValueError("network output dimension must match the chart dimension")

    @property
    def dim(self) -> int:
        return self.theta0.size

    def replaced(self, values: np.ndarray) -> "PathModel":
        return replace(self, params=self.params.replaced(values))


def make_model(arch: Architecture, theta0, theta1, seed: int = 0) -> PathModel:
    return PathModel(arch, init_params(arch, seed), np.asarray(theta0, float),
                     np.asarray(theta1, float))


def path_eval(model: PathModel, t):
    """Path position at t; t may be a float, an array, or any dual scalar."""
    from .engine import fmath

    n = forward(model.arch, model.params, t)
    s = fmath.sin(np.pi * t)
    out = []
    for k in range(model.dim):
        lin = model.theta0[k] + (model.theta1[k] - model.theta0[k]) * t
        out.append(lin + s * n[k])
    if fmath.is_numeric(t):
        return np.stack([np.asarray(o) for o in out])
    return out


def path_derivatives(model: PathModel, ts):
    """(positions, velocities, accelerations) sampled at ts, shapes [n, k]."""
    ts = np.asarray(ts, dtype=np.float64)
    d = path_eval(model, Dual2(ts, np.ones_like(ts), np.zeros_like(ts)))
    pos = np.stack([x.value for x in d], axis=-1)
    vel = np.stack([np.broadcast_to(x.d1, ts.shape) for x in d], axis=-1)
    acc = np.stack([np.broadcast_to(x.d2, ts.shape) for x in d], axis=-1)
    return pos, vel, acc


# -- tape emission of the dual network over the quadrature lanes -------------


def _emit_network_dual(tape: Tape, arch: Architecture, tn: np.ndarray):
    """Record N(t) and dN/dt on the tape, vectorized over the t lanes.

    Parameter leaves are created here first so their rows are contiguous and
    can serve as dense-weight ranges. Returns (param_rows, N_vars, dN_vars).
    """
    P = param_count(arch)
    pvars = tape.params(np.zeros(P))
    T = tn.size
    ones = tape.const(np.ones(T))

    if arch.fourier_f > 0:
        freqs = fourier_frequencies(arch)
        fv = [tape.const(np.sin(2.0 * np.pi * b * tn)) for b in freqs]
        fv += [tape.const(np.cos(2.0 * np.pi * b * tn)) for b in freqs]
        fd = [tape.const(2.0 * np.pi * b * np.cos(2.0 * np.pi * b * tn)) for b in freqs]
        fd += [tape.const(-2.0 * np.pi * b * np.sin(2.0 * np.pi * b * tn)) for b in freqs]
        yv = VarRange(tape, fv[0].row, len(fv), T)
        yd = VarRange(tape, fd[0].row, len(fd), T)
    else:
        tvar = tape.const(tn)
        yv = VarRange(tape, tvar.row, 1, T)
        yd = VarRange(tape, ones.row, 1, T)

    onesr = VarRange(tape, ones.row, 1, T)
    segs = _segments(arch)
    for li, (wsl, bsl, fan_in, fan_out) in enumerate(segs):
        last = li == len(segs) - 1
        W = VarRange(tape, wsl.start, wsl.stop - wsl.start, 1)
        zv = tape.dense(yv, W, fan_out)
        zd = tape.dense(yd, W, fan_out)
        if bsl is not None:
            b = VarRange(tape, bsl.start, bsl.stop - bsl.start, 1)
            tape.dense(onesr, b, fan_out, out=zv, accumulate=True)
        if last:
            return pvars, list(zv), list(zd)
        nyv = tape.alloc_range(fan_out, T)
        nyd = tape.alloc_range(fan_out, T)
        if arch.activation == "tanh":
            for u in range(fan_out):
                tape.tanh2_into(nyv[u], nyd[u], zv[u], zd[u])
        else:  # sine
            w0 = arch.omega0
            for u in range(fan_out):
                a = w0 * zv[u]
                tape.copy_into(nyv[u], a.sin())
                tape.copy_into(nyd[u], (w0 * a.cos()) * zd[u])
        yv, yd = nyv, nyd
    raise AssertionError("unreachable")


class EnergyKernel:
    """Frozen objective for one (architecture, metric, grid, endpoints) tuple."""

    def __init__(self, arch: Architecture, metric: MetricField, grid: QuadGrid,
                 theta0, theta1, backend=None):
        theta0 = np.asarray(theta0, dtype=np.float64)
        theta1 = np.asarray(theta1, dtype=np.float64)
        if arch.output_dim != metric.dim or theta0.size != metric.dim:
            raise ValueError("architecture, metric, and endpoints disagree on dimension")
        self.arch, self.metric, self.grid = arch, metric, grid
        self.theta0, self.theta1 = theta0, theta1
        tape = Tape()
        tn = grid.nodes
        _, N, Nd = _emit_network_dual(tape, arch, tn)
        sinpit = tape.const(np.sin(np.pi * tn))
        dsinpit = tape.const(np.pi * np.cos(np.pi * tn))
        theta_vars, vel_vars = [], []
        for k in range(metric.dim):
            lin = tape.const(theta0[k] * (1.0 - tn) + theta1[k] * tn)
            dlin = float(theta1[k] - theta0[k])
            theta_vars.append(lin + sinpit * N[k])
            vel_vars.append(dsinpit * N[k] + sinpit * Nd[k] + dlin)
        integrand = metric.emit_quadratic(tape, theta_vars, vel_vars)
        if integrand.width != tn.size:
            raise ValueError("metric integrand must be one row over the t lanes")
        root = tape.wsumb(integrand, 0.5 * grid.weights)
        self._tape = tape
        self._root = root.row
        self._ex = tape.freeze().executor(backend)
        self.n_params = param_count(arch)

    def energy(self, beta: np.ndarray) -> float:
        ex = self._ex
        ex.load_params(beta)
        ex.forward()
        return float(ex.value(self._root)[0])

    def energy_and_grad(self, beta: np.ndarray):
        ex = self._ex
        ex.load_params(beta)
        ex.forward()
        e = float(ex.value(self._root)[0])
        ex.reverse(self._root)
        return e, ex.param_grads().copy()


_kernel_cache = {}


def _cached_kernel(model: PathModel, metric: MetricField, grid: QuadGrid) -> EnergyKernel:
    key = (
        id(metric), model.arch, grid.n_points,
        model.theta0.tobytes(), model.theta1.tobytes(),
    )
    hit = _kernel_cache.get(key)
    if hit is None:
        _kernel_cache.clear()  # single-slot: kernels can hold large buffers
        hit = EnergyKernel(model.arch, metric, grid, model.theta0, model.theta1)
        _kernel_cache[key] = (hit, metric)
    return _kernel_cache[key][0]


def _diagnose_nonfinite(model: PathModel, metric: MetricField, grid: QuadGrid):
    """Name the first quadrature node whose metric entries go non-finite."""
    pos, _, _ = path_derivatives(model, grid.nodes)
    for i, t in enumerate(grid.nodes):
        theta = pos[i]
        if not np.all(np.isfinite(theta)):
            raise EnergyEvaluationError(float(t), theta)
        try:
            g = metric.matrix(theta)
        except Exception:
            raise EnergyEvaluationError(float(t), theta) from None
        if not np.all(np.isfinite(g)):
            raise EnergyEvaluationError(float(t), theta)


def energy(model: PathModel, metric: MetricField, grid: QuadGrid = None) -> float:
    """Discrete geodesic energy of the model path under the metric."""
    grid = grid or QuadGrid()
    kern = _cached_kernel(model, metric, grid)
    e = kern.energy(model.params.values)
    if not np.isfinite(e):
        _diagnose_nonfinite(model, metric, grid)
        raise EnergyEvaluationError(float("nan"), model.theta0)
    return e


def energy_gradient(model: PathModel, metric: MetricField, grid: QuadGrid = None):
    """(energy, dE/dbeta) via one reverse sweep."""
    grid = grid or QuadGrid()
    kern = _cached_kernel(model, metric, grid)
    e, g = kern.energy_and_grad(model.params.values)
    if not np.isfinite(e) or not np.all(np.isfinite(g)):
        _diagnose_nonfinite(model, metric, grid)
    return e, g


def energy_of_samples(metric: MetricField, thetas, vels, grid: QuadGrid) -> float:
    """Quadrature energy from sampled positions/velocities (no network)."""
    thetas = np.asarray(thetas, dtype=np.float64)
    vels = np.asarray(vels, dtype=np.float64)
    q = np.empty(grid.n_points)
    for i in range(grid.n_points):
        q[i] = float(vels[i] @ metric.matrix(thetas[i]) @ vels[i])
    return 0.5 * grid.integrate(q)


def straight_line_energy(metric: MetricField, theta0, theta1,
                         grid: QuadGrid = None) -> float:
    """Energy of the straight chart-space segment; the optimizer's baseline."""
    grid = grid or QuadGrid()
    theta0 = np.asarray(theta0, dtype=np.float64)
    theta1 = np.asarray(theta1, dtype=np.float64)
    delta = theta1 - theta0
    thetas = theta0[None, :] + grid.nodes[:, None] * delta[None, :]
    vels = np.broadcast_to(delta, thetas.shape)
    return energy_of_samples(metric, thetas, vels, grid)


# -- optimizer ----------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    epochs: int = 10000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grid_points: int = 250
    divergence_bound: float = 1e12


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def fresh(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState,
              config: TrainConfig):
    """One ADAM update; returns (new_params, new_state) without mutation."""
    t = state.step + 1
    m = config.beta1 * state.m + (1.0 - config.beta1) * grads
    v = config.beta2 * state.v + (1.0 - config.beta2) * grads * grads
    mhat = m / (1.0 - config.beta1 ** t)
    vhat = v / (1.0 - config.beta2 ** t)
    new = params - config.learning_rate * mhat / (np.sqrt(vhat) + config.eps)
    return new, AdamState(m, v, t)


@dataclass
class ConvergenceTrace:
    epochs: np.ndarray
    energies: np.ndarray
    wall_ms: np.ndarray

    @property
    def final_energy(self) -> float:
        return float(self.energies[-1])


@dataclass
class TrainResult:
    model: PathModel
    trace: ConvergenceTrace

    @property
    def final_energy(self) -> float:
        return self.trace.final_energy


def train(model: PathModel, metric: MetricField, config: TrainConfig,
          grid: QuadGrid = None, kernel: EnergyKernel = None) -> TrainResult:
    """Full-batch ADAM on the discrete energy; deterministic for a fixed seed.

    The trace records the energy at each epoch (before that epoch's update)
    plus a final row with the post-training energy.
    """
    grid = grid or QuadGrid(config.grid_points)
    kern = kernel or EnergyKernel(model.arch, metric, grid, model.theta0, model.theta1)
    beta = model.params.values.copy()
    m = np.zeros_like(beta)
    v = np.zeros_like(beta)
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    n = config.epochs
    energies = np.empty(n + 1)
    wall = np.empty(n + 1)
    start = time.perf_counter()
    for e in range(n):
        en, g = kern.energy_and_grad(beta)
        if not np.isfinite(en) or abs(en) > config.divergence_bound:
            partial = ConvergenceTrace(
                np.arange(e), energies[:e].copy(), wall[:e].copy()
            )
            raise DivergenceError(e, en, partial)
        energies[e] = en
        wall[e] = 1e3 * (time.perf_counter() - start)
        t = e + 1
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        mhat = m / (1.0 - b1 ** t)
        vhat = v / (1.0 - b2 ** t)
        beta -= lr * mhat / (np.sqrt(vhat) + eps)
    energies[n] = kern.energy(beta)
    wall[n] = 1e3 * (time.perf_counter() - start)
    trace = ConvergenceTrace(np.arange(n + 1), energies, wall)
    return TrainResult(model.replaced(beta), trace)
