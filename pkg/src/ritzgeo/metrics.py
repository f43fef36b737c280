"""Metric families: surface pullbacks, a smoothed refractive field around a
helical axis, and the strain metric induced by a displacement network.

Every family evaluates through one generic code path (metrics.matrix_generic)
so the same formulas serve plain floats, forward multi-duals (exact metric
derivatives for the Christoffel oracle), and tape variables (recording the
training objective).
"""

import math
from dataclasses import dataclass

import numpy as np

from .engine import fmath
from .engine.backend import default_backend
from .engine.dual import MultiDual
from .engine.executors import helix_axis
from .engine.tape import Tape, Var, VarRange
from .networks import Architecture, layer_dims
from .quadrature import QuadGrid


class MetricField:
    """Base: symmetric positive-definite g(theta) on a k-dimensional chart."""

    dim: int

    def matrix_generic(self, theta):
        """k x k nested list of metric entries over generic scalars."""
        raise NotImplementedError

    def matrix(self, theta) -> np.ndarray:
        g = self.matrix_generic([float(x) for x in theta])
        return np.array([[fmath.value_of(e) for e in row] for row in g], dtype=np.float64)

    def quadratic_generic(self, theta, vel):
        """sum_ij g_ij(theta) vel_i vel_j with exact-zero entries skipped."""
        g = self.matrix_generic(theta)
        acc = None
        for i in range(self.dim):
            for j in range(self.dim):
                e = g[i][j]
                if isinstance(e, float) and e == 0.0:
                    continue
                term = e * vel[i] * vel[j] if not (isinstance(e, float) and e == 1.0) else vel[i] * vel[j]
                acc = term if acc is None else acc + term
        if acc is None:
            raise ValueError("metric contracted to nothing")
        return acc

    def emit_quadratic(self, tape: Tape, theta_vars, vel_vars) -> Var:
        """Record the integrand row theta_dot' g(theta) theta_dot."""
        return self.quadratic_generic(theta_vars, vel_vars)


class ConstantMetric(MetricField):
    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("metric matrix must be square")
        if not np.allclose(m, m.T):
            raise ValueError("metric matrix must be symmetric")
        self._m = m
        self.dim = m.shape[0]

    def matrix_generic(self, theta):
        return [[float(self._m[i, j]) for j in range(self.dim)] for i in range(self.dim)]


def identity_metric(dim: int) -> ConstantMetric:
    return ConstantMetric(np.eye(dim))


class SurfaceMetric(MetricField):
    """Pullback g = J' J of an embedding map via forward multi-duals."""

    def __init__(self, surface, dim: int, name: str = "surface"):
        self.surface = surface
        self.dim = dim
        self.name = name

    def embed(self, theta):
        """Ambient coordinates of a chart point (generic scalars ok)."""
        return self.surface(list(theta))

    def matrix_generic(self, theta):
        k = self.dim
        seeds = [
            MultiDual(theta[i], tuple(1.0 if j == i else None for j in range(k)))
            for i in range(k)
        ]
        ambient = self.surface(seeds)
        g = [[None] * k for _ in range(k)]
        for comp in ambient:
            if not isinstance(comp, MultiDual):
                continue  # constant ambient component: no contribution
            t = comp.tangents
            for i in range(k):
                if t[i] is None:
                    continue
                for j in range(i, k):
                    if t[j] is None:
                        continue
                    term = t[i] * t[j]
                    g[i][j] = term if g[i][j] is None else g[i][j] + term
        for i in range(k):
            for j in range(i, k):
                e = 0.0 if g[i][j] is None else g[i][j]
                g[i][j] = e
                g[j][i] = e
        return g


def landscape_surface_fn(h: float, f: float):
    """Graph surface (t1, t2, elevation): ridges where both sine factors peak."""

    def surface(theta):
        t1, t2 = theta
        s = fmath.sin((f * math.pi) * t1) * fmath.sin((f * math.pi) * (t1 * t2))
        return [t1, t2, h * (s * s)]

    return surface


def landscape_metric(h: float, f: float) -> SurfaceMetric:
    return SurfaceMetric(landscape_surface_fn(h, f), dim=2, name="landscape")


def landscape_elevation(theta, h: float, f: float):
    return landscape_surface_fn(h, f)(list(theta))[2]


def sphere_surface(theta):
    t1, t2 = theta
    s1 = fmath.sin(t1)
    return [s1 * fmath.cos(t2), s1 * fmath.sin(t2), fmath.cos(t1)]


def sphere_metric() -> SurfaceMetric:
    return SurfaceMetric(sphere_surface, dim=2, name="sphere")


@dataclass(frozen=True)
class HelixField:
    """Refractive index field concentrated in a tube around a helical axis.

    The sharp field jumps from n1 inside the epsilon-tube to n0 outside; the
    smooth variant blends across the wall with a sigmoid of width tau. The
    sharp field is kept for reporting; training differentiates the smooth one.
    """

    n0: float = 1.0
    n1: float = 20.0
    epsilon: float = 0.2
    radius: float = 0.75
    tau: float = 0.05
    smooth: bool = True
    axis_samples: int = 400
    refine_iters: int = 48

    def axis_point(self, t):
        return helix_axis(t, self.radius)

    def axis_sample_table(self) -> np.ndarray:
        ts = np.linspace(-1.0, 1.0, self.axis_samples)
        pts = self.axis_point(ts)
        return np.ascontiguousarray(np.column_stack([ts, pts]))

    def distance(self, points):
        """(d, t_star) for an [n, 3] batch of points."""
        d, t_star, _ = default_backend().helix_min_distance(
            np.atleast_2d(np.asarray(points, dtype=np.float64)),
            self.axis_sample_table(),
            self.radius,
            self.refine_iters,
        )
        return d, t_star


def distance_to_axis(field: HelixField, point) -> float:
    d, _ = field.distance(np.asarray(point, dtype=np.float64).reshape(1, 3))
    return float(d[0])


def refractive_index(field: HelixField, points) -> np.ndarray:
    """Index values for an [n, 3] batch under the field's smooth/sharp setting."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d, _ = field.distance(pts)
    if field.smooth:
        z = (field.epsilon - d) / field.tau
        return field.n0 + (field.n1 - field.n0) * (0.5 * np.tanh(0.5 * z) + 0.5)
    return np.where(d <= field.epsilon, field.n1, field.n0)


class RefractiveMetric(MetricField):
    """Isotropic optical metric g = n(theta)^2 I over the 3-d slab chart."""

    def __init__(self, field: HelixField):
        self.field = field
        self.dim = 3

    def _distance_generic(self, theta):
        f = self.field
        if all(fmath.is_numeric(x) for x in theta):
            return distance_to_axis(f, [float(x) for x in theta])
        if all(isinstance(x, MultiDual) for x in theta):
            vals = [fmath.value_of(x) for x in theta]
            d, _, unit = default_backend().helix_min_distance(
                np.asarray(vals, dtype=np.float64).reshape(1, 3),
                f.axis_sample_table(), f.radius, f.refine_iters,
            )
            d0, u = float(d[0]), unit[0]
            k = len(theta[0].tangents)
            tangents = []
            for i in range(k):
                acc = None
                for c in range(3):
                    tc = theta[c].tangents[i]
                    if tc is None or u[c] == 0.0:
                        continue
                    term = float(u[c]) * tc
                    acc = term if acc is None else acc + term
                tangents.append(acc)
            return MultiDual(d0, tangents)
        if all(isinstance(x, Var) for x in theta):
            tape = theta[0].tape
            return tape.helix_distance(
                theta[0], theta[1], theta[2],
                f.axis_sample_table(), f.radius, f.refine_iters,
            )
        raise TypeError("unsupported scalar type for the refractive metric")

    def index_generic(self, theta):
        f = self.field
        if not f.smooth:
            raise ValueError("the sharp field is not differentiable; use floats")
        d = self._distance_generic(theta)
        z = (f.epsilon - d) * (1.0 / f.tau)
        return f.n0 + (f.n1 - f.n0) * fmath.sigmoid(z)

    def matrix_generic(self, theta):
        if not self.field.smooth and all(fmath.is_numeric(x) for x in theta):
            n = float(refractive_index(self.field, [float(x) for x in theta])[0])
            n2 = n * n
            return [[n2 if i == j else 0.0 for j in range(3)] for i in range(3)]
        n = self.index_generic(theta)
        n2 = n * n
        return [[n2 if i == j else 0.0 for j in range(3)] for i in range(3)]

    def quadratic_generic(self, theta, vel):
        n = self.index_generic(theta)
        speed2 = vel[0] * vel[0] + vel[1] * vel[1] + vel[2] * vel[2]
        return (n * n) * speed2


# -- strain metric ------------------------------------------------------------


def _act_derivs(arch: Architecture, z: np.ndarray):
    """(f(z), f'(z), f''(z)) for the hidden activation, vectorized."""
    if arch.activation == "sine":
        w = arch.omega0
        s, c = np.sin(w * z), np.cos(w * z)
        return s, w * c, -(w * w) * s
    y = np.tanh(z)
    s = 1.0 - y * y
    return y, s, -2.0 * y * s


@dataclass(frozen=True)
class StrainMetricDef:
    """Displacement ansatz u(x; theta) = sin(pi x) * M(x; theta) on [0, 1].

    The induced metric is g_kj(theta) = integral of
    (d^2 u / dx dtheta_k)(d^2 u / dx dtheta_j) dx on the x grid. mask selects
    the trainable subset of the network parameters (point APIs only); the
    frozen remainder comes from base.
    """

    arch: Architecture
    x_nodes: int = 100
    mask: np.ndarray = None
    base: np.ndarray = None

    def __post_init__(self):
        if self.arch.output_dim != 1 or self.arch.fourier_f > 0:
            raise ValueError("displacement network must map one scalar to one scalar")
        if self.mask is not None:
            object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))
            if self.base is None:
                raise ValueError("a mask requires base values for frozen entries")
            object.__setattr__(
                self, "base", np.asarray(self.base, dtype=np.float64).copy()
            )

    @property
    def dim(self) -> int:
        from .networks import param_count

        return param_count(self.arch) if self.mask is None else int(self.mask.sum())

    def x_grid(self) -> QuadGrid:
        return QuadGrid(self.x_nodes)

    def full_params(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).ravel()
        if self.mask is None:
            return theta
        full = self.base.copy()
        full[self.mask] = theta
        return full

    def full_direction(self, dvec) -> np.ndarray:
        dvec = np.asarray(dvec, dtype=np.float64).ravel()
        if self.mask is None:
            return dvec
        full = np.zeros_like(self.base)
        full[self.mask] = dvec
        return full


def _segments(arch: Architecture):
    """(W_slice, b_slice or None, fan_in, fan_out) per layer of the flat vector."""
    out = []
    pos = 0
    dims = layer_dims(arch)
    for li, (fan_in, fan_out) in enumerate(dims):
        last = li == len(dims) - 1
        w = slice(pos, pos + fan_in * fan_out)
        pos += fan_in * fan_out
        b = None
        if not last:
            b = slice(pos, pos + fan_out)
            pos += fan_out
        out.append((w, b, fan_in, fan_out))
    return out


def _disp_channels(defn: StrainMetricDef, full, x, dfull=None):
    """Forward the displacement trunk with x-dual and optional theta-direction
    channels. Returns (Mv, Mx, Mp, Mxp); p-channels are None without dfull.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    arch = defn.arch
    nb = x.size
    yv = x.reshape(1, nb)
    yx = np.ones((1, nb))
    yp = np.zeros((1, nb)) if dfull is not None else None
    yxp = np.zeros((1, nb)) if dfull is not None else None
    segs = _segments(arch)
    for li, (wsl, bsl, fan_in, fan_out) in enumerate(segs):
        last = li == len(segs) - 1
        W = full[wsl].reshape(fan_out, fan_in)
        zv = W @ yv
        zx = W @ yx
        if bsl is not None:
            zv = zv + full[bsl][:, None]
        if dfull is not None:
            Wp = dfull[wsl].reshape(fan_out, fan_in)
            zp = W @ yp + Wp @ yv
            zxp = W @ yxp + Wp @ yx
            if bsl is not None:
                zp = zp + dfull[bsl][:, None]
        if last:
            return (
                zv.ravel(),
                zx.ravel(),
                zp.ravel() if dfull is not None else None,
                zxp.ravel() if dfull is not None else None,
            )
        fv, f1, f2 = _act_derivs(arch, zv)
        yv = fv
        if dfull is not None:
            yxp = f1 * zxp + f2 * zx * zp
            yp = f1 * zp
        yx = f1 * zx
    raise AssertionError("unreachable")


def displacement(defn: StrainMetricDef, theta, x):
    """(u, du/dx) at the x values for masked parameters theta."""
    full = defn.full_params(theta)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    mv, mx, _, _ = _disp_channels(defn, full, x)
    s, ds = np.sin(np.pi * x), np.pi * np.cos(np.pi * x)
    return s * mv, ds * mv + s * mx


def strain_mixed_derivative(defn: StrainMetricDef, theta, x) -> np.ndarray:
    """d^2 u / dx dtheta_k at scalar x, one entry per trainable parameter."""
    full = defn.full_params(theta)
    k = defn.dim
    x = float(x)
    s, ds = math.sin(math.pi * x), math.pi * math.cos(math.pi * x)
    out = np.zeros(k)
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        _, _, mp, mxp = _disp_channels(defn, full, x, defn.full_direction(e))
        out[i] = ds * mp[0] + s * mxp[0]
    return out


def _mixed_columns(defn: StrainMetricDef, theta) -> np.ndarray:
    """C[k, x] = d^2 u / dx dtheta_k on the x grid."""
    full = defn.full_params(theta)
    grid = defn.x_grid()
    x = grid.nodes
    s, ds = np.sin(np.pi * x), np.pi * np.cos(np.pi * x)
    k = defn.dim
    cols = np.zeros((k, x.size))
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        _, _, mp, mxp = _disp_channels(defn, full, x, defn.full_direction(e))
        cols[i] = ds * mp + s * mxp
    return cols


class StrainMetric(MetricField):
    """Metric induced on displacement-parameter space by the strain energy."""

    def __init__(self, defn: StrainMetricDef):
        self.defn = defn
        self.dim = defn.dim

    def matrix(self, theta) -> np.ndarray:
        c = _mixed_columns(self.defn, theta)
        w = self.defn.x_grid().weights
        return (c * w) @ c.T

    def matrix_generic(self, theta):
        if all(fmath.is_numeric(x) for x in theta):
            return self.matrix(theta).tolist()
        raise NotImplementedError(
            "strain metric derivatives are third derivatives of the "
            "displacement network; the Christoffel oracle arm is intended "
            "for the low-dimensional analytic metrics"
        )

    def emit_quadratic(self, tape: Tape, theta_vars, vel_vars) -> Var:
        defn = self.defn
        if defn.mask is not None:
            raise ValueError("training requires the full parameter vector (no mask)")
        if defn.arch.activation != "tanh":
            raise ValueError("the strain training kernel supports tanh trunks")
        k = self.dim
        T = theta_vars[0].width
        grid = defn.x_grid()
        X = grid.n_points
        lanes = T * X

        th = tape.alloc_range(k, T)
        vl = tape.alloc_range(k, T)
        for i in range(k):
            tape.copy_into(th[i], theta_vars[i])
            tape.copy_into(vl[i], vel_vars[i])

        xg = grid.nodes
        xv = tape.const(np.tile(xg, T))
        ones = tape.const(np.ones(lanes))
        s_row = tape.const(np.tile(np.sin(np.pi * xg), T))
        ds_row = tape.const(np.tile(np.pi * np.cos(np.pi * xg), T))

        def sub(rng: VarRange, sl: slice) -> VarRange:
            n = sl.stop - sl.start
            return VarRange(tape, rng.start + sl.start, n, T)

        segs = _segments(defn.arch)
        yv = VarRange(tape, xv.row, 1, lanes)
        yx = VarRange(tape, ones.row, 1, lanes)
        yp = None
        yxp = None
        for li, (wsl, bsl, fan_in, fan_out) in enumerate(segs):
            last = li == len(segs) - 1
            W = sub(th, wsl)
            Wp = sub(vl, wsl)
            if last:
                # only the theta-direction channels feed the strain integrand
                mp = tape.dense(yp, W, fan_out)
                tape.dense(yv, Wp, fan_out, out=mp, accumulate=True)
                mxp = tape.dense(yxp, W, fan_out)
                tape.dense(yx, Wp, fan_out, out=mxp, accumulate=True)
                break
            onesr = VarRange(tape, ones.row, 1, lanes)
            zv = tape.dense(yv, W, fan_out)
            tape.dense(onesr, sub(th, bsl), fan_out, out=zv, accumulate=True)
            zx = tape.dense(yx, W, fan_out)
            zp = tape.dense(yp, W, fan_out) if yp is not None else tape.alloc_range(fan_out, lanes)
            if yp is None:
                # first layer: the x-dual input has no theta dependence
                tape.dense(yv, Wp, fan_out, out=zp)
            else:
                tape.dense(yv, Wp, fan_out, out=zp, accumulate=True)
            tape.dense(onesr, sub(vl, bsl), fan_out, out=zp, accumulate=True)
            if yxp is None:
                zxp = tape.dense(yx, Wp, fan_out)
            else:
                zxp = tape.dense(yxp, W, fan_out)
                tape.dense(yx, Wp, fan_out, out=zxp, accumulate=True)
            nyv = tape.alloc_range(fan_out, lanes)
            nyx = tape.alloc_range(fan_out, lanes)
            nyp = tape.alloc_range(fan_out, lanes)
            nyxp = tape.alloc_range(fan_out, lanes)
            for u in range(fan_out):
                tape.tanh4_into(
                    (nyv[u], nyx[u], nyp[u], nyxp[u]),
                    (zv[u], zx[u], zp[u], zxp[u]),
                )
            yv, yx, yp, yxp = nyv, nyx, nyp, nyxp

        u_xp = ds_row * mp[0] + s_row * mxp[0]
        return tape.wsumb(u_xp * u_xp, grid.weights)
