"""Experiment drivers: landscape surface, helical waveguide, elastic bar.

Each driver trains the variational solver on one configuration, validates the
result against the classical oracles, and (optionally) writes a run directory:
config.echo, path.csv, path_embedded.csv / snapshots.csv, convergence.csv,
residual.csv, and a manifest with the headline numbers.
"""

import os
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .engine.tape import Tape, VarRange
from .errors import FitError, GradientCheckError
from .metrics import (
    HelixField,
    RefractiveMetric,
    StrainMetric,
    StrainMetricDef,
    _segments,
    displacement,
    landscape_elevation,
    landscape_metric,
    landscape_surface_fn,
)
from .networks import Architecture, init_params, param_count
from .quadrature import QuadGrid
from .oracle import el_residual
from .runio import write_config_echo, write_csv, write_manifest
from .solver import (
    PathModel,
    TrainConfig,
    energy_of_samples,
    make_model,
    path_derivatives,
    straight_line_energy,
    train,
)


def _stage_seeds(seed: int, n: int):
    """Independent integer seeds for the sequential stages of one experiment."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def _write_common(out_dir, config, model, trace, residual, manifest):
    os.makedirs(out_dir, exist_ok=True)
    write_config_echo(os.path.join(out_dir, "config.echo"), config)
    grid = QuadGrid(int(config["train.grid_points"]))
    pos, _, _ = path_derivatives(model, grid.nodes)
    write_csv(
        os.path.join(out_dir, "path.csv"),
        ["t"] + [f"theta{k+1}" for k in range(model.dim)],
        np.column_stack([grid.nodes, pos]),
    )
    write_csv(
        os.path.join(out_dir, "convergence.csv"),
        ["epoch", "energy", "wall_ms"],
        np.column_stack([trace.epochs, trace.energies, trace.wall_ms]),
    )
    if residual is not None:
        norms = np.sqrt((residual.residuals ** 2).sum(axis=1))
        write_csv(
            os.path.join(out_dir, "residual.csv"),
            ["t"] + [f"r{k+1}" for k in range(model.dim)] + ["norm"],
            np.column_stack([residual.ts, residual.residuals, norms]),
        )
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return pos


def _base_manifest(config, seed, final_energy, baseline, wall_s, stages):
    return {
        "tool_version": __version__,
        "config": config,
        "seed": seed,
        "final_energy": final_energy,
        "baseline_energy": baseline,
        "wall_time_s": wall_s,
        "stages": stages,
    }


# -- landscape ----------------------------------------------------------------


@dataclass
class LandscapeRun:
    model: PathModel
    trace: object
    residual: object
    final_energy: float
    straight_energy: float
    max_elevation: float
    straight_max_elevation: float
    out_dir: str = None


def run_landscape(h: float, f: float, arch: Architecture = None,
                  config: TrainConfig = None, seed: int = 0,
                  out_dir: str = None) -> LandscapeRun:
    arch = arch or Architecture(hidden_widths=(25, 25), output_dim=2)
    config = config or TrainConfig(epochs=10000, seed=seed)
    theta0, theta1 = [-1.0, -1.0], [1.0, 1.0]
    metric = landscape_metric(h, f)
    t_start = time.perf_counter()
    model = make_model(arch, theta0, theta1, seed=seed)
    result = train(model, metric, config)
    wall = time.perf_counter() - t_start
    straight = straight_line_energy(metric, theta0, theta1)
    residual = el_residual(result.model, metric)

    ts = np.linspace(0.0, 1.0, 1001)
    pos, _, _ = path_derivatives(result.model, ts)
    elev = np.array([landscape_elevation(p, h, f) for p in pos])
    diag = np.stack([ts * 2.0 - 1.0, ts * 2.0 - 1.0], axis=1)
    elev_sl = np.array([landscape_elevation(p, h, f) for p in diag])

    run = LandscapeRun(
        model=result.model, trace=result.trace, residual=residual,
        final_energy=result.final_energy, straight_energy=straight,
        max_elevation=float(elev.max()),
        straight_max_elevation=float(elev_sl.max()),
    )
    if out_dir:
        cfg = {
            "experiment": "landscape", "seed": seed,
            "metric.name": "landscape", "metric.h": h, "metric.f": f,
            "arch.kind": "mlp", "arch.hidden": list(arch.hidden_widths),
            "arch.activation": arch.activation,
            "train.lr": config.learning_rate, "train.epochs": config.epochs,
            "train.grid_points": config.grid_points,
            "theta0": theta0, "theta1": theta1,
        }
        manifest = _base_manifest(cfg, seed, run.final_energy, straight, wall,
                                  {"train": "ok", "validate": "ok"})
        manifest["max_elevation_trained"] = run.max_elevation
        manifest["max_elevation_straight"] = run.straight_max_elevation
        manifest["residual_rms"] = residual.rms
        pos_grid = _write_common(out_dir, cfg, result.model, result.trace,
                                 residual, manifest)
        surface = landscape_surface_fn(h, f)
        emb = np.array([surface(list(p)) for p in pos_grid])
        grid = QuadGrid(config.grid_points)
        write_csv(os.path.join(out_dir, "path_embedded.csv"),
                  ["t", "x", "y", "z"], np.column_stack([grid.nodes, emb]))
        run.out_dir = out_dir
    return run


# -- waveguide ----------------------------------------------------------------


WAVEGUIDE_ARCHS = ("mlp", "siren", "fourier")


def waveguide_architecture(kind: str, seed: int = 0) -> Architecture:
    if kind == "fourier":
        return Architecture(hidden_widths=(15, 15), output_dim=3,
                            fourier_f=15, fourier_sigma2=4.0, seed=seed)
    if kind == "siren":
        return Architecture(hidden_widths=(15, 15), output_dim=3,
                            activation="sine")
    if kind == "mlp":
        return Architecture(hidden_widths=(15, 15), output_dim=3)
    raise ValueError(f"unknown waveguide architecture {kind!r}")


@dataclass
class WaveguideRun:
    model: PathModel
    trace: object
    final_energy: float
    sharp_energy: float
    straight_energy: float
    straight_sharp_energy: float
    arch_kind: str
    out_dir: str = None


def run_waveguide(arch_kind: str = "fourier", config: TrainConfig = None,
                  seed: int = 0, out_dir: str = None,
                  field: HelixField = None) -> WaveguideRun:
    config = config or TrainConfig(epochs=20000, seed=seed)
    field = field or HelixField()
    if not field.smooth:
        raise ValueError("training requires the smoothed field")
    sharp = HelixField(n0=field.n0, n1=field.n1, epsilon=field.epsilon,
                       radius=field.radius, tau=field.tau, smooth=False)
    metric = RefractiveMetric(field)
    sharp_metric = RefractiveMetric(sharp)
    theta0, theta1 = [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]
    arch = waveguide_architecture(arch_kind, seed=seed)
    t_start = time.perf_counter()
    model = make_model(arch, theta0, theta1, seed=seed)
    result = train(model, metric, config)
    wall = time.perf_counter() - t_start

    grid = QuadGrid(config.grid_points)
    pos, vel, _ = path_derivatives(result.model, grid.nodes)
    sharp_energy = energy_of_samples(sharp_metric, pos, vel, grid)
    straight = straight_line_energy(metric, theta0, theta1, grid)
    straight_sharp = straight_line_energy(sharp_metric, theta0, theta1, grid)

    run = WaveguideRun(
        model=result.model, trace=result.trace,
        final_energy=result.final_energy, sharp_energy=sharp_energy,
        straight_energy=straight, straight_sharp_energy=straight_sharp,
        arch_kind=arch_kind,
    )
    if out_dir:
        cfg = {
            "experiment": "waveguide", "seed": seed,
            "metric.name": "waveguide",
            "metric.n0": field.n0, "metric.n1": field.n1,
            "metric.epsilon": field.epsilon, "metric.radius": field.radius,
            "metric.tau": field.tau,
            "arch.kind": arch_kind, "arch.hidden": list(arch.hidden_widths),
            "train.lr": config.learning_rate, "train.epochs": config.epochs,
            "train.grid_points": config.grid_points,
            "theta0": theta0, "theta1": theta1,
        }
        manifest = _base_manifest(cfg, seed, run.final_energy, straight, wall,
                                  {"train": "ok", "validate": "ok"})
        manifest["sharp_energy"] = sharp_energy
        manifest["straight_sharp_energy"] = straight_sharp
        manifest["escaped_straight_line"] = bool(run.final_energy < 0.5 * straight)
        pos_grid = _write_common(out_dir, cfg, result.model, result.trace,
                                 None, manifest)
        # the chart is already the ambient space; the embedded path is the path
        write_csv(os.path.join(out_dir, "path_embedded.csv"),
                  ["t", "x", "y", "z"],
                  np.column_stack([grid.nodes, pos_grid]))
        run.out_dir = out_dir
    return run


# -- elastic bar --------------------------------------------------------------


BAR_TARGETS = {
    "zero": lambda x: np.zeros_like(x),
    "sin_pi": lambda x: np.sin(np.pi * x),
    "neg_2x_sin_pi": lambda x: -2.0 * x * np.sin(np.pi * x),
    "sin_3pi": lambda x: np.sin(3.0 * np.pi * x),
}


def _emit_fit_objective(tape: Tape, arch: Architecture, x: np.ndarray,
                        target: np.ndarray, weights: np.ndarray):
    """Record the spatial-quadrature MSE of sin(pi x) * M(x) against target."""
    P = param_count(arch)
    tape.params(np.zeros(P))
    L = x.size
    ones = tape.const(np.ones(L))
    onesr = VarRange(tape, ones.row, 1, L)
    xrow = tape.const(x)
    yv = VarRange(tape, xrow.row, 1, L)
    segs = _segments(arch)
    for li, (wsl, bsl, fan_in, fan_out) in enumerate(segs):
        last = li == len(segs) - 1
        W = VarRange(tape, wsl.start, wsl.stop - wsl.start, 1)
        zv = tape.dense(yv, W, fan_out)
        if bsl is not None:
            b = VarRange(tape, bsl.start, bsl.stop - bsl.start, 1)
            tape.dense(onesr, b, fan_out, out=zv, accumulate=True)
        if last:
            m = zv[0]
            break
        nyv = tape.alloc_range(fan_out, L)
        for u in range(fan_out):
            if arch.activation == "tanh":
                tape.copy_into(nyv[u], zv[u].tanh())
            else:
                tape.copy_into(nyv[u], (arch.omega0 * zv[u]).sin())
        yv = nyv
    u_hat = tape.const(np.sin(np.pi * x)) * m
    diff = u_hat - tape.const(target)
    return tape.wsumb(diff * diff, weights)


def fit_endpoint(defn: StrainMetricDef, target, epochs: int = 20000,
                 learning_rate: float = 1e-2, seed: int = 0,
                 mse_limit: float = 1e-5, polish_epochs: int = 5000,
                 polish_lr: float = 1e-3):
    """Fit displacement parameters to a closed-form target; returns (theta, mse).

    The objective is the spatial trapezoid quadrature of (u_hat - target)^2,
    minimized with ADAM at `learning_rate`, then annealed at `polish_lr`.
    Raises FitError when the final MSE misses the configured floor.
    """
    if defn.mask is not None:
        raise ValueError("endpoint fitting expects an unmasked displacement net")
    if isinstance(target, str):
        target = BAR_TARGETS[target]
    grid = defn.x_grid()
    x = grid.nodes
    tvals = np.asarray(target(x), dtype=np.float64)
    tape = Tape()
    root = _emit_fit_objective(tape, defn.arch, x, tvals, grid.weights)
    ex = tape.freeze().executor()
    beta = init_params(defn.arch, seed).values.copy()
    m = np.zeros_like(beta)
    v = np.zeros_like(beta)
    b1, b2, eps = 0.9, 0.999, 1e-8
    t = 0
    for lr, n in ((learning_rate, epochs), (polish_lr, polish_epochs)):
        for _ in range(n):
            ex.load_params(beta)
            ex.forward()
            ex.reverse(root.row)
            g = ex.param_grads()
            t += 1
            m += (1.0 - b1) * (g - m)
            v += (1.0 - b2) * (g * g - v)
            beta -= lr * (m / (1.0 - b1 ** t)) / (
                np.sqrt(v / (1.0 - b2 ** t)) + eps
            )
    ex.load_params(beta)
    ex.forward()
    mse = float(ex.value(root.row)[0])
    if not np.isfinite(mse) or mse > mse_limit:
        raise FitError(mse, mse_limit)
    return beta, mse


def strain_energy(defn: StrainMetricDef, theta) -> float:
    """U = integral of (du/dx)^2 / 2 over the bar, by spatial trapezoid."""
    grid = defn.x_grid()
    _, ux = displacement(defn, theta, grid.nodes)
    return 0.5 * float(grid.integrate(ux ** 2))


@dataclass
class BarTrajectory:
    defn: StrainMetricDef
    ts: np.ndarray
    thetas: np.ndarray  # [n, k]
    vels: np.ndarray  # [n, k]


def bar_power(traj: BarTrajectory) -> np.ndarray:
    """P(t_i) = sum_x w_x u_x u_xt, one directional pass per node: u_xt is the
    Jacobian-vector product of u_x with the parameter velocity."""
    from .metrics import _disp_channels

    defn = traj.defn
    grid = defn.x_grid()
    x = grid.nodes
    s, ds = np.sin(np.pi * x), np.pi * np.cos(np.pi * x)
    power = np.empty(traj.ts.size)
    for i in range(traj.ts.size):
        full = defn.full_params(traj.thetas[i])
        dfull = defn.full_direction(traj.vels[i])
        mv, mx, mp, mxp = _disp_channels(defn, full, x, dfull)
        ux = ds * mv + s * mx
        uxt = ds * mp + s * mxp
        power[i] = float(grid.integrate(ux * uxt))
    return power


def power_telescoping_check(traj: BarTrajectory):
    """(integrated power, strain-energy difference, gap).

    P(t) integrated over t should telescope to U(end) - U(start); the gap is
    pure time-quadrature error.
    """
    power = bar_power(traj)
    tgrid = QuadGrid(traj.ts.size)
    lhs = float((tgrid.weights * power).sum()) * (traj.ts[-1] - traj.ts[0])
    rhs = strain_energy(traj.defn, traj.thetas[-1]) - strain_energy(
        traj.defn, traj.thetas[0]
    )
    return lhs, rhs, abs(lhs - rhs)


@dataclass
class BarRun:
    model: PathModel
    trace: object
    final_energy: float
    fit_mse0: float
    fit_mse1: float
    telescoping_gap: float
    strain_energies: np.ndarray
    snapshot_ts: np.ndarray
    out_dir: str = None


def run_bar(u0: str = "sin_pi", u1: str = "neg_2x_sin_pi",
            disp_arch: Architecture = None, path_arch: Architecture = None,
            config: TrainConfig = None, seed: int = 0,
            out_dir: str = None) -> BarRun:
    disp_arch = disp_arch or Architecture(input_dim=1, hidden_widths=(10, 10),
                                          output_dim=1)
    defn = StrainMetricDef(arch=disp_arch, x_nodes=100)
    k = defn.dim
    path_arch = path_arch or Architecture(hidden_widths=(25, 25), output_dim=k)
    config = config or TrainConfig(epochs=10000, seed=seed)
    metric = StrainMetric(defn)
    s_fit0, s_fit1, s_path = _stage_seeds(seed, 3)

    t_start = time.perf_counter()
    theta0, mse0 = fit_endpoint(defn, u0, seed=s_fit0)
    theta1, mse1 = fit_endpoint(defn, u1, seed=s_fit1)

    model = make_model(path_arch, theta0, theta1, seed=s_path)
    _nested_chain_guard(model, metric)
    result = train(model, metric, config)
    wall = time.perf_counter() - t_start

    grid = QuadGrid(config.grid_points)
    pos, vel, _ = path_derivatives(result.model, grid.nodes)
    dense_ts = np.linspace(0.0, 1.0, 1001)
    dpos, dvel, _ = path_derivatives(result.model, dense_ts)
    traj = BarTrajectory(defn, dense_ts, dpos, dvel)
    lhs, rhs, gap = power_telescoping_check(traj)
    energies_u = np.array([strain_energy(defn, pos[i]) for i in range(pos.shape[0])])

    snapshot_ts = np.linspace(0.0, 1.0, 11)
    spos, _, _ = path_derivatives(result.model, snapshot_ts)

    run = BarRun(
        model=result.model, trace=result.trace,
        final_energy=result.final_energy, fit_mse0=mse0, fit_mse1=mse1,
        telescoping_gap=gap, strain_energies=energies_u,
        snapshot_ts=snapshot_ts,
    )
    if out_dir:
        cfg = {
            "experiment": "bar", "seed": seed,
            "metric.name": "strain", "metric.x_nodes": defn.x_nodes,
            "bar.u0": u0, "bar.u1": u1,
            "arch.kind": "mlp", "arch.hidden": list(path_arch.hidden_widths),
            "disp.hidden": list(disp_arch.hidden_widths),
            "train.lr": config.learning_rate, "train.epochs": config.epochs,
            "train.grid_points": config.grid_points,
        }
        manifest = _base_manifest(cfg, seed, run.final_energy, None, wall,
                                  {"fit": "ok", "train": "ok", "validate": "ok"})
        manifest["fit_mse_u0"] = mse0
        manifest["fit_mse_u1"] = mse1
        manifest["telescoping_gap"] = gap
        manifest["strain_energy_start"] = float(energies_u[0])
        manifest["strain_energy_end"] = float(energies_u[-1])
        os.makedirs(out_dir, exist_ok=True)
        _write_common(out_dir, cfg, result.model, result.trace, None, manifest)
        xg = defn.x_grid().nodes
        rows = []
        for i, t in enumerate(snapshot_ts):
            u, _ = displacement(defn, spos[i], xg)
            for xv, uv in zip(xg, u):
                rows.append([t, xv, uv])
        write_csv(os.path.join(out_dir, "snapshots.csv"), ["t", "x", "u"], rows)
        run.out_dir = out_dir
    return run


def _nested_chain_guard(model: PathModel, metric, n_dirs: int = 2,
                        eps: float = 1e-6, limit: float = 1e-3):
    """Fail fast if dE/dbeta disagrees with finite differences; guards the
    full chain energy -> metric(theta) -> path network parameters."""
    from .solver import energy, energy_gradient

    _, g = energy_gradient(model, metric)
    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(n_dirs):
        d = rng.normal(size=g.size)
        d /= np.linalg.norm(d)
        ep = energy(model.replaced(model.params.values + eps * d), metric)
        em = energy(model.replaced(model.params.values - eps * d), metric)
        fd = (ep - em) / (2.0 * eps)
        an = float(g @ d)
        rel = abs(fd - an) / max(1e-9, abs(fd), abs(an))
        worst = max(worst, rel)
    if worst > limit:
        raise GradientCheckError(worst, limit)
