"""Command-line front end.

Subcommands: example (canned experiments), solve (generic config), oracle
(shooting validation), residual (EL residuals of an exported path), export
(SVG plots), bench (backend comparison). Exit codes: 0 ok, 2 config error,
3 numerical failure, 4 oracle non-convergence.
"""

import argparse
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DegenerateMetricError,
    DivergenceError,
    EnergyEvaluationError,
    EvaluationDomainError,
    FitError,
    GradientCheckError,
    NonFiniteError,
    ShootingError,
)
from .metrics import (
    HelixField,
    RefractiveMetric,
    identity_metric,
    landscape_elevation,
    landscape_metric,
    sphere_metric,
)
from .networks import Architecture
from .quadrature import QuadGrid
from .runio import read_config, read_csv, write_csv, write_manifest
from .solver import TrainConfig

ALLOWED_KEYS = {
    "experiment", "seed", "theta0", "theta1",
    "metric.name", "metric.h", "metric.f", "metric.dim",
    "metric.n0", "metric.n1", "metric.epsilon", "metric.radius",
    "metric.tau", "metric.smooth", "metric.x_nodes",
    "bar.u0", "bar.u1", "disp.hidden",
    "arch.kind", "arch.hidden", "arch.activation",
    "arch.fourier_f", "arch.sigma2", "arch.omega0",
    "train.lr", "train.epochs", "train.grid_points",
}

METRIC_NAMES = ("flat", "sphere", "landscape", "waveguide")

NUMERICAL_ERRORS = (
    DivergenceError, EnergyEvaluationError, NonFiniteError,
    EvaluationDomainError, FitError, GradientCheckError,
    DegenerateMetricError,
)


def validate_config(config: dict) -> dict:
    unknown = sorted(set(config) - ALLOWED_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return config


def _parse_vector(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"not a comma-separated vector: {text!r}") from None


def metric_from_config(config: dict, dim_hint: int = None):
    name = config.get("metric.name")
    if name not in METRIC_NAMES:
        raise ConfigError(
            f"metric.name must be one of {METRIC_NAMES}, got {name!r}"
        )
    if name == "flat":
        dim = int(config.get("metric.dim", dim_hint or 0))
        if dim < 1:
            raise ConfigError("flat metric needs metric.dim or endpoints")
        return identity_metric(dim)
    if name == "sphere":
        return sphere_metric()
    if name == "landscape":
        return landscape_metric(float(config.get("metric.h", 0.25)),
                                float(config.get("metric.f", 2.0)))
    field = HelixField(
        n0=float(config.get("metric.n0", 1.0)),
        n1=float(config.get("metric.n1", 20.0)),
        epsilon=float(config.get("metric.epsilon", 0.2)),
        radius=float(config.get("metric.radius", 0.75)),
        tau=float(config.get("metric.tau", 0.05)),
        smooth=bool(config.get("metric.smooth", True)),
    )
    return RefractiveMetric(field)


def _train_config(config: dict, default_epochs: int = 10000) -> TrainConfig:
    return TrainConfig(
        learning_rate=float(config.get("train.lr", 5e-3)),
        epochs=int(config.get("train.epochs", default_epochs)),
        seed=int(config.get("seed", 0)),
        grid_points=int(config.get("train.grid_points", 250)),
    )


def _arch_from_config(config: dict, output_dim: int) -> Architecture:
    kind = config.get("arch.kind", "mlp")
    hidden = tuple(int(w) for w in config.get("arch.hidden", [25, 25]))
    if kind == "fourier":
        return Architecture(
            hidden_widths=hidden, output_dim=output_dim,
            fourier_f=int(config.get("arch.fourier_f", 15)),
            fourier_sigma2=float(config.get("arch.sigma2", 4.0)),
            seed=int(config.get("seed", 0)),
        )
    if kind == "siren":
        return Architecture(hidden_widths=hidden, output_dim=output_dim,
                            activation="sine",
                            omega0=float(config.get("arch.omega0", 30.0)))
    if kind == "mlp":
        return Architecture(
            hidden_widths=hidden, output_dim=output_dim,
            activation=config.get("arch.activation", "tanh"),
        )
    raise ConfigError(f"arch.kind must be mlp, siren, or fourier, got {kind!r}")


# -- subcommands ---------------------------------------------------------------


def cmd_example(args) -> int:
    from . import experiments as E

    name = args.name
    seed = args.seed
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    cfg_kwargs = dict(
        learning_rate=args.lr if args.lr is not None else 5e-3,
        seed=seed,
        grid_points=args.grid_points if args.grid_points is not None else 250,
    )
    try:
        if name == "landscape":
            tc = TrainConfig(epochs=overrides.get("epochs", 10000), **cfg_kwargs)
            run = E.run_landscape(args.h if args.h is not None else 0.25,
                                  args.f if args.f is not None else 2.0,
                                  config=tc, seed=seed, out_dir=args.out)
            print(f"landscape: final energy {run.final_energy:.6g} "
                  f"(straight line {run.straight_energy:.6g})")
        elif name == "waveguide":
            tc = TrainConfig(epochs=overrides.get("epochs", 20000), **cfg_kwargs)
            run = E.run_waveguide(args.arch or "fourier", config=tc, seed=seed,
                                  out_dir=args.out)
            print(f"waveguide[{run.arch_kind}]: final energy "
                  f"{run.final_energy:.6g} (straight line "
                  f"{run.straight_energy:.6g}, sharp {run.sharp_energy:.6g})")
        elif name == "bar":
            tc = TrainConfig(epochs=overrides.get("epochs", 10000), **cfg_kwargs)
            run = E.run_bar(u0=args.u0 or "sin_pi",
                            u1=args.u1 or "neg_2x_sin_pi",
                            config=tc, seed=seed, out_dir=args.out)
            print(f"bar: deformation energy {run.final_energy:.6g} "
                  f"(telescoping gap {run.telescoping_gap:.3g})")
        else:
            raise ConfigError(f"unknown experiment {name!r}")
    except NUMERICAL_ERRORS as exc:
        stage = "train"
        if isinstance(exc, (FitError, GradientCheckError)):
            stage = "fit"
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            write_manifest(os.path.join(args.out, "manifest.json"), {
                "tool_version": __version__,
                "seed": seed,
                "stages": {stage: f"failed: {exc}"},
            })
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


def cmd_solve(args) -> int:
    from . import experiments as E
    from .solver import make_model, straight_line_energy, train
    from .oracle import el_residual
    from .runio import write_config_echo

    if args.config:
        config = validate_config(read_config(args.config))
    else:
        config = {}
    if args.metric:
        config["metric.name"] = args.metric
    if args.theta0:
        config["theta0"] = _parse_vector(args.theta0)
    if args.theta1:
        config["theta1"] = _parse_vector(args.theta1)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.epochs is not None:
        config["train.epochs"] = args.epochs
    if args.lr is not None:
        config["train.lr"] = args.lr
    if args.grid_points is not None:
        config["train.grid_points"] = args.grid_points
    validate_config(config)

    experiment = config.get("experiment", "solve")
    try:
        if experiment == "landscape":
            run = E.run_landscape(
                float(config.get("metric.h", 0.25)),
                float(config.get("metric.f", 2.0)),
                arch=_arch_from_config(config, 2),
                config=_train_config(config), seed=int(config.get("seed", 0)),
                out_dir=args.out,
            )
            print(f"final energy {run.final_energy:.17g}")
            return 0
        if experiment == "waveguide":
            run = E.run_waveguide(
                config.get("arch.kind", "fourier"),
                config=_train_config(config, default_epochs=20000),
                seed=int(config.get("seed", 0)), out_dir=args.out,
            )
            print(f"final energy {run.final_energy:.17g}")
            return 0
        if experiment == "bar":
            disp_hidden = tuple(int(w) for w in config.get("disp.hidden", [10, 10]))
            disp_arch = Architecture(input_dim=1, hidden_widths=disp_hidden,
                                     output_dim=1)
            run = E.run_bar(
                u0=config.get("bar.u0", "sin_pi"),
                u1=config.get("bar.u1", "neg_2x_sin_pi"),
                disp_arch=disp_arch,
                config=_train_config(config), seed=int(config.get("seed", 0)),
                out_dir=args.out,
            )
            print(f"final energy {run.final_energy:.17g}")
            return 0
        if experiment != "solve":
            raise ConfigError(f"unknown experiment {experiment!r}")

        theta0 = config.get("theta0")
        theta1 = config.get("theta1")
        if not theta0 or not theta1:
            raise ConfigError("solve requires theta0 and theta1")
        if len(theta0) != len(theta1):
            raise ConfigError("theta0 and theta1 must have the same dimension")
        metric = metric_from_config(config, dim_hint=len(theta0))
        if metric.dim != len(theta0):
            raise ConfigError(
                f"{config['metric.name']} metric is {metric.dim}-dimensional "
                f"but endpoints have dimension {len(theta0)}"
            )
        arch = _arch_from_config(config, metric.dim)
        tc = _train_config(config)
        seed = int(config.get("seed", 0))
        model = make_model(arch, theta0, theta1, seed=seed)
        result = train(model, metric, tc)
        baseline = straight_line_energy(metric, theta0, theta1)
        print(f"final energy {result.final_energy:.17g}")
        print(f"straight-line energy {baseline:.17g}")
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            from .solver import path_derivatives

            grid = QuadGrid(tc.grid_points)
            pos, _, _ = path_derivatives(result.model, grid.nodes)
            write_csv(os.path.join(args.out, "path.csv"),
                      ["t"] + [f"theta{k+1}" for k in range(metric.dim)],
                      np.column_stack([grid.nodes, pos]))
            write_csv(os.path.join(args.out, "convergence.csv"),
                      ["epoch", "energy", "wall_ms"],
                      np.column_stack([result.trace.epochs,
                                       result.trace.energies,
                                       result.trace.wall_ms]))
            rep = el_residual(result.model, metric, grid)
            norms = np.sqrt((rep.residuals ** 2).sum(axis=1))
            write_csv(os.path.join(args.out, "residual.csv"),
                      ["t"] + [f"r{k+1}" for k in range(metric.dim)] + ["norm"],
                      np.column_stack([rep.ts, rep.residuals, norms]))
            write_config_echo(os.path.join(args.out, "config.echo"), config)
            write_manifest(os.path.join(args.out, "manifest.json"), {
                "tool_version": __version__, "config": config, "seed": seed,
                "final_energy": result.final_energy,
                "baseline_energy": baseline,
                "residual_rms": rep.rms,
                "stages": {"train": "ok", "validate": "ok"},
            })
        return 0
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _csv_path_energy(metric, ts, pos):
    from .solver import energy_of_samples

    vel = np.gradient(pos, ts, axis=0)
    return energy_of_samples(metric, pos, vel, QuadGrid(ts.size))


def cmd_oracle(args) -> int:
    from .oracle import shoot

    config = {"metric.name": args.metric}
    for key, val in (("metric.h", args.h), ("metric.f", args.f)):
        if val is not None:
            config[key] = val
    theta0 = _parse_vector(args.theta0)
    theta1 = _parse_vector(args.theta1)
    if len(theta0) != len(theta1):
        raise ConfigError("theta0 and theta1 must have the same dimension")
    metric = metric_from_config(config, dim_hint=len(theta0))
    if metric.dim != len(theta0):
        raise ConfigError(f"{args.metric} metric is {metric.dim}-dimensional "
                          f"but endpoints have dimension {len(theta0)}")
    v_guess = _parse_vector(args.v_guess) if args.v_guess else None
    try:
        res = shoot(metric, theta0, theta1, v_guess=v_guess, tol=args.tol,
                    steps=args.steps)
    except ShootingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    energy = res.energy(metric)
    k = len(theta0)
    print(f"v0 = [{', '.join('%.12g' % v for v in res.v0)}]")
    print(f"miss = {res.miss:.6e} after {res.iterations} Newton iterations")
    print(f"energy = {energy:.12g}")
    if args.out:
        traj = res.trajectory
        write_csv(args.out,
                  ["t"] + [f"theta{i+1}" for i in range(k)]
                  + [f"vel{i+1}" for i in range(k)],
                  np.column_stack([traj.ts, traj.thetas, traj.vels]))
    if args.compare:
        header, data = read_csv(args.compare)
        if data.shape[1] != k + 1:
            raise ConfigError(
                f"{args.compare}: expected {k + 1} columns for a "
                f"{k}-dimensional path, found {data.shape[1]}"
            )
        e_path = _csv_path_energy(metric, data[:, 0], data[:, 1:])
        gap = abs(e_path - energy) / max(abs(energy), 1e-300)
        print(f"path energy = {e_path:.12g}")
        print(f"relative energy gap = {gap:.6g}")
    return 0


def cmd_residual(args) -> int:
    from .oracle import christoffel

    config = {"metric.name": args.metric}
    for key, val in (("metric.h", args.h), ("metric.f", args.f)):
        if val is not None:
            config[key] = val
    header, data = read_csv(args.path)
    if data.shape[0] < 5:
        raise ConfigError(f"{args.path}: need at least 5 samples, found {data.shape[0]}")
    ts, pos = data[:, 0], data[:, 1:]
    k = pos.shape[1]
    metric = metric_from_config(config, dim_hint=k)
    if metric.dim != k:
        raise ConfigError(f"{args.metric} metric is {metric.dim}-dimensional "
                          f"but the path has dimension {k}")
    try:
        vel = np.gradient(pos, ts, axis=0)
        acc = np.gradient(vel, ts, axis=0)
        res = np.zeros((ts.size - 2, k))
        for i in range(1, ts.size - 1):
            gam = christoffel(metric, pos[i])
            res[i - 1] = acc[i] + gam.contract(vel[i])
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    norms = np.sqrt((res ** 2).sum(axis=1))
    rms = float(np.sqrt((norms ** 2).mean()))
    print(f"EL residual RMS = {rms:.6e}")
    print(f"EL residual max = {float(norms.max()):.6e}")
    if args.out:
        write_csv(args.out,
                  ["t"] + [f"r{i+1}" for i in range(k)] + ["norm"],
                  np.column_stack([ts[1:-1], res, norms]))
    return 0


def cmd_export(args) -> int:
    from . import svg

    header, data = read_csv(args.input)
    kind = args.kind
    if kind == "auto":
        kind = "snapshots" if header[:3] == ["t", "x", "u"] else "path"
    if kind == "path":
        ts = data[:, 0]
        cols = [data[:, i] for i in range(1, data.shape[1])]
        text = svg.path_svg(ts, cols, header[1:],
                            title=os.path.basename(args.input))
    elif kind == "overhead":
        if data.shape[1] < 3:
            raise ConfigError("overhead projection needs at least 2 coordinates")
        elevation = None
        if args.h is not None and args.f is not None:
            h, f = args.h, args.f
            elevation = lambda p: landscape_elevation(p, h, f)
        text = svg.overhead_svg(data[:, 1], data[:, 2], elevation_fn=elevation,
                                title=os.path.basename(args.input))
    elif kind == "snapshots":
        if header[:3] != ["t", "x", "u"]:
            raise ConfigError("snapshots export expects columns t,x,u")
        ts = np.unique(data[:, 0])
        rows = []
        xg = None
        for t in ts:
            sel = data[data[:, 0] == t]
            if xg is None:
                xg = sel[:, 1]
            rows.append(sel[:, 2])
        text = svg.snapshots_svg(ts, xg, rows,
                                 title=os.path.basename(args.input))
    else:
        raise ConfigError(f"unknown export kind {kind!r}")
    with open(args.out, "w") as fh:
        fh.write(text)
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    from .benchmark import format_report, run_benchmark

    rows, have_c = run_benchmark(grid_points=args.grid_points or 250,
                                 scale=args.scale)
    print(format_report(rows, have_c))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ritzgeo",
        description="Variational geodesic solver with neural path ansatz.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("example", help="run a canned experiment")
    ex.add_argument("name", choices=["landscape", "waveguide", "bar"])
    ex.add_argument("--h", type=float, help="landscape elevation scale")
    ex.add_argument("--f", type=float, help="landscape frequency")
    ex.add_argument("--arch", choices=["mlp", "siren", "fourier"],
                    help="waveguide path network family")
    ex.add_argument("--u0", help="bar initial displacement target name")
    ex.add_argument("--u1", help="bar final displacement target name")
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--epochs", type=int)
    ex.add_argument("--lr", type=float)
    ex.add_argument("--grid-points", type=int, dest="grid_points")
    ex.add_argument("--out", help="run directory to write")
    ex.set_defaults(fn=cmd_example)

    so = sub.add_parser("solve", help="train from a config file or flags")
    so.add_argument("--config", help="config file (echo format or JSON/manifest)")
    so.add_argument("--metric", choices=METRIC_NAMES)
    so.add_argument("--theta0", help="comma-separated start point")
    so.add_argument("--theta1", help="comma-separated end point")
    so.add_argument("--seed", type=int)
    so.add_argument("--epochs", type=int)
    so.add_argument("--lr", type=float)
    so.add_argument("--grid-points", type=int, dest="grid_points")
    so.add_argument("--out")
    so.set_defaults(fn=cmd_solve)

    orc = sub.add_parser("oracle", help="shooting-method validation")
    orc.add_argument("--metric", required=True, choices=METRIC_NAMES)
    orc.add_argument("--theta0", required=True)
    orc.add_argument("--theta1", required=True)
    orc.add_argument("--v-guess", dest="v_guess")
    orc.add_argument("--h", type=float)
    orc.add_argument("--f", type=float)
    orc.add_argument("--steps", type=int, default=1000)
    orc.add_argument("--tol", type=float, default=1e-8)
    orc.add_argument("--out", help="trajectory CSV to write")
    orc.add_argument("--compare", help="path.csv to compare energies against")
    orc.set_defaults(fn=cmd_oracle)

    rs = sub.add_parser("residual", help="EL residuals of an exported path")
    rs.add_argument("--path", required=True)
    rs.add_argument("--metric", required=True, choices=METRIC_NAMES)
    rs.add_argument("--h", type=float)
    rs.add_argument("--f", type=float)
    rs.add_argument("--out", help="residual CSV to write")
    rs.set_defaults(fn=cmd_residual)

    xp = sub.add_parser("export", help="render a CSV artifact to SVG")
    xp.add_argument("--input", required=True)
    xp.add_argument("--kind", choices=["auto", "path", "overhead", "snapshots"],
                    default="auto")
    xp.add_argument("--h", type=float, help="elevation shading scale")
    xp.add_argument("--f", type=float, help="elevation shading frequency")
    xp.add_argument("--out", required=True)
    xp.set_defaults(fn=cmd_export)

    bn = sub.add_parser("bench", help="compare compiled and fallback backends")
    bn.add_argument("--scale", type=float, default=1.0,
                    help="multiplier on per-workload repetitions")
    bn.add_argument("--grid-points", type=int, dest="grid_points")
    bn.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ShootingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
