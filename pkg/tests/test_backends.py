"""Compiled core vs numpy fallback: same programs, same numbers.

Every op kind is exercised in one program and compared row-by-row between
executors; gradients are compared after a reverse sweep from the same root.
The helix-distance op gets a looser gradient tolerance near the axis: its
ternary-refinement argmin can land on a bracket one ulp away per backend,
which perturbs the unit offset by ~|dt*| * |axis'| / d.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from ritzgeo.engine import Tape
from ritzgeo.engine.backend import compiled_available, get_backend
from ritzgeo.metrics import HelixField, RefractiveMetric, landscape_metric, sphere_metric
from ritzgeo.networks import Architecture
from ritzgeo.solver import make_model


def test_compiled_core_is_available():
    # the build ships the extension; a missing core is a packaging failure
    assert compiled_available()


def _arith_program():
    """One program touching every scalar op kind plus the structured ops."""
    tape = Tape()
    p = tape.params([0.6, -0.4, 1.3])
    c = tape.const(np.array([0.2, 0.7, -0.5, 1.1]))
    rows = {}
    a = p[0] + p[1]
    b = p[0] - p[2]
    m = a * b
    d = a / (p[2] * p[2] + 1.5)
    rows["add/sub/mul/div"] = m + d
    rows["neg"] = -m
    rows["scale/addc/rsubc"] = 2.5 * m + 3.0 - (1.0 - d)
    rows["tanh"] = m.tanh()
    rows["sin/cos"] = m.sin() + d.cos()
    rows["exp"] = (d * 0.1).exp()
    rows["sqrt"] = (m * m + 1.0).sqrt()
    rows["square"] = m**2
    rows["recip"] = (m * m + 2.0) ** -1
    rows["powc"] = (m * m + 1.2) ** 1.7
    wide = tape.expand(rows["tanh"], 4) * c
    rows["expand*const"] = wide
    rows["wsumb"] = tape.wsumb(wide, np.array([0.25, 0.25, 0.25, 0.25]))

    ins = tape.alloc_range(2, 4)
    tape.copy_into(ins[0], wide)
    tape.copy_into(ins[1], tape.expand(rows["sin/cos"], 4) + 0.0 * c)
    ws = tape.alloc_range(6, 1)
    for i, v in enumerate((p[0], p[1], p[2], p[0] * 0.5, p[1] * 0.5, p[2] * 0.5)):
        tape.copy_into(ws[i], v)
    dense_out = tape.dense(ins, ws, 3)
    acc_out = tape.dense(ins, ws, 3, out=dense_out, accumulate=True)
    rows["dense+acc"] = acc_out[0]

    yv = tape.alloc_range(1, 4)[0]
    yd = tape.alloc_range(1, 4)[0]
    tape.tanh2_into(yv, yd, wide, 0.5 * c + rows["exp"])
    rows["tanh2"] = yd

    ys = [tape.alloc_range(1, 4)[0] for _ in range(4)]
    zs = [wide, 0.3 * c + rows["sqrt"], 1.0 * c, 0.25 * c + rows["recip"]]
    tape.tanh4_into(ys, zs)
    rows["tanh4"] = ys[3]

    field = HelixField()
    x = p[0] * 0.5 + 0.1
    y = p[1] * 0.5 + 0.2
    z = p[2] * 0.25
    dist = tape.helix_distance(
        x, y, z, field.axis_sample_table(), field.radius, field.refine_iters
    )
    rows["hdist"] = dist

    total = rows["wsumb"] + tape.wsumb(rows["dense+acc"], np.full(4, 1.0))
    for key in ("tanh2", "tanh4"):
        total = total + tape.wsumb(rows[key], np.full(4, 0.25))
    total = total + dist + rows["powc"] + rows["sqrt"] + rows["square"]
    total = total + rows["recip"] + rows["exp"] + rows["sin/cos"] + rows["tanh"]
    total = total + rows["neg"] + rows["scale/addc/rsubc"] + rows["add/sub/mul/div"]
    return tape, rows, total


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
def test_every_op_kind_agrees_across_backends():
    tape, rows, total = _arith_program()
    prog = tape.freeze()
    values = {}
    grads = {}
    for name in ("python", "compiled"):
        ex = prog.executor(get_backend(name))
        ex.load_params(np.array([0.6, -0.4, 1.3]))
        ex.forward()
        values[name] = {k: np.array(ex.value(v.row), copy=True)
                        for k, v in rows.items()}
        ex.reverse(total.row)
        grads[name] = ex.param_grads().copy()

    for k in rows:
        np.testing.assert_allclose(
            values["python"][k], values["compiled"][k],
            rtol=1e-13, atol=1e-14, err_msg=f"forward mismatch in {k}",
        )
    np.testing.assert_allclose(grads["python"], grads["compiled"],
                               rtol=1e-11, atol=1e-13)


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
def test_backend_determinism_bit_for_bit():
    tape, rows, total = _arith_program()
    prog = tape.freeze()
    for name in ("python", "compiled"):
        outs = []
        for _ in range(2):
            ex = prog.executor(get_backend(name))
            ex.load_params(np.array([0.6, -0.4, 1.3]))
            ex.forward()
            ex.reverse(total.row)
            outs.append((float(ex.value(total.row)[0]), ex.param_grads().copy()))
        assert outs[0][0] == outs[1][0]
        np.testing.assert_array_equal(outs[0][1], outs[1][1])


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
@pytest.mark.parametrize("factory,theta0,theta1", [
    (lambda: sphere_metric(), [np.pi / 2, 0.0], [np.pi / 2, np.pi / 2]),
    (lambda: landscape_metric(2.0, 4.0), [-1.0, -1.0], [1.0, 1.0]),
])
def test_energy_and_gradient_agree_on_smooth_metrics(factory, theta0, theta1):
    from ritzgeo.quadrature import QuadGrid
    from ritzgeo.solver import EnergyKernel

    metric = factory()
    arch = Architecture(hidden_widths=(8, 8), output_dim=2)
    m = make_model(arch, theta0, theta1, seed=0)
    grid = QuadGrid(250)
    out = {}
    for name in ("python", "compiled"):
        kernel = EnergyKernel(arch, metric, grid, theta0, theta1,
                              backend=get_backend(name))
        e, g = kernel.energy_and_grad(m.params.values)
        out[name] = (e, g.copy())
    assert out["python"][0] == pytest.approx(out["compiled"][0], rel=1e-13)
    np.testing.assert_allclose(out["python"][1], out["compiled"][1],
                               rtol=1e-10, atol=1e-13)


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
def test_helix_kernel_gradient_agreement_loose():
    # full waveguide objective: values tight, gradients within the
    # branch-sensitivity bound of the distance argmin
    from ritzgeo.quadrature import QuadGrid
    from ritzgeo.solver import EnergyKernel

    metric = RefractiveMetric(HelixField())
    arch = Architecture(hidden_widths=(15, 15), output_dim=3,
                        fourier_f=15, fourier_sigma2=4.0, seed=0)
    theta0, theta1 = [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]
    m = make_model(arch, theta0, theta1, seed=0)
    grid = QuadGrid(250)
    out = {}
    for name in ("python", "compiled"):
        kernel = EnergyKernel(arch, metric, grid, theta0, theta1,
                              backend=get_backend(name))
        e, g = kernel.energy_and_grad(m.params.values)
        out[name] = (e, g.copy())
    assert out["python"][0] == pytest.approx(out["compiled"][0], rel=1e-9)
    scale = max(1.0, float(np.abs(out["python"][1]).max()))
    worst = float(np.abs(out["python"][1] - out["compiled"][1]).max()) / scale
    assert worst < 1e-4


@pytest.mark.skipif(not compiled_available(), reason="compiled core not built")
def test_helix_distance_values_agree_tightly(rng):
    field = HelixField()
    pts = rng.uniform([-0.6, -0.6, -0.8], [1.1, 1.1, 0.8], size=(64, 3))
    d_py, t_py, u_py = get_backend("python").helix_min_distance(
        pts, field.axis_sample_table(), field.radius, field.refine_iters
    )
    d_c, t_c, u_c = get_backend("compiled").helix_min_distance(
        pts, field.axis_sample_table(), field.radius, field.refine_iters
    )
    np.testing.assert_allclose(d_py, d_c, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(t_py, t_c, rtol=0, atol=1e-7)


def test_backend_env_var_selects_backend():
    for want in ("python", "compiled"):
        env = os.environ.copy()
        env["RITZGEO_BACKEND"] = want
        proc = subprocess.run(
            [sys.executable, "-c",
             "from ritzgeo.engine.backend import backend_name; print(backend_name())"],
            capture_output=True, text=True, env=env,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stdout.strip() == want


def test_requesting_missing_backend_is_an_error():
    with pytest.raises(ValueError):
        get_backend("gpu")
