"""Differentiation engine: dual numbers, reverse tape, mixed derivatives.

Expected values come from closed-form calculus done by hand or from central
finite differences; the engine under test is never used as its own oracle.
"""

import math

import numpy as np
import pytest

from ritzgeo import engine
from ritzgeo.engine import Dual, Dual2, MultiDual, ParamVector, Tape, fmath
from ritzgeo.engine.backend import get_backend
from ritzgeo.errors import EvaluationDomainError, NonFiniteError


# ---------------------------------------------------------------------------
# forward duals


def test_dual_chain_rule_sin():
    # d/dt sin(2t) at t = 0.5 is 2 cos(1)
    value, deriv = engine.eval_with_input_derivative(
        lambda t: fmath.sin(2.0 * t), 0.5
    )
    assert value == pytest.approx(math.sin(1.0), abs=1e-15)
    assert deriv == pytest.approx(2.0 * math.cos(1.0), abs=1e-15)
    assert deriv == pytest.approx(1.0806046117362795, abs=1e-15)


def test_dual2_second_derivative():
    # d2/dt2 sin(2t) = -4 sin(2t)
    d = Dual2(0.5, 1.0, 0.0)
    r = fmath.sin(2.0 * d)
    assert r.value == pytest.approx(math.sin(1.0), abs=1e-15)
    assert r.d1 == pytest.approx(2.0 * math.cos(1.0), abs=1e-15)
    assert r.d2 == pytest.approx(-4.0 * math.sin(1.0), abs=1e-13)


def test_dual_arithmetic_identities():
    x = Dual(0.8, 1.0)
    # product rule: d/dx x * tanh(x) = tanh(x) + x sech^2(x)
    r = x * fmath.tanh(x)
    sech2 = 1.0 - math.tanh(0.8) ** 2
    assert r.deriv == pytest.approx(math.tanh(0.8) + 0.8 * sech2, abs=1e-15)
    # quotient rule: d/dx (1 / (1 + x^2)) = -2x / (1 + x^2)^2
    q = 1.0 / (1.0 + x * x)
    assert q.deriv == pytest.approx(-1.6 / (1.0 + 0.64) ** 2, abs=1e-15)
    # exp, sqrt, square chain
    s = fmath.sqrt(fmath.exp(x) + fmath.square(x))
    base = math.exp(0.8) + 0.64
    assert s.deriv == pytest.approx((math.exp(0.8) + 1.6) / (2 * math.sqrt(base)), abs=1e-14)


def test_dual_constant_has_zero_derivative():
    x = Dual(2.0, 1.0)
    r = x * 0.0 + 3.5
    assert r.value == 3.5
    assert r.deriv == 0.0


def test_multidual_gradient_closed_form():
    # f(x, y) = x^2 y + sin(xy); grad = (2xy + y cos(xy), x^2 + x cos(xy))
    x0, y0 = 0.7, -0.3
    value, grads = engine.gradient(
        lambda p: p[0] * p[0] * p[1] + fmath.sin(p[0] * p[1]), [x0, y0]
    )
    c = math.cos(x0 * y0)
    assert value == pytest.approx(x0 * x0 * y0 + math.sin(x0 * y0), abs=1e-15)
    assert grads[0] == pytest.approx(2 * x0 * y0 + y0 * c, abs=1e-14)
    assert grads[1] == pytest.approx(x0 * x0 + x0 * c, abs=1e-14)


def test_mixed_gradient_closed_form():
    # f(b, t) = b1 sin(b2 t)
    # d2f/db1 dt = b2 cos(b2 t); d2f/db2 dt = b1 cos(b2 t) - b1 b2 t sin(b2 t)
    b1, b2, t = 1.2, 0.8, 0.5
    mixed = engine.mixed_gradient(
        lambda p, tt: p[0] * fmath.sin(p[1] * tt), [b1, b2], t
    )
    c, s = math.cos(b2 * t), math.sin(b2 * t)
    assert mixed[0] == pytest.approx(b2 * c, abs=1e-14)
    assert mixed[1] == pytest.approx(b1 * c - b1 * b2 * t * s, abs=1e-14)


def test_multidual_seed_is_identity_basis():
    seeds = MultiDual.seed([3.0, 5.0, 7.0])
    assert len(seeds) == 3
    for i, s in enumerate(seeds):
        # sparse tangents: None marks a structural zero
        dense = [0.0 if t is None else float(t) for t in s.tangents]
        expect = [0.0] * 3
        expect[i] = 1.0
        assert dense == expect


def _random_expression(rng, vars_):
    """Random closed-under-differentiation expression over safe ops."""
    ops = ["add", "sub", "mul", "tanh", "sin", "cos", "square", "safe_div"]
    expr = vars_[int(rng.integers(len(vars_)))]
    for _ in range(int(rng.integers(4, 10))):
        op = ops[int(rng.integers(len(ops)))]
        other = vars_[int(rng.integers(len(vars_)))]
        if op == "add":
            expr = expr + other
        elif op == "sub":
            expr = expr - other
        elif op == "mul":
            expr = expr * other
        elif op == "tanh":
            expr = fmath.tanh(expr)
        elif op == "sin":
            expr = fmath.sin(expr)
        elif op == "cos":
            expr = fmath.cos(expr)
        elif op == "square":
            expr = fmath.square(expr) * 0.5
        else:
            expr = expr / (fmath.square(other) + 1.5)
    return expr


def test_gradient_matches_finite_differences_on_random_expressions():
    rng = np.random.default_rng(7)
    for case in range(20):
        n = int(rng.integers(2, 5))
        p0 = rng.uniform(-1.2, 1.2, size=n)
        op_rng = np.random.default_rng(1000 + case)

        def f(params):
            return _random_expression(
                np.random.default_rng(op_rng.bit_generator.state["state"]["state"] % 2**32),
                list(params),
            )

        # freeze the expression shape: rebuild the same rng per call
        shape_seed = int(rng.integers(2**31))

        def f(params, seed=shape_seed):
            return _random_expression(np.random.default_rng(seed), list(params))

        value, grads = engine.gradient(f, p0)
        eps = 1e-6
        for i in range(n):
            dp = np.zeros(n)
            dp[i] = eps
            fp = f(p0 + dp)
            fm = f(p0 - dp)
            fd = (fp - fm) / (2 * eps)
            assert grads[i] == pytest.approx(fd, rel=2e-6, abs=2e-8), (
                f"case {case} param {i}"
            )


# ---------------------------------------------------------------------------
# tape programs


def _both_executors(tape):
    prog = tape.freeze()
    return [prog.executor(get_backend(n)) for n in ("python", "compiled")]


def test_tape_forward_matches_numpy():
    tape = Tape()
    x = tape.param(0.4)
    c = tape.const(np.array([0.5, 1.0, 2.0]))
    y = (x * c).sin() + x.tanh() * 2.0
    prog = tape.freeze()
    for name in ("python", "compiled"):
        ex = prog.executor(get_backend(name))
        ex.load_params(np.array([0.4]))
        ex.forward()
        got = ex.value(y.row)
        expect = np.sin(0.4 * np.array([0.5, 1.0, 2.0])) + 2.0 * np.tanh(0.4)
        np.testing.assert_allclose(got, expect, rtol=0, atol=1e-15, err_msg=name)


def test_tape_gradient_matches_finite_differences():
    def build():
        tape = Tape()
        ps = tape.params([0.3, -0.7, 1.1])
        w = tape.const(np.array([0.25, 0.5, 0.25]))
        t = tape.const(np.array([0.0, 0.5, 1.0]))
        field = (ps[0] * t).sin() + (ps[1] * t).cos() * ps[2]
        total = tape.wsumb(field * field, np.array([0.25, 0.5, 0.25]))
        return tape, total

    tape, total = build()
    g = tape.gradient(total)

    def value_at(p):
        t = np.array([0.0, 0.5, 1.0])
        w = np.array([0.25, 0.5, 0.25])
        field = np.sin(p[0] * t) + np.cos(p[1] * t) * p[2]
        return float((w * field * field).sum())

    p0 = np.array([0.3, -0.7, 1.1])
    eps = 1e-6
    for i in range(3):
        dp = np.zeros(3)
        dp[i] = eps
        fd = (value_at(p0 + dp) - value_at(p0 - dp)) / (2 * eps)
        assert g[i] == pytest.approx(fd, rel=1e-8, abs=1e-10)


def test_tape_gradient_linearity():
    # grad(a f + b g) = a grad f + b grad g, evaluated on separate roots
    def build(a, b):
        tape = Tape()
        p = tape.params([0.6, -0.4])
        f = (p[0] * p[1]).tanh()
        g = (p[0] + p[1]).sin()
        root = f * a + g * b
        return tape, root, f, g

    tape, root, f, g = build(2.0, -3.0)
    grad_combo = tape.gradient(root)
    tape2, _, f2, _ = build(2.0, -3.0)
    grad_f = tape2.gradient(f2)
    tape3, _, _, g3 = build(2.0, -3.0)
    grad_g = tape3.gradient(g3)
    np.testing.assert_allclose(grad_combo, 2.0 * grad_f - 3.0 * grad_g,
                               rtol=1e-13, atol=1e-15)


def test_tape_unused_parameter_gets_exact_zero():
    tape = Tape()
    p = tape.params([1.0, 2.0])
    root = (p[0] * 3.0).tanh()
    g = tape.gradient(root)
    assert g[1] == 0.0


def test_tape_set_param_values_reevaluates():
    tape = Tape()
    x = tape.param(1.0)
    y = x * x
    assert tape.value(y) == pytest.approx(1.0)
    tape.set_param_values([3.0])
    assert tape.value(y) == pytest.approx(9.0)


def test_tape_expand_and_wsumb_block_semantics():
    tape = Tape()
    a = tape.const(np.array([1.0, 2.0]))
    wide = tape.expand(a, 3)  # out[l] = a[l // 3]
    prog = tape.freeze()
    ex = prog.executor(get_backend("python"))
    ex.load_params(np.zeros(0))
    ex.forward()
    np.testing.assert_array_equal(ex.value(wide.row), [1, 1, 1, 2, 2, 2])


def test_tape_wsumb_reduces_blocks():
    tape = Tape()
    a = tape.const(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]))
    red = tape.wsumb(a, np.array([0.5, 1.0, 0.5]))
    prog = tape.freeze()
    for name in ("python", "compiled"):
        ex = prog.executor(get_backend(name))
        ex.load_params(np.zeros(0))
        ex.forward()
        np.testing.assert_allclose(ex.value(red.row), [4.0, 10.0], atol=1e-15)


def test_tape_dense_matches_einsum():
    # out[u][l] = sum_i w[u*I + i][l // m] * in[i][l], scalar weights (B=1)
    rng = np.random.default_rng(3)
    n_in, n_out, lanes = 3, 2, 4
    xv = rng.standard_normal((n_in, lanes))
    wv = rng.standard_normal(n_out * n_in)

    tape = Tape()
    ins = tape.alloc_range(n_in, lanes)
    for i in range(n_in):
        tape.copy_into(ins[i], tape.const(xv[i]))
    ws = tape.alloc_range(n_out * n_in, 1)
    for j in range(n_out * n_in):
        tape.copy_into(ws[j], tape.const(wv[j]))
    out = tape.dense(ins, ws, n_out)
    prog = tape.freeze()
    expect = np.einsum("ui,il->ul", wv.reshape(n_out, n_in), xv)
    for name in ("python", "compiled"):
        ex = prog.executor(get_backend(name))
        ex.load_params(np.zeros(0))
        ex.forward()
        got = np.stack([ex.value(out[u].row) for u in range(n_out)])
        np.testing.assert_allclose(got, expect, rtol=1e-14, atol=1e-15, err_msg=name)


def test_tape_tanh2_matches_dual_reference():
    # dual tanh: (yv, yd) = (tanh(zv), (1 - tanh^2(zv)) zd)
    zvals = np.array([-1.3, 0.2, 0.9])
    zder = np.array([0.5, -2.0, 1.5])
    tape = Tape()
    zv = tape.const(zvals)
    zd = tape.const(zder)
    yv = tape.alloc_range(1, 3)[0]
    yd = tape.alloc_range(1, 3)[0]
    tape.tanh2_into(yv, yd, zv, zd)
    prog = tape.freeze()
    ex = prog.executor(get_backend("compiled"))
    ex.load_params(np.zeros(0))
    ex.forward()
    np.testing.assert_allclose(ex.value(yv.row), np.tanh(zvals), atol=1e-15)
    np.testing.assert_allclose(
        ex.value(yd.row), (1 - np.tanh(zvals) ** 2) * zder, atol=1e-15
    )


def test_tape_nonfinite_detection_names_the_op():
    # exp overflow produces inf; the finiteness check names the offending op
    tape = Tape()
    x = tape.param(1000.0)
    root = tape.wsumb(x.exp(), np.array([1.0]))
    with pytest.raises(NonFiniteError) as exc_info:
        tape.gradient(root)
    assert "exp" in str(exc_info.value)


def test_tape_division_by_zero_is_a_domain_error():
    tape = Tape()
    x = tape.param(0.0)
    root = tape.wsumb(1.0 / x, np.array([1.0]))
    with pytest.raises(EvaluationDomainError) as exc_info:
        tape.gradient(root)
    assert "division by zero" in str(exc_info.value)


def test_tape_frozen_rejects_new_ops():
    tape = Tape()
    x = tape.param(1.0)
    tape.freeze()
    with pytest.raises(RuntimeError):
        _ = x * 2.0


def test_tape_gradient_root_must_be_scalar_row():
    tape = Tape()
    x = tape.param(1.0)
    c = tape.const(np.array([1.0, 2.0]))
    wide = x * c
    with pytest.raises(ValueError):
        tape.gradient(wide)


# ---------------------------------------------------------------------------
# parameter vectors


def test_param_vector_segment_round_trip():
    pv = ParamVector.build([("w1", np.arange(6.0).reshape(2, 3)),
                            ("b1", np.array([1.0, 2.0]))])
    assert pv.names() == ["w1", "b1"]
    np.testing.assert_array_equal(pv.segment("w1"), np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(pv.segment("b1"), [1.0, 2.0])
    start, stop, shape = pv.segment_bounds("w1")
    assert (start, stop, shape) == (0, 6, (2, 3))
    assert pv.values.size == 8


def test_param_vector_replaced_keeps_layout():
    pv = ParamVector.build([("w", np.zeros(3))])
    pv2 = pv.replaced(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_array_equal(pv2.segment("w"), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(pv.segment("w"), [0.0, 0.0, 0.0])


def test_param_vector_copy_is_independent():
    pv = ParamVector.build([("w", np.ones(2))])
    cp = pv.copy()
    cp.values[0] = 5.0
    assert pv.values[0] == 1.0
