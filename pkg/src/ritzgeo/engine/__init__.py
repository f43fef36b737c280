"""Differentiation engine: forward duals, reverse tape, and mixed modes.

The three convenience entry points below cover the scalar API:

  eval_with_input_derivative  forward dual through a scalar function
  gradient                    reverse sweep over a freshly recorded graph
  mixed_gradient              reverse sweep of a forward-dual channel
                              (derivatives of derivatives, one call)
"""

import numpy as np

from .dual import Dual, Dual2, MultiDual
from .params import ParamVector
from .tape import Tape, Var, VarRange
from .backend import backend_name, default_backend, get_backend

__all__ = [
    "Dual",
    "Dual2",
    "MultiDual",
    "ParamVector",
    "Tape",
    "Var",
    "VarRange",
    "backend_name",
    "default_backend",
    "get_backend",
    "eval_with_input_derivative",
    "gradient",
    "mixed_gradient",
]


def eval_with_input_derivative(fn, t: float):
    """Evaluate fn and d fn/dt at t via a forward dual. fn maps scalar -> scalar."""
    out = fn(Dual(float(t), 1.0))
    if isinstance(out, Dual):
        return float(out.value), float(out.deriv)
    return float(out), 0.0  # fn ignored its input


def gradient(fn, param_values):
    """Gradient of a scalar expression w.r.t. a parameter list.

    fn receives a list of tape variables (one per entry of param_values) and
    returns the scalar expression built from them. Returns (value, grads);
    parameters the expression does not touch get exact zeros.
    """
    tape = Tape()
    ws = tape.params([float(v) for v in param_values])
    root = fn(ws)
    if isinstance(root, Dual):
        root = root.value
    if not isinstance(root, Var):
        # constant expression: no dependence on any parameter
        return float(root), np.zeros(len(ws))
    g = tape.gradient(root)
    ex = tape._get_executor()
    return float(ex.value(root.row)[0]), g


def mixed_gradient(fn, param_values, t: float):
    """Parameter gradient of an expression containing an input derivative.

    fn receives (list of tape variables, dual input at t) and returns either
    a Dual (its derivative channel is differentiated) or a plain tape Var
    already built from the derivative channel.
    """
    tape = Tape()
    ws = tape.params([float(v) for v in param_values])
    t_dual = Dual(tape.const(float(t)), tape.const(1.0))
    out = fn(ws, t_dual)
    root = out.deriv if isinstance(out, Dual) else out
    if not isinstance(root, Var):
        return np.zeros(len(ws))
    return tape.gradient(root)
