"""Generic scalar math that works on floats, numpy arrays, duals, and tape variables.

Every differentiable quantity in the package (network layers, metric entries,
path ansatz) is written against these functions once. Passing plain numbers
evaluates values; passing dual numbers evaluates derivatives; passing tape
variables records the computation for the reverse sweep.
"""

import numpy as np

_NUMERIC = (int, float, np.integer, np.floating, np.ndarray)


def is_numeric(x) -> bool:
    return isinstance(x, _NUMERIC)


def tanh(x):
    return np.tanh(x) if is_numeric(x) else x.tanh()


def sin(x):
    return np.sin(x) if is_numeric(x) else x.sin()


def cos(x):
    return np.cos(x) if is_numeric(x) else x.cos()


def exp(x):
    return np.exp(x) if is_numeric(x) else x.exp()


def sqrt(x):
    return np.sqrt(x) if is_numeric(x) else x.sqrt()


def square(x):
    return x * x


def sigmoid(x):
    # Written via tanh so it stays exact for every scalar type in one place.
    return 0.5 * tanh(0.5 * x) + 0.5


def value_of(x):
    """Strip derivative information: the plain value of any scalar type."""
    while hasattr(x, "value"):
        x = x.value
    return x
