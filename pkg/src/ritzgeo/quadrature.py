"""Composite trapezoid quadrature on [0, 1] with endpoint nodes included."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuadGrid:
    n_points: int = 250
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("quadrature grid needs at least two nodes")
        nodes = np.linspace(0.0, 1.0, self.n_points)
        h = 1.0 / (self.n_points - 1)
        weights = np.full(self.n_points, h)
        weights[0] = weights[-1] = 0.5 * h
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def integrate(self, values) -> float:
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != self.n_points:
            raise ValueError("value count does not match the grid")
        return float(values @ self.weights)
