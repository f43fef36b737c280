"""Backend benchmark: compiled kernels against the pure-Python fallback.

Times the full energy + gradient sweep for representative objectives and
verifies both backends agree on the numbers they produce.
"""

import time
from dataclasses import dataclass

import numpy as np

from .engine.backend import compiled_available, get_backend
from .metrics import (
    HelixField,
    RefractiveMetric,
    StrainMetric,
    StrainMetricDef,
    identity_metric,
    sphere_metric,
)
from .networks import Architecture, init_params
from .quadrature import QuadGrid
from .solver import EnergyKernel


@dataclass
class BenchRow:
    name: str
    epochs: int
    py_ms: float
    c_ms: float
    speedup: float
    energy_delta: float
    grad_delta: float


def _workloads():
    flat_arch = Architecture(hidden_widths=(25, 25), output_dim=2)
    yield ("flat 2x25", flat_arch, identity_metric(2), [0.0, 0.0], [1.0, 1.0], 100)
    yield ("sphere 2x25", flat_arch, sphere_metric(),
           [np.pi / 2, 0.0], [np.pi / 2, np.pi / 2], 100)
    wg_arch = Architecture(hidden_widths=(15, 15), output_dim=3,
                           fourier_f=15, fourier_sigma2=4.0, seed=0)
    yield ("waveguide fourier", wg_arch, RefractiveMetric(HelixField()),
           [0.0, 0.0, 1.0], [0.0, 0.0, -1.0], 20)
    disp = Architecture(input_dim=1, hidden_widths=(10, 10), output_dim=1)
    defn = StrainMetricDef(arch=disp, x_nodes=25)
    rng = np.random.default_rng(0)
    th0 = rng.normal(0, 0.3, defn.dim)
    th1 = rng.normal(0, 0.3, defn.dim)
    bar_arch = Architecture(hidden_widths=(25, 25), output_dim=defn.dim)
    yield ("strain bar (25 x-nodes)", bar_arch, StrainMetric(defn), th0, th1, 10)


def _time_kernel(kernel: EnergyKernel, beta: np.ndarray, epochs: int):
    e, g = kernel.energy_and_grad(beta)  # warm start
    t0 = time.perf_counter()
    for _ in range(epochs):
        e, g = kernel.energy_and_grad(beta)
    dt = (time.perf_counter() - t0) / epochs
    return dt * 1e3, e, g


def run_benchmark(grid_points: int = 250, scale: float = 1.0):
    """Returns (rows, compiled_available). Rows hold per-epoch timings in ms."""
    rows = []
    have_c = compiled_available()
    grid = QuadGrid(grid_points)
    for name, arch, metric, th0, th1, epochs in _workloads():
        epochs = max(1, int(epochs * scale))
        beta = init_params(arch, seed=0).values
        py = EnergyKernel(arch, metric, grid, th0, th1,
                          backend=get_backend("python"))
        py_ms, e_py, g_py = _time_kernel(py, beta, epochs)
        if have_c:
            cc = EnergyKernel(arch, metric, grid, th0, th1,
                              backend=get_backend("compiled"))
            c_ms, e_c, g_c = _time_kernel(cc, beta, epochs)
            rows.append(BenchRow(
                name=name, epochs=epochs, py_ms=py_ms, c_ms=c_ms,
                speedup=py_ms / c_ms,
                energy_delta=abs(e_py - e_c),
                grad_delta=float(np.abs(g_py - g_c).max()),
            ))
        else:
            rows.append(BenchRow(name=name, epochs=epochs, py_ms=py_ms,
                                 c_ms=float("nan"), speedup=float("nan"),
                                 energy_delta=0.0, grad_delta=0.0))
    return rows, have_c


def format_report(rows, have_c: bool) -> str:
    lines = []
    if have_c:
        lines.append(f"{'workload':<26}{'python ms':>12}{'compiled ms':>13}"
                     f"{'speedup':>9}{'|dE|':>11}{'max|dg|':>11}")
        for r in rows:
            lines.append(
                f"{r.name:<26}{r.py_ms:>12.3f}{r.c_ms:>13.3f}"
                f"{r.speedup:>8.1f}x{r.energy_delta:>11.2e}{r.grad_delta:>11.2e}"
            )
    else:
        lines.append("compiled backend not available; timing fallback only")
        lines.append(f"{'workload':<26}{'python ms':>12}")
        for r in rows:
            lines.append(f"{r.name:<26}{r.py_ms:>12.3f}")
    return "\n".join(lines)
