"""Backend selection: compiled core when importable, numpy fallback otherwise.

Override with RITZGEO_BACKEND = auto | compiled | python. Requesting
"compiled" when the extension is missing is an error rather than a silent
downgrade.
"""

import os

import numpy as np

from . import executors


class PythonBackend:
    name = "python"

    @staticmethod
    def executor(prog):
        return executors.PyExecutor(prog)

    @staticmethod
    def helix_min_distance(points, samples, radius, iters):
        return executors.helix_min_distance(points, samples, radius, iters)


class CompiledBackend:
    name = "compiled"

    def __init__(self, core):
        self._core = core

    def executor(self, prog):
        return executors.CompiledExecutor(prog, self._core)

    def helix_min_distance(self, points, samples, radius, iters):
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        samples = np.ascontiguousarray(samples, dtype=np.float64)
        return self._core.helix_min_distance(pts, samples, float(radius), int(iters))


_cached = None


def _load_compiled():
    from ritzgeo import _core  # noqa: import probe

    if getattr(_core, "N_OP_KINDS", -1) != 26:
        raise ImportError("compiled core is stale; rebuild the extension")
    return CompiledBackend(_core)


def default_backend():
    """The process-wide backend, resolved once."""
    global _cached
    if _cached is None:
        _cached = get_backend(os.environ.get("RITZGEO_BACKEND", "auto"))
    return _cached


def get_backend(name: str):
    if name == "python":
        return PythonBackend()
    if name == "compiled":
        return _load_compiled()
    if name == "auto":
        try:
            return _load_compiled()
        except ImportError:
            return PythonBackend()
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    return default_backend().name


def compiled_available() -> bool:
    try:
        _load_compiled()
        return True
    except ImportError:
        return False
