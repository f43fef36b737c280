"""Small dense networks over a scalar input, generic over the scalar algebra.

forward() accepts plain floats, numpy arrays (vectorized over a batch), dual
numbers (derivatives w.r.t. the input), or tape variables (recording). The
final layer is always linear with no bias so the correction term a network
contributes can vanish identically at zero weights.

Fourier-feature variants map t to [sin(2 pi b_i t), cos(2 pi b_i t)] with
frozen frequencies b ~ N(0, sigma^2) drawn deterministically from the
architecture seed.
"""

import json
from dataclasses import dataclass

import numpy as np

from .engine import ParamVector
from .engine import fmath
from .engine.dual import Dual, Dual2

_ACTIVATIONS = ("tanh", "sine")


@dataclass(frozen=True)
class Architecture:
    input_dim: int = 1
    hidden_widths: tuple = (25, 25)
    output_dim: int = 2
    activation: str = "tanh"
    omega0: float = 30.0  # sine activation frequency scale
    fourier_f: int = 0  # 0 disables the fourier embedding
    fourier_sigma2: float = 4.0
    seed: int = 0  # seed for the frozen fourier frequencies

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))


def feature_dim(arch: Architecture) -> int:
    return 2 * arch.fourier_f if arch.fourier_f > 0 else arch.input_dim


def layer_dims(arch: Architecture):
    """(fan_in, fan_out) per affine layer, embedding already applied."""
    dims = [feature_dim(arch), *arch.hidden_widths, arch.output_dim]
    return list(zip(dims[:-1], dims[1:]))


def param_count(arch: Architecture) -> int:
    dims = layer_dims(arch)
    n = sum(i * o for i, o in dims)
    n += sum(o for _, o in dims[:-1])  # hidden biases; output layer has none
    return n


def param_layout(arch: Architecture) -> ParamVector:
    """Zero-valued parameter vector with the canonical segment layout."""
    segments = []
    dims = layer_dims(arch)
    for li, (fan_in, fan_out) in enumerate(dims):
        last = li == len(dims) - 1
        name = "out" if last else f"layer{li}"
        segments.append((f"{name}.W", np.zeros((fan_out, fan_in))))
        if not last:
            segments.append((f"{name}.b", np.zeros(fan_out)))
    return ParamVector.build(segments)


def init_params(arch: Architecture, seed: int) -> ParamVector:
    """Deterministic initialization; biases start at zero.

    tanh layers use Glorot uniform. sine layers use the customary scheme:
    first layer U(-1/in, 1/in), later layers U(+-sqrt(6/in)/omega0), so the
    pre-activations stay well-scaled under the omega0 frequency factor.
    """
    rng = np.random.default_rng(seed)
    pv = param_layout(arch)
    dims = layer_dims(arch)
    for li, (fan_in, fan_out) in enumerate(dims):
        last = li == len(dims) - 1
        name = "out" if last else f"layer{li}"
        if arch.activation == "sine":
            bound = 1.0 / fan_in if li == 0 else np.sqrt(6.0 / fan_in) / arch.omega0
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = pv.segment(f"{name}.W")
        w[:] = rng.uniform(-bound, bound, size=w.shape)
    return pv


def fourier_frequencies(arch: Architecture) -> np.ndarray:
    if arch.fourier_f <= 0:
        return np.zeros(0)
    rng = np.random.default_rng(arch.seed)
    return rng.normal(0.0, np.sqrt(arch.fourier_sigma2), size=arch.fourier_f)


def fourier_embed(arch: Architecture, t):
    """[sin(2 pi b t) for all b] + [cos(2 pi b t) for all b], generic in t."""
    freqs = fourier_frequencies(arch)
    angles = [(2.0 * np.pi * float(b)) * t for b in freqs]
    return [fmath.sin(a) for a in angles] + [fmath.cos(a) for a in angles]


def _activation(arch: Architecture, z):
    if arch.activation == "sine":
        return fmath.sin(arch.omega0 * z)
    return fmath.tanh(z)


def _numeric_mode(t) -> bool:
    return fmath.is_numeric(fmath.value_of(t))


def forward(arch: Architecture, params: ParamVector, t):
    """Network output as a list of output_dim scalars of the input's type."""
    if arch.input_dim != 1:
        raise ValueError("forward expects a scalar input architecture")
    feats = fourier_embed(arch, t) if arch.fourier_f > 0 else [t]
    if _numeric_mode(t):
        return _forward_stacked(arch, params, feats)
    return _forward_scalar(arch, params, feats)


def _forward_scalar(arch, params, feats):
    # per-unit loop; works for tape variables and any dual type
    y = feats
    dims = layer_dims(arch)
    for li, (fan_in, fan_out) in enumerate(dims):
        last = li == len(dims) - 1
        name = "out" if last else f"layer{li}"
        W = params.segment(f"{name}.W")
        b = params.segment(f"{name}.b") if not last else None
        z = []
        for u in range(fan_out):
            acc = W[u, 0] * y[0]
            for i in range(1, fan_in):
                acc = acc + W[u, i] * y[i]
            if b is not None:
                acc = acc + float(b[u])
            z.append(acc)
        y = z if last else [_activation(arch, v) for v in z]
    return y


def _stack(feats):
    vals = [np.asarray(fmath.value_of(f), dtype=np.float64) for f in feats]
    batched = any(v.ndim > 0 for v in vals)

    def chan(get):
        rows = []
        for f, v in zip(feats, vals):
            c = get(f)
            arr = np.zeros_like(v) if isinstance(c, float) and c == 0.0 else np.asarray(c, dtype=np.float64)
            rows.append(np.broadcast_to(arr, v.shape) if batched else arr)
        return np.stack(rows)

    kind = type(feats[0])
    if all(isinstance(f, Dual2) for f in feats):
        return Dual2(chan(lambda f: f.value), chan(lambda f: f.d1), chan(lambda f: f.d2)), batched
    if all(isinstance(f, Dual) for f in feats):
        return Dual(chan(lambda f: f.value), chan(lambda f: f.deriv)), batched
    if all(fmath.is_numeric(f) for f in feats):
        return chan(lambda f: f), batched
    raise TypeError(f"cannot stack features of type {kind}")


def _matvec(W, y):
    # explicit dispatch: ndarray @ dual would go through numpy's protocol
    if isinstance(y, (Dual, Dual2)):
        return y.__rmatmul__(W)
    return W @ y


def _forward_stacked(arch, params, feats):
    # vectorized matrix path for floats/arrays and duals over them
    y, batched = _stack(feats)
    dims = layer_dims(arch)
    for li, (fan_in, fan_out) in enumerate(dims):
        last = li == len(dims) - 1
        name = "out" if last else f"layer{li}"
        W = params.segment(f"{name}.W")
        z = _matvec(W, y)
        if not last:
            b = params.segment(f"{name}.b")
            z = z + (b[:, None] if batched else b)
            y = _activation(arch, z)
        else:
            y = z
    out = []
    for u in range(arch.output_dim):
        if isinstance(y, Dual2):
            out.append(Dual2(y.value[u], _idx(y.d1, u), _idx(y.d2, u)))
        elif isinstance(y, Dual):
            out.append(Dual(y.value[u], _idx(y.deriv, u)))
        else:
            out.append(y[u])
    return out


def _idx(comp, u):
    return 0.0 if isinstance(comp, float) else comp[u]


def save_network(path, arch: Architecture, params: ParamVector):
    """Write descriptor + flat parameters as JSON."""
    record = {
        "descriptor": {
            "input_dim": arch.input_dim,
            "hidden_widths": list(arch.hidden_widths),
            "output_dim": arch.output_dim,
            "activation": arch.activation,
            "omega0": arch.omega0,
            "fourier_f": arch.fourier_f,
            "fourier_sigma2": arch.fourier_sigma2,
            "seed": arch.seed,
        },
        "params": [float(v) for v in params.values],
    }
    with open(path, "w") as fh:
        json.dump(record, fh)


def load_network(path):
    with open(path) as fh:
        record = json.load(fh)
    d = record["descriptor"]
    arch = Architecture(
        input_dim=int(d["input_dim"]),
        hidden_widths=tuple(d["hidden_widths"]),
        output_dim=int(d["output_dim"]),
        activation=d["activation"],
        omega0=float(d["omega0"]),
        fourier_f=int(d["fourier_f"]),
        fourier_sigma2=float(d["fourier_sigma2"]),
        seed=int(d["seed"]),
    )
    values = np.asarray(record["params"], dtype=np.float64)
    if values.size != param_count(arch):
        raise ValueError("parameter count does not match the descriptor")
    return arch, param_layout(arch).replaced(values)
