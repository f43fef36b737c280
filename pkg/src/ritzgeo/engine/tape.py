"""Reverse-mode tape over lane-vectorized scalar rows.

A tape row is a vector of `width` lanes holding one scalar quantity evaluated
at `width` independent sites (quadrature nodes, or node x space products).
Recording arithmetic on Var handles appends ops; freeze() lowers the program
to flat arrays that a backend executor sweeps forward (values) and backward
(adjoints). Building is Python-slow and happens once per configuration;
sweeps are the per-epoch hot path.

Op field conventions (indices into the row table, -1 when unused):

  CONST/PARAM         o0=row                      leaves, skipped in sweeps
  ADD SUB MUL DIV     o0, a0, a1                  elementwise, width-1 broadcast
  NEG TANH SIN COS
  EXP SQRT SQUARE
  RECIP COPY          o0, a0
  SCALE ADDC RSUBC
  POWC                o0, a0, c
  EXPAND              o0, a0, i0=m                out[l] = in[l // m]
  WSUMB               o0, a0, i0=m, i1=fslab off  out[q] = sum_j w[j] in[q*m+j]
  DENSE/DENSEACC      o0=out0 a0=in0 a1=w0        out[u][l] (+)= sum_i w[u*I+i][l//m] in[i][l]
                      i0=U, i1=I                  (m = width(out) / width(w0))
  TANH2               o0=yv o1=yd a0=zv a1=zd     dual tanh
  TANH4               o0..o3=y* a0..a3=z*         bidual tanh (v, x, p, xp channels)
  HDIST               o0=d o1..o3=unit-offset     min distance from point rows
                      a0..a2=x,y,z                (a0,a1,a2) to the helix axis
"""

import numpy as np

from ..errors import NonFiniteError
from .dual import Dual

OP_CONST = 0
OP_PARAM = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_SCALE = 7
OP_ADDC = 8
OP_RSUBC = 9
OP_TANH = 10
OP_SIN = 11
OP_COS = 12
OP_EXP = 13
OP_SQRT = 14
OP_SQUARE = 15
OP_RECIP = 16
OP_POWC = 17
OP_COPY = 18
OP_EXPAND = 19
OP_WSUMB = 20
OP_DENSE = 21
OP_DENSEACC = 22
OP_TANH2 = 23
OP_TANH4 = 24
OP_HDIST = 25

OP_NAMES = {
    OP_CONST: "const",
    OP_PARAM: "param",
    OP_ADD: "add",
    OP_SUB: "sub",
    OP_MUL: "mul",
    OP_DIV: "div",
    OP_NEG: "neg",
    OP_SCALE: "scale",
    OP_ADDC: "addc",
    OP_RSUBC: "rsubc",
    OP_TANH: "tanh",
    OP_SIN: "sin",
    OP_COS: "cos",
    OP_EXP: "exp",
    OP_SQRT: "sqrt",
    OP_SQUARE: "square",
    OP_RECIP: "recip",
    OP_POWC: "powc",
    OP_COPY: "copy",
    OP_EXPAND: "expand",
    OP_WSUMB: "wsumb",
    OP_DENSE: "dense",
    OP_DENSEACC: "dense_acc",
    OP_TANH2: "tanh_dual",
    OP_TANH4: "tanh_bidual",
    OP_HDIST: "helix_distance",
}

_N_INT_FIELDS = 12  # kind, o0..o3, a0..a3, i0..i2


class Var:
    """Handle to one tape row; arithmetic records ops."""

    __slots__ = ("tape", "row")

    def __init__(self, tape, row):
        self.tape = tape
        self.row = row

    @property
    def width(self):
        return self.tape.row_width(self.row)

    def _bin(self, other, kind, swapped=False):
        t = self.tape
        if isinstance(other, Var):
            if other.tape is not t:
                raise ValueError("vars belong to different tapes")
            a, b = (other, self) if swapped else (self, other)
            return t._emit_binary(kind, a.row, b.row)
        if not isinstance(other, (int, float, np.integer, np.floating)):
            return NotImplemented  # let duals wrap this Var as a constant
        c = float(other)
        if kind == OP_ADD:
            return t._emit_unary_c(OP_ADDC, self.row, c)
        if kind == OP_SUB:
            return (
                t._emit_unary_c(OP_RSUBC, self.row, c)
                if swapped
                else t._emit_unary_c(OP_ADDC, self.row, -c)
            )
        if kind == OP_MUL:
            return t._emit_unary_c(OP_SCALE, self.row, c)
        if kind == OP_DIV:
            if swapped:
                r = t._emit_unary(OP_RECIP, self.row)
                return r if c == 1.0 else t._emit_unary_c(OP_SCALE, r.row, c)
            return t._emit_unary_c(OP_SCALE, self.row, 1.0 / c)
        raise AssertionError(kind)

    def __add__(self, other):
        return self._bin(other, OP_ADD)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin(other, OP_SUB)

    def __rsub__(self, other):
        return self._bin(other, OP_SUB, swapped=True)

    def __mul__(self, other):
        return self._bin(other, OP_MUL)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin(other, OP_DIV)

    def __rtruediv__(self, other):
        return self._bin(other, OP_DIV, swapped=True)

    def __neg__(self):
        return self.tape._emit_unary(OP_NEG, self.row)

    def __pow__(self, c):
        if not isinstance(c, (int, float)):
            raise TypeError("exponent must be a constant")
        if c == 2:
            return self.tape._emit_unary(OP_SQUARE, self.row)
        if c == -1:
            return self.tape._emit_unary(OP_RECIP, self.row)
        return self.tape._emit_unary_c(OP_POWC, self.row, float(c))

    def tanh(self):
        return self.tape._emit_unary(OP_TANH, self.row)

    def sin(self):
        return self.tape._emit_unary(OP_SIN, self.row)

    def cos(self):
        return self.tape._emit_unary(OP_COS, self.row)

    def exp(self):
        return self.tape._emit_unary(OP_EXP, self.row)

    def sqrt(self):
        return self.tape._emit_unary(OP_SQRT, self.row)

    def __repr__(self):
        return f"Var(row={self.row}, width={self.width})"


class VarRange:
    """n consecutive rows of equal width."""

    __slots__ = ("tape", "start", "n", "width")

    def __init__(self, tape, start, n, width):
        self.tape = tape
        self.start = start
        self.n = n
        self.width = width

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        if not 0 <= i < self.n:
            raise IndexError(i)
        return Var(self.tape, self.start + i)

    def __iter__(self):
        return (Var(self.tape, self.start + i) for i in range(self.n))


class Tape:
    """Recording context. Emit ops through Var arithmetic or the builder methods."""

    def __init__(self):
        self._widths = []
        self._const_data = {}  # row -> ndarray
        self._param_rows = []
        self._param_values = []
        self._ops = []  # list of _N_INT_FIELDS-int lists
        self._op_c = []
        self._fslab = []
        self._fslab_len = 0
        self._helix = None  # (samples[m,4], R, iters)
        self._producer = []
        self._frozen = None
        self._executor = None

    # -- row management ----------------------------------------------------

    def n_rows(self):
        return len(self._widths)

    def n_ops(self):
        return len(self._ops)

    def row_width(self, row):
        return self._widths[row]

    def _new_row(self, width):
        self._check_open()
        self._widths.append(int(width))
        self._producer.append(-1)
        return len(self._widths) - 1

    def _check_open(self):
        if self._frozen is not None:
            raise RuntimeError("tape is frozen; no further recording allowed")

    def alloc_range(self, n, width):
        """Reserve n consecutive rows to be written later (dense layers etc.)."""
        start = self._new_row(width)
        for _ in range(n - 1):
            self._new_row(width)
        return VarRange(self, start, n, width)

    # -- leaves --------------------------------------------------------------

    def const(self, value) -> Var:
        """Constant row: scalar (width 1) or 1-d array (width = len)."""
        arr = np.atleast_1d(np.asarray(value, dtype=np.float64))
        if arr.ndim != 1:
            raise ValueError("constants must be scalars or 1-d arrays")
        row = self._new_row(arr.size)
        self._const_data[row] = arr.copy()
        self._push_op(OP_CONST, outs=(row,))
        return Var(self, row)

    def param(self, value=0.0) -> Var:
        """Width-1 leaf whose value is set per evaluation; gradient target."""
        row = self._new_row(1)
        idx = len(self._param_rows)
        self._param_rows.append(row)
        self._param_values.append(float(value))
        self._push_op(OP_PARAM, outs=(row,), i0=idx)
        return Var(self, row)

    def params(self, values):
        return [self.param(v) for v in values]

    def n_params(self):
        return len(self._param_rows)

    # -- op emission ---------------------------------------------------------

    def _push_op(self, kind, outs=(), ins=(), i0=-1, i1=-1, i2=-1, c=0.0):
        rec = [-1] * _N_INT_FIELDS
        rec[0] = kind
        for j, o in enumerate(outs):
            rec[1 + j] = o
            if self._producer[o] < 0:
                self._producer[o] = len(self._ops)
        for j, a in enumerate(ins):
            rec[5 + j] = a
        rec[9], rec[10], rec[11] = i0, i1, i2
        self._ops.append(rec)
        self._op_c.append(float(c))
        return len(self._ops) - 1

    def _binary_width(self, ra, rb):
        wa, wb = self._widths[ra], self._widths[rb]
        if wa == wb:
            return wa
        if wa == 1:
            return wb
        if wb == 1:
            return wa
        raise ValueError(f"incompatible widths {wa} and {wb}")

    def _emit_binary(self, kind, ra, rb):
        self._check_open()
        out = self._new_row(self._binary_width(ra, rb))
        self._push_op(kind, outs=(out,), ins=(ra, rb))
        return Var(self, out)

    def _emit_unary(self, kind, ra):
        self._check_open()
        out = self._new_row(self._widths[ra])
        self._push_op(kind, outs=(out,), ins=(ra,))
        return Var(self, out)

    def _emit_unary_c(self, kind, ra, c):
        self._check_open()
        out = self._new_row(self._widths[ra])
        self._push_op(kind, outs=(out,), ins=(ra,), c=c)
        return Var(self, out)

    # -- structured ops --------------------------------------------------------

    def copy_into(self, dst: Var, src: Var):
        if dst.width != src.width:
            raise ValueError("copy width mismatch")
        self._check_open()
        self._push_op(OP_COPY, outs=(dst.row,), ins=(src.row,))

    def expand(self, a: Var, m: int) -> Var:
        """Block-broadcast: out[l] = a[l // m]."""
        self._check_open()
        out = self._new_row(a.width * m)
        self._push_op(OP_EXPAND, outs=(out,), ins=(a.row,), i0=m)
        return Var(self, out)

    def wsumb(self, a: Var, weights) -> Var:
        """Weighted reduction of consecutive blocks: out[q] = sum_j w[j] a[q*m+j]."""
        self._check_open()
        w = np.asarray(weights, dtype=np.float64).ravel()
        m = w.size
        if a.width % m:
            raise ValueError("row width not divisible by block size")
        out = self._new_row(a.width // m)
        off = self._fslab_len
        self._fslab.append(w.copy())
        self._fslab_len += m
        self._push_op(OP_WSUMB, outs=(out,), ins=(a.row,), i0=m, i1=off)
        return Var(self, out)

    def _check_range(self, rng: VarRange, what: str):
        for i in range(rng.n):
            if self._widths[rng.start + i] != rng.width:
                raise ValueError(f"{what} rows must share a width")

    def dense(self, inputs: VarRange, weights: VarRange, n_out: int,
              out: VarRange = None, accumulate: bool = False) -> VarRange:
        """Affine-free dense layer over lanes: out[u] = sum_i w[u*I+i] * in[i].

        Weight rows have width B; each weight element is broadcast over
        m = lane_width / B consecutive lanes (B=1 gives ordinary scalar
        weights; B = number of lane blocks gives per-block weights).
        """
        self._check_open()
        n_in = inputs.n
        if weights.n != n_out * n_in:
            raise ValueError("weight row count must be n_out * n_in")
        self._check_range(inputs, "input")
        self._check_range(weights, "weight")
        wlanes = inputs.width
        if wlanes % weights.width:
            raise ValueError("lane width not divisible by weight width")
        if out is None:
            out = self.alloc_range(n_out, wlanes)
        elif out.n != n_out or out.width != wlanes:
            raise ValueError("output range shape mismatch")
        kind = OP_DENSEACC if accumulate else OP_DENSE
        idx = self._push_op(
            kind, outs=(out.start,), ins=(inputs.start, weights.start),
            i0=n_out, i1=n_in,
        )
        for u in range(out.n):  # all written by this op
            if self._producer[out.start + u] < 0:
                self._producer[out.start + u] = idx
        return out

    def tanh2_into(self, yv: Var, yd: Var, zv: Var, zd: Var):
        self._check_open()
        if not (yv.width == yd.width == zv.width == zd.width):
            raise ValueError("tanh2 width mismatch")
        self._push_op(OP_TANH2, outs=(yv.row, yd.row), ins=(zv.row, zd.row))

    def tanh4_into(self, ys, zs):
        self._check_open()
        ws = {self._widths[v.row] for v in list(ys) + list(zs)}
        if len(ws) != 1:
            raise ValueError("tanh4 width mismatch")
        self._push_op(
            OP_TANH4,
            outs=tuple(v.row for v in ys),
            ins=tuple(v.row for v in zs),
        )

    def helix_distance(self, x: Var, y: Var, z: Var, samples, radius: float,
                       refine_iters: int) -> Var:
        """Distance from the point rows (x, y, z) to a helical axis.

        samples: precomputed [m, 4] array of (t, axis(t)) used for the coarse
        scan; the bracket around the best sample is refined by ternary search.
        The unit offset (point - axis(t*)) / d is stored alongside for the
        reverse sweep (envelope theorem: t* is stationary, so its motion does
        not contribute to the derivative).
        """
        self._check_open()
        if self._helix is not None:
            raise ValueError("tape already carries a helix descriptor")
        samples = np.ascontiguousarray(np.asarray(samples, dtype=np.float64))
        if samples.ndim != 2 or samples.shape[1] != 4:
            raise ValueError("helix samples must be [m, 4]")
        self._helix = (samples, float(radius), int(refine_iters))
        w = x.width
        if not (y.width == w and z.width == w):
            raise ValueError("helix point rows must share a width")
        d = self._new_row(w)
        px = self._new_row(w)
        py = self._new_row(w)
        pz = self._new_row(w)
        self._push_op(OP_HDIST, outs=(d, px, py, pz), ins=(x.row, y.row, z.row))
        return Var(self, d)

    # -- freezing and execution -----------------------------------------------

    def freeze(self):
        if self._frozen is None:
            self._frozen = TapeProgram(self)
        return self._frozen

    def set_param_values(self, values):
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != len(self._param_values):
            raise ValueError("wrong parameter count")
        self._param_values = [float(v) for v in values]
        if self._executor is not None:
            self._executor.load_params(values)

    def _get_executor(self):
        if self._executor is None:
            from .backend import default_backend

            self._executor = default_backend().executor(self.freeze())
        return self._executor

    def value(self, var: Var) -> float:
        """Forward-evaluate and read one row (first lane if wider)."""
        ex = self._get_executor()
        ex.load_params(np.asarray(self._param_values))
        ex.forward()
        v = ex.value(var.row)
        return float(v[0]) if v.size == 1 else v

    def gradient(self, root, check_finite: bool = True) -> np.ndarray:
        """Adjoints of all params for a scalar root, in registration order.

        Accepts a Var or a Dual/MultiDual over Vars (the value channel is
        used). Parameters the root does not depend on get exact zeros.
        """
        if isinstance(root, Dual):
            root = root.value
        if not isinstance(root, Var):
            raise TypeError("gradient root must be a tape Var")
        if self.row_width(root.row) != 1:
            raise ValueError("gradient root must be a scalar (width-1) row")
        ex = self._get_executor()
        ex.load_params(np.asarray(self._param_values))
        ex.forward()
        if check_finite:
            bad = ex.first_nonfinite()
            if bad is not None:
                raise NonFiniteError(bad[1], bad[0])
        ex.reverse(root.row)
        return ex.param_grads().copy()


class TapeProgram:
    """Frozen tape lowered to flat arrays; consumed by backend executors."""

    def __init__(self, tape: Tape):
        widths = np.asarray(tape._widths, dtype=np.int64)
        self.widths = widths
        self.offsets = np.zeros(widths.size + 1, dtype=np.int64)
        np.cumsum(widths, out=self.offsets[1:])
        self.total = int(self.offsets[-1])
        self.ops = (
            np.asarray(tape._ops, dtype=np.int64).reshape(-1, _N_INT_FIELDS)
            if tape._ops
            else np.zeros((0, _N_INT_FIELDS), dtype=np.int64)
        )
        self.op_c = np.asarray(tape._op_c, dtype=np.float64)
        self.fslab = (
            np.concatenate(tape._fslab) if tape._fslab else np.zeros(0, dtype=np.float64)
        )
        self.param_offsets = np.asarray(
            [self.offsets[r] for r in tape._param_rows], dtype=np.int64
        )
        self.init_values = np.zeros(self.total, dtype=np.float64)
        for row, data in tape._const_data.items():
            off = self.offsets[row]
            self.init_values[off : off + data.size] = data
        if tape._helix is not None:
            self.helix_samples, self.helix_radius, self.helix_iters = tape._helix
        else:
            self.helix_samples = np.zeros((0, 4), dtype=np.float64)
            self.helix_radius = 0.0
            self.helix_iters = 0
        self.producer = np.asarray(tape._producer, dtype=np.int64)
        unwritten = [r for r, p in enumerate(tape._producer) if p < 0]
        if unwritten:
            raise ValueError(f"rows never written: {unwritten[:8]}")

    def op_kind_name(self, op_index: int) -> str:
        return OP_NAMES[int(self.ops[op_index, 0])]

    def executor(self, backend=None):
        from .backend import default_backend, get_backend

        if backend is None:
            b = default_backend()
        elif isinstance(backend, str):
            b = get_backend(backend)
        else:
            b = backend
        return b.executor(self)
