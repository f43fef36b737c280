"""Tape executors: pure-numpy fallback plus the wrapper for the compiled core.

Both expose the same interface:

    load_params(beta)   write parameter leaves into the value buffer
    forward()           one value sweep (raises EvaluationDomainError)
    reverse(root_row)   one adjoint sweep from a width-1 root
    value(row)          value-buffer view of one row
    adjoint(row)        adjoint-buffer view of one row
    param_grads()       adjoints of all parameter leaves, registration order
    first_nonfinite()   (op_index, kind_name) of the first non-finite row, or None
"""

import numpy as np

from ..errors import EvaluationDomainError
from . import tape as T


def helix_axis(t, radius):
    """Point(s) on the helical axis at parameter t (ascends with t in [-1, 1])."""
    t = np.asarray(t, dtype=np.float64)
    c = radius * np.cos(0.5 * np.pi * t)
    return np.stack([c * np.cos(np.pi * t), c * np.sin(np.pi * t), t], axis=-1)


def helix_min_distance(points, samples, radius, iters):
    """Distance from each point to the axis: coarse scan plus ternary refinement.

    Returns (d, t_star, unit_offset). The scan takes the first minimum among
    the samples; the bracket around it is narrowed by `iters` ternary steps.
    Deterministic, and mirrored exactly by the compiled core.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ts = samples[:, 0]
    d2 = (
        (pts[:, 0:1] - samples[None, :, 1]) ** 2
        + (pts[:, 1:2] - samples[None, :, 2]) ** 2
        + (pts[:, 2:3] - samples[None, :, 3]) ** 2
    )
    j = np.argmin(d2, axis=1)
    lo = ts[np.maximum(j - 1, 0)]
    hi = ts[np.minimum(j + 1, ts.size - 1)]

    def g(t):
        c = radius * np.cos(0.5 * np.pi * t)
        dx = pts[:, 0] - c * np.cos(np.pi * t)
        dy = pts[:, 1] - c * np.sin(np.pi * t)
        dz = pts[:, 2] - t
        return dx * dx + dy * dy + dz * dz

    for _ in range(iters):
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        better1 = g(m1) < g(m2)
        hi = np.where(better1, m2, hi)
        lo = np.where(better1, lo, m1)
    t_star = 0.5 * (lo + hi)
    diff = pts - helix_axis(t_star, radius)
    d = np.sqrt(np.sum(diff * diff, axis=1))
    safe = np.where(d > 1e-300, d, 1.0)
    unit = np.where(d[:, None] > 1e-300, diff / safe[:, None], 0.0)
    return d, t_star, unit


class _BaseExecutor:
    def __init__(self, prog):
        self.prog = prog
        self.val = prog.init_values.copy()
        self.adj = np.zeros(prog.total, dtype=np.float64)

    def _row(self, buf, r):
        off = self.prog.offsets[r]
        return buf[off : off + self.prog.widths[r]]

    def value(self, row):
        return self._row(self.val, row)

    def adjoint(self, row):
        return self._row(self.adj, row)

    def load_params(self, beta):
        beta = np.asarray(beta, dtype=np.float64).ravel()
        if beta.size != self.prog.param_offsets.size:
            raise ValueError("wrong parameter count")
        self.val[self.prog.param_offsets] = beta

    def param_grads(self):
        return self.adj[self.prog.param_offsets]

    def first_nonfinite(self):
        finite = np.isfinite(self.val)
        if finite.all():
            return None
        idx = int(np.argmin(finite))
        row = int(np.searchsorted(self.prog.offsets, idx, side="right") - 1)
        op = int(self.prog.producer[row])
        return op, self.prog.op_kind_name(op)


class PyExecutor(_BaseExecutor):
    """Pure-numpy reference executor; the op semantics of record."""

    def __init__(self, prog):
        super().__init__(prog)
        self._fwd = []
        self._prep()

    def _prep(self):
        p = self.prog
        for i in range(p.ops.shape[0]):
            rec = p.ops[i]
            kind = int(rec[0])
            if kind in (T.OP_CONST, T.OP_PARAM):
                continue
            outs = [int(r) for r in rec[1:5] if r >= 0]
            ins = [int(r) for r in rec[5:9] if r >= 0]
            i0, i1 = int(rec[9]), int(rec[10])
            c = float(p.op_c[i])
            ov = [self._row(self.val, r) for r in outs]
            oa = [self._row(self.adj, r) for r in outs]
            iv = [self._row(self.val, r) for r in ins]
            ia = [self._row(self.adj, r) for r in ins]
            extra = None
            if kind == T.OP_WSUMB:
                extra = p.fslab[i1 : i1 + i0]
            elif kind in (T.OP_DENSE, T.OP_DENSEACC):
                U, I = i0, i1
                out0, in0, w0 = outs[0], ins[0], ins[1]
                W = int(p.widths[out0])
                B = int(p.widths[w0])
                m = W // B
                o_all = self.val[p.offsets[out0] : p.offsets[out0] + U * W]
                i_all = self.val[p.offsets[in0] : p.offsets[in0] + I * W]
                w_all = self.val[p.offsets[w0] : p.offsets[w0] + U * I * B]
                oj_all = self.adj[p.offsets[out0] : p.offsets[out0] + U * W]
                ij_all = self.adj[p.offsets[in0] : p.offsets[in0] + I * W]
                wj_all = self.adj[p.offsets[w0] : p.offsets[w0] + U * I * B]
                extra = (
                    o_all.reshape(U, B, m),
                    i_all.reshape(I, B, m),
                    w_all.reshape(U, I, B),
                    oj_all.reshape(U, B, m),
                    ij_all.reshape(I, B, m),
                    wj_all.reshape(U, I, B),
                )
            elif kind == T.OP_HDIST:
                extra = (p.helix_samples, p.helix_radius, p.helix_iters)
            self._fwd.append((i, kind, ov, oa, iv, ia, i0, c, extra))

    def forward(self):
        for i, kind, ov, _, iv, _, i0, c, extra in self._fwd:
            if kind == T.OP_ADD:
                np.add(iv[0], iv[1], out=ov[0])
            elif kind == T.OP_SUB:
                np.subtract(iv[0], iv[1], out=ov[0])
            elif kind == T.OP_MUL:
                np.multiply(iv[0], iv[1], out=ov[0])
            elif kind == T.OP_DIV:
                if np.any(iv[1] == 0.0):
                    raise EvaluationDomainError("div", i, "division by zero")
                np.divide(iv[0], iv[1], out=ov[0])
            elif kind == T.OP_NEG:
                np.negative(iv[0], out=ov[0])
            elif kind == T.OP_SCALE:
                np.multiply(iv[0], c, out=ov[0])
            elif kind == T.OP_ADDC:
                np.add(iv[0], c, out=ov[0])
            elif kind == T.OP_RSUBC:
                np.subtract(c, iv[0], out=ov[0])
            elif kind == T.OP_TANH:
                np.tanh(iv[0], out=ov[0])
            elif kind == T.OP_SIN:
                np.sin(iv[0], out=ov[0])
            elif kind == T.OP_COS:
                np.cos(iv[0], out=ov[0])
            elif kind == T.OP_EXP:
                np.exp(iv[0], out=ov[0])
            elif kind == T.OP_SQRT:
                if np.any(iv[0] < 0.0):
                    raise EvaluationDomainError("sqrt", i, "negative argument")
                np.sqrt(iv[0], out=ov[0])
            elif kind == T.OP_SQUARE:
                np.multiply(iv[0], iv[0], out=ov[0])
            elif kind == T.OP_RECIP:
                if np.any(iv[0] == 0.0):
                    raise EvaluationDomainError("recip", i, "division by zero")
                np.divide(1.0, iv[0], out=ov[0])
            elif kind == T.OP_POWC:
                if np.any(iv[0] <= 0.0):
                    raise EvaluationDomainError("powc", i, "non-positive base")
                np.power(iv[0], c, out=ov[0])
            elif kind == T.OP_COPY:
                ov[0][:] = iv[0]
            elif kind == T.OP_EXPAND:
                ov[0][:] = np.repeat(iv[0], i0)
            elif kind == T.OP_WSUMB:
                ov[0][:] = iv[0].reshape(-1, i0) @ extra
            elif kind in (T.OP_DENSE, T.OP_DENSEACC):
                o3, i3, w3 = extra[0], extra[1], extra[2]
                prod = np.einsum("uib,ibm->ubm", w3, i3)
                if kind == T.OP_DENSE:
                    o3[:] = prod
                else:
                    o3 += prod
            elif kind == T.OP_TANH2:
                yv, yd = ov
                np.tanh(iv[0], out=yv)
                yd[:] = (1.0 - yv * yv) * iv[1]
            elif kind == T.OP_TANH4:
                yv, yx, yp, yxp = ov
                zv, zx, zp, zxp = iv
                np.tanh(zv, out=yv)
                s = 1.0 - yv * yv
                yx[:] = s * zx
                yp[:] = s * zp
                yxp[:] = s * zxp - 2.0 * yv * s * zx * zp
            elif kind == T.OP_HDIST:
                samples, radius, iters = extra
                pts = np.stack([iv[0], iv[1], iv[2]], axis=1)
                d, _, unit = helix_min_distance(pts, samples, radius, iters)
                ov[0][:] = d
                ov[1][:] = unit[:, 0]
                ov[2][:] = unit[:, 1]
                ov[3][:] = unit[:, 2]
            else:  # pragma: no cover
                raise AssertionError(f"unknown op kind {kind}")

    @staticmethod
    def _acc(dst, term):
        # width-1 operands collect the sum of lane contributions
        if dst.size == 1 and np.size(term) > 1:
            dst += term.sum()
        else:
            dst += term

    def reverse(self, root_row):
        self.adj[:] = 0.0
        root_off = self.prog.offsets[root_row]
        if self.prog.widths[root_row] != 1:
            raise ValueError("reverse root must be a width-1 row")
        self.adj[root_off] = 1.0
        acc = self._acc
        for i, kind, ov, oa, iv, ia, i0, c, extra in reversed(self._fwd):
            if kind == T.OP_ADD:
                acc(ia[0], oa[0])
                acc(ia[1], oa[0])
            elif kind == T.OP_SUB:
                acc(ia[0], oa[0])
                acc(ia[1], -oa[0])
            elif kind == T.OP_MUL:
                acc(ia[0], oa[0] * iv[1])
                acc(ia[1], oa[0] * iv[0])
            elif kind == T.OP_DIV:
                acc(ia[0], oa[0] / iv[1])
                acc(ia[1], -oa[0] * ov[0] / iv[1])
            elif kind == T.OP_NEG:
                acc(ia[0], -oa[0])
            elif kind == T.OP_SCALE:
                acc(ia[0], c * oa[0])
            elif kind == T.OP_ADDC:
                acc(ia[0], oa[0])
            elif kind == T.OP_RSUBC:
                acc(ia[0], -oa[0])
            elif kind == T.OP_TANH:
                acc(ia[0], oa[0] * (1.0 - ov[0] * ov[0]))
            elif kind == T.OP_SIN:
                acc(ia[0], oa[0] * np.cos(iv[0]))
            elif kind == T.OP_COS:
                acc(ia[0], -oa[0] * np.sin(iv[0]))
            elif kind == T.OP_EXP:
                acc(ia[0], oa[0] * ov[0])
            elif kind == T.OP_SQRT:
                acc(ia[0], oa[0] * 0.5 / ov[0])
            elif kind == T.OP_SQUARE:
                acc(ia[0], oa[0] * 2.0 * iv[0])
            elif kind == T.OP_RECIP:
                acc(ia[0], -oa[0] * ov[0] * ov[0])
            elif kind == T.OP_POWC:
                acc(ia[0], oa[0] * c * ov[0] / iv[0])
            elif kind == T.OP_COPY:
                acc(ia[0], oa[0])
            elif kind == T.OP_EXPAND:
                ia[0] += oa[0].reshape(-1, i0).sum(axis=1)
            elif kind == T.OP_WSUMB:
                ia[0] += np.outer(oa[0], extra).ravel()
            elif kind in (T.OP_DENSE, T.OP_DENSEACC):
                _, i3, w3, oj3, ij3, wj3 = extra
                ij3 += np.einsum("uib,ubm->ibm", w3, oj3)
                wj3 += np.einsum("ubm,ibm->uib", oj3, i3)
            elif kind == T.OP_TANH2:
                yv = ov[0]
                s = 1.0 - yv * yv
                ia[0] += oa[0] * s + oa[1] * (-2.0 * yv * s) * iv[1]
                ia[1] += oa[1] * s
            elif kind == T.OP_TANH4:
                yv = ov[0]
                zv, zx, zp, zxp = iv
                s = 1.0 - yv * yv
                q = -2.0 * yv * s  # d(s)/dz
                dq = -2.0 * s * (s - 2.0 * yv * yv)  # d(q)/dz
                ia[0] += (
                    oa[0] * s
                    + oa[1] * q * zx
                    + oa[2] * q * zp
                    + oa[3] * (q * zxp + dq * zx * zp)
                )
                ia[1] += oa[1] * s + oa[3] * q * zp
                ia[2] += oa[2] * s + oa[3] * q * zx
                ia[3] += oa[3] * s
            elif kind == T.OP_HDIST:
                ia[0] += oa[0] * ov[1]
                ia[1] += oa[0] * ov[2]
                ia[2] += oa[0] * ov[3]


class CompiledExecutor(_BaseExecutor):
    """Thin wrapper over the Cython sweeps in ritzgeo._core."""

    def __init__(self, prog, core):
        super().__init__(prog)
        self._core = core
        self._ops = np.ascontiguousarray(prog.ops)
        self._c = np.ascontiguousarray(prog.op_c)
        self._off = np.ascontiguousarray(prog.offsets)
        self._w = np.ascontiguousarray(prog.widths)
        self._fslab = np.ascontiguousarray(prog.fslab)
        self._hsamp = np.ascontiguousarray(prog.helix_samples)

    def forward(self):
        status = self._core.forward_sweep(
            self._ops, self._c, self._off, self._w, self.val, self._fslab,
            self._hsamp, self.prog.helix_radius, self.prog.helix_iters,
        )
        if status >= 0:
            op = status >> 2
            code = status & 3
            detail = {0: "division by zero", 1: "negative argument", 2: "non-positive base"}[code]
            raise EvaluationDomainError(self.prog.op_kind_name(op), op, detail)

    def reverse(self, root_row):
        if self.prog.widths[root_row] != 1:
            raise ValueError("reverse root must be a width-1 row")
        self.adj[:] = 0.0
        self.adj[self.prog.offsets[root_row]] = 1.0
        self._core.reverse_sweep(
            self._ops, self._c, self._off, self._w, self.val, self.adj, self._fslab,
        )
