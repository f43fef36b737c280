# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tape sweeps.

Semantics mirror ritzgeo.engine.executors.PyExecutor op for op; the backend
equivalence tests hold the two implementations together. Reductions run
strictly sequentially so repeated runs are bit-identical.
"""

from libc.math cimport tanh, sin, cos, exp, sqrt, pow, M_PI

import numpy as np

cdef enum:
    K_CONST = 0
    K_PARAM = 1
    K_ADD = 2
    K_SUB = 3
    K_MUL = 4
    K_DIV = 5
    K_NEG = 6
    K_SCALE = 7
    K_ADDC = 8
    K_RSUBC = 9
    K_TANH = 10
    K_SIN = 11
    K_COS = 12
    K_EXP = 13
    K_SQRT = 14
    K_SQUARE = 15
    K_RECIP = 16
    K_POWC = 17
    K_COPY = 18
    K_EXPAND = 19
    K_WSUMB = 20
    K_DENSE = 21
    K_DENSEACC = 22
    K_TANH2 = 23
    K_TANH4 = 24
    K_HDIST = 25

N_OP_KINDS = 26


cdef inline double _hax_x(double t, double radius) nogil:
    return radius * cos(0.5 * M_PI * t) * cos(M_PI * t)


cdef inline double _hax_y(double t, double radius) nogil:
    return radius * cos(0.5 * M_PI * t) * sin(M_PI * t)


cdef inline double _helix_g(double px, double py, double pz, double t,
                            double radius) nogil:
    cdef double c = radius * cos(0.5 * M_PI * t)
    cdef double dx = px - c * cos(M_PI * t)
    cdef double dy = py - c * sin(M_PI * t)
    cdef double dz = pz - t
    return dx * dx + dy * dy + dz * dz


cdef inline void _helix_point(double px, double py, double pz,
                              double[:, ::1] samples, double radius, int iters,
                              double* out_d, double* out_t,
                              double* ux, double* uy, double* uz) nogil:
    cdef Py_ssize_t m = samples.shape[0]
    cdef Py_ssize_t j, jbest = 0
    cdef double best = 1e300
    cdef double d2, dx, dy, dz, lo, hi, third, m1, m2, t, d
    for j in range(m):
        dx = px - samples[j, 1]
        dy = py - samples[j, 2]
        dz = pz - samples[j, 3]
        d2 = dx * dx + dy * dy + dz * dz
        if d2 < best:
            best = d2
            jbest = j
    lo = samples[jbest - 1 if jbest > 0 else 0, 0]
    hi = samples[jbest + 1 if jbest + 1 < m else m - 1, 0]
    for j in range(iters):
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if _helix_g(px, py, pz, m1, radius) < _helix_g(px, py, pz, m2, radius):
            hi = m2
        else:
            lo = m1
    t = 0.5 * (lo + hi)
    dx = px - _hax_x(t, radius)
    dy = py - _hax_y(t, radius)
    dz = pz - t
    d = sqrt(dx * dx + dy * dy + dz * dz)
    out_d[0] = d
    out_t[0] = t
    if d > 1e-300:
        ux[0] = dx / d
        uy[0] = dy / d
        uz[0] = dz / d
    else:
        ux[0] = 0.0
        uy[0] = 0.0
        uz[0] = 0.0


def helix_min_distance(double[:, ::1] pts, double[:, ::1] samples,
                       double radius, int iters):
    """Point API used by the refractive metric; same algorithm as the HDIST op."""
    cdef Py_ssize_t n = pts.shape[0], i
    d_arr = np.empty(n, dtype=np.float64)
    t_arr = np.empty(n, dtype=np.float64)
    u_arr = np.empty((n, 3), dtype=np.float64)
    cdef double[::1] d = d_arr
    cdef double[::1] tst = t_arr
    cdef double[:, ::1] u = u_arr
    cdef double dd, tt, ux, uy, uz
    for i in range(n):
        _helix_point(pts[i, 0], pts[i, 1], pts[i, 2], samples, radius, iters,
                     &dd, &tt, &ux, &uy, &uz)
        d[i] = dd
        tst[i] = tt
        u[i, 0] = ux
        u[i, 1] = uy
        u[i, 2] = uz
    return d_arr, t_arr, u_arr


def forward_sweep(long long[:, ::1] ops, double[::1] cvec, long long[::1] off,
                  long long[::1] width, double[::1] val, double[::1] fslab,
                  double[:, ::1] hsamp, double hradius, int hiters):
    """Value sweep. Returns -1 on success, (op_index << 2 | code) on domain error."""
    cdef Py_ssize_t n = ops.shape[0], i
    cdef int kind
    cdef long long o0, a0, a1, i0, i1
    cdef long long W, wa, wb, sa, sb, po, pa, pb, l
    cdef long long U, I, B, m, u, ii, b, lo_l
    cdef double c, x, y, s, wgt, acc
    cdef double d, tt, ux, uy, uz
    cdef long long p1, p2, p3, q0, q1, q2, q3

    for i in range(n):
        kind = <int> ops[i, 0]
        if kind == K_CONST or kind == K_PARAM:
            continue
        o0 = ops[i, 1]
        a0 = ops[i, 5]
        po = off[o0]
        W = width[o0]
        c = cvec[i]

        if kind <= K_DIV:  # binary elementwise
            a1 = ops[i, 6]
            pa = off[a0]
            pb = off[a1]
            sa = 0 if width[a0] == 1 else 1
            sb = 0 if width[a1] == 1 else 1
            if kind == K_ADD:
                for l in range(W):
                    val[po + l] = val[pa + l * sa] + val[pb + l * sb]
            elif kind == K_SUB:
                for l in range(W):
                    val[po + l] = val[pa + l * sa] - val[pb + l * sb]
            elif kind == K_MUL:
                for l in range(W):
                    val[po + l] = val[pa + l * sa] * val[pb + l * sb]
            else:
                for l in range(W):
                    y = val[pb + l * sb]
                    if y == 0.0:
                        return (i << 2) | 0
                    val[po + l] = val[pa + l * sa] / y
        elif kind <= K_POWC or kind == K_COPY:  # unary elementwise
            pa = off[a0]
            if kind == K_NEG:
                for l in range(W):
                    val[po + l] = -val[pa + l]
            elif kind == K_SCALE:
                for l in range(W):
                    val[po + l] = c * val[pa + l]
            elif kind == K_ADDC:
                for l in range(W):
                    val[po + l] = val[pa + l] + c
            elif kind == K_RSUBC:
                for l in range(W):
                    val[po + l] = c - val[pa + l]
            elif kind == K_TANH:
                for l in range(W):
                    val[po + l] = tanh(val[pa + l])
            elif kind == K_SIN:
                for l in range(W):
                    val[po + l] = sin(val[pa + l])
            elif kind == K_COS:
                for l in range(W):
                    val[po + l] = cos(val[pa + l])
            elif kind == K_EXP:
                for l in range(W):
                    val[po + l] = exp(val[pa + l])
            elif kind == K_SQRT:
                for l in range(W):
                    x = val[pa + l]
                    if x < 0.0:
                        return (i << 2) | 1
                    val[po + l] = sqrt(x)
            elif kind == K_SQUARE:
                for l in range(W):
                    x = val[pa + l]
                    val[po + l] = x * x
            elif kind == K_RECIP:
                for l in range(W):
                    x = val[pa + l]
                    if x == 0.0:
                        return (i << 2) | 0
                    val[po + l] = 1.0 / x
            elif kind == K_POWC:
                for l in range(W):
                    x = val[pa + l]
                    if x <= 0.0:
                        return (i << 2) | 2
                    val[po + l] = pow(x, c)
            else:  # copy
                for l in range(W):
                    val[po + l] = val[pa + l]
        elif kind == K_EXPAND:
            pa = off[a0]
            m = ops[i, 9]
            wa = width[a0]
            for b in range(wa):
                x = val[pa + b]
                lo_l = b * m
                for l in range(lo_l, lo_l + m):
                    val[po + l] = x
        elif kind == K_WSUMB:
            pa = off[a0]
            m = ops[i, 9]
            i1 = ops[i, 10]
            for b in range(W):
                acc = 0.0
                lo_l = b * m
                for l in range(m):
                    acc += fslab[i1 + l] * val[pa + lo_l + l]
                val[po + b] = acc
        elif kind == K_DENSE or kind == K_DENSEACC:
            a1 = ops[i, 6]
            U = ops[i, 9]
            I = ops[i, 10]
            B = width[a1]
            m = W / B
            pa = off[a0]
            pb = off[a1]
            for u in range(U):
                p1 = po + u * W
                if kind == K_DENSE:
                    for l in range(W):
                        val[p1 + l] = 0.0
                for ii in range(I):
                    p2 = pa + ii * W
                    p3 = pb + (u * I + ii) * B
                    for b in range(B):
                        wgt = val[p3 + b]
                        lo_l = b * m
                        for l in range(lo_l, lo_l + m):
                            val[p1 + l] += wgt * val[p2 + l]
        elif kind == K_TANH2:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            for l in range(W):
                x = tanh(val[pa + l])
                val[q0 + l] = x
                val[q1 + l] = (1.0 - x * x) * val[pb + l]
        elif kind == K_TANH4:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            q2 = off[ops[i, 3]]
            q3 = off[ops[i, 4]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            p2 = off[ops[i, 7]]
            p3 = off[ops[i, 8]]
            for l in range(W):
                x = tanh(val[pa + l])
                s = 1.0 - x * x
                val[q0 + l] = x
                val[q1 + l] = s * val[pb + l]
                val[q2 + l] = s * val[p2 + l]
                val[q3 + l] = s * val[p3 + l] - 2.0 * x * s * val[pb + l] * val[p2 + l]
        elif kind == K_HDIST:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            q2 = off[ops[i, 3]]
            q3 = off[ops[i, 4]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            p2 = off[ops[i, 7]]
            for l in range(W):
                _helix_point(val[pa + l], val[pb + l], val[p2 + l],
                             hsamp, hradius, hiters, &d, &tt, &ux, &uy, &uz)
                val[q0 + l] = d
                val[q1 + l] = ux
                val[q2 + l] = uy
                val[q3 + l] = uz
    return -1


def reverse_sweep(long long[:, ::1] ops, double[::1] cvec, long long[::1] off,
                  long long[::1] width, double[::1] val, double[::1] adj,
                  double[::1] fslab):
    """Adjoint sweep; the caller zeroes adj and seeds the root slot."""
    cdef Py_ssize_t n = ops.shape[0], i
    cdef int kind
    cdef long long o0, a0, a1, i1
    cdef long long W, sa, sb, po, pa, pb, l
    cdef long long U, I, B, m, u, ii, b, lo_l
    cdef double c, g, x, y, s, q, dq, wgt, acc
    cdef long long p1, p2, p3, p4, q0, q1, q2, q3
    cdef long long vo, va, vb

    for i in range(n - 1, -1, -1):
        kind = <int> ops[i, 0]
        if kind == K_CONST or kind == K_PARAM:
            continue
        o0 = ops[i, 1]
        a0 = ops[i, 5]
        po = off[o0]
        W = width[o0]
        c = cvec[i]

        if kind <= K_DIV:
            a1 = ops[i, 6]
            pa = off[a0]
            pb = off[a1]
            sa = 0 if width[a0] == 1 else 1
            sb = 0 if width[a1] == 1 else 1
            if kind == K_ADD:
                for l in range(W):
                    g = adj[po + l]
                    adj[pa + l * sa] += g
                    adj[pb + l * sb] += g
            elif kind == K_SUB:
                for l in range(W):
                    g = adj[po + l]
                    adj[pa + l * sa] += g
                    adj[pb + l * sb] -= g
            elif kind == K_MUL:
                for l in range(W):
                    g = adj[po + l]
                    adj[pa + l * sa] += g * val[pb + l * sb]
                    adj[pb + l * sb] += g * val[pa + l * sa]
            else:  # div
                for l in range(W):
                    g = adj[po + l]
                    y = val[pb + l * sb]
                    adj[pa + l * sa] += g / y
                    adj[pb + l * sb] -= g * val[po + l] / y
        elif kind <= K_POWC or kind == K_COPY:
            pa = off[a0]
            if kind == K_NEG:
                for l in range(W):
                    adj[pa + l] -= adj[po + l]
            elif kind == K_SCALE:
                for l in range(W):
                    adj[pa + l] += c * adj[po + l]
            elif kind == K_ADDC:
                for l in range(W):
                    adj[pa + l] += adj[po + l]
            elif kind == K_RSUBC:
                for l in range(W):
                    adj[pa + l] -= adj[po + l]
            elif kind == K_TANH:
                for l in range(W):
                    x = val[po + l]
                    adj[pa + l] += adj[po + l] * (1.0 - x * x)
            elif kind == K_SIN:
                for l in range(W):
                    adj[pa + l] += adj[po + l] * cos(val[pa + l])
            elif kind == K_COS:
                for l in range(W):
                    adj[pa + l] -= adj[po + l] * sin(val[pa + l])
            elif kind == K_EXP:
                for l in range(W):
                    adj[pa + l] += adj[po + l] * val[po + l]
            elif kind == K_SQRT:
                for l in range(W):
                    adj[pa + l] += adj[po + l] * 0.5 / val[po + l]
            elif kind == K_SQUARE:
                for l in range(W):
                    adj[pa + l] += adj[po + l] * 2.0 * val[pa + l]
            elif kind == K_RECIP:
                for l in range(W):
                    x = val[po + l]
                    adj[pa + l] -= adj[po + l] * x * x
            elif kind == K_POWC:
                for l in range(W):
                    adj[pa + l] += adj[po + l] * c * val[po + l] / val[pa + l]
            else:  # copy
                for l in range(W):
                    adj[pa + l] += adj[po + l]
        elif kind == K_EXPAND:
            pa = off[a0]
            m = ops[i, 9]
            for b in range(width[a0]):
                acc = 0.0
                lo_l = b * m
                for l in range(lo_l, lo_l + m):
                    acc += adj[po + l]
                adj[pa + b] += acc
        elif kind == K_WSUMB:
            pa = off[a0]
            m = ops[i, 9]
            i1 = ops[i, 10]
            for b in range(W):
                g = adj[po + b]
                lo_l = b * m
                for l in range(m):
                    adj[pa + lo_l + l] += g * fslab[i1 + l]
        elif kind == K_DENSE or kind == K_DENSEACC:
            a1 = ops[i, 6]
            U = ops[i, 9]
            I = ops[i, 10]
            B = width[a1]
            m = W / B
            pa = off[a0]
            pb = off[a1]
            for u in range(U):
                p1 = po + u * W
                for ii in range(I):
                    p2 = pa + ii * W
                    p3 = pb + (u * I + ii) * B
                    for b in range(B):
                        wgt = val[p3 + b]
                        acc = 0.0
                        lo_l = b * m
                        for l in range(lo_l, lo_l + m):
                            g = adj[p1 + l]
                            adj[p2 + l] += wgt * g
                            acc += g * val[p2 + l]
                        adj[p3 + b] += acc
        elif kind == K_TANH2:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            for l in range(W):
                x = val[q0 + l]
                s = 1.0 - x * x
                adj[pa + l] += adj[q0 + l] * s + adj[q1 + l] * (-2.0 * x * s) * val[pb + l]
                adj[pb + l] += adj[q1 + l] * s
        elif kind == K_TANH4:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            q2 = off[ops[i, 3]]
            q3 = off[ops[i, 4]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            p2 = off[ops[i, 7]]
            p3 = off[ops[i, 8]]
            for l in range(W):
                x = val[q0 + l]
                s = 1.0 - x * x
                q = -2.0 * x * s
                dq = -2.0 * s * (s - 2.0 * x * x)
                adj[pa + l] += (
                    adj[q0 + l] * s
                    + adj[q1 + l] * q * val[pb + l]
                    + adj[q2 + l] * q * val[p2 + l]
                    + adj[q3 + l] * (q * val[p3 + l] + dq * val[pb + l] * val[p2 + l])
                )
                adj[pb + l] += adj[q1 + l] * s + adj[q3 + l] * q * val[p2 + l]
                adj[p2 + l] += adj[q2 + l] * s + adj[q3 + l] * q * val[pb + l]
                adj[p3 + l] += adj[q3 + l] * s
        elif kind == K_HDIST:
            q0 = off[ops[i, 1]]
            q1 = off[ops[i, 2]]
            q2 = off[ops[i, 3]]
            q3 = off[ops[i, 4]]
            pa = off[ops[i, 5]]
            pb = off[ops[i, 6]]
            p2 = off[ops[i, 7]]
            for l in range(W):
                g = adj[q0 + l]
                adj[pa + l] += g * val[q1 + l]
                adj[pb + l] += g * val[q2 + l]
                adj[p2 + l] += g * val[q3 + l]
