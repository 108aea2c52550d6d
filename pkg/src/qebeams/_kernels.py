"""Compiled inner loops for beam superpositions.

Every kernel sums beams in index order for each output point, so results are
identical for any thread count. A beam is skipped at a point when its
magnitude is below ``exp(LOG_CUTOFF)`` times its peak, i.e. when
``r^2 <= exp(2 * LOG_CUTOFF / N)`` with ``r = |<x,u> + i<x,v>|``.
"""
import math

import numba as nb
import numpy as np

# try OpenMP before TBB (older TBB builds only warn and fall back)
nb.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

LOG_CUTOFF = -46.0  # about 1e-20 of the beam peak


def cutoff_r2(N: int) -> float:
    return math.exp(2.0 * LOG_CUTOFF / N)


@nb.njit(inline="always", cache=True)
def _cpow(a, b, n):
    # (a + ib)^n by repeated squaring
    rr = 1.0
    ri = 0.0
    br = a
    bi = b
    while n:
        if n & 1:
            t = rr * br - ri * bi
            ri = rr * bi + ri * br
            rr = t
        n >>= 1
        if n:
            t = br * br - bi * bi
            bi = 2.0 * br * bi
            br = t
    return rr, ri


@nb.njit(inline="always", cache=True)
def _beam_sum(x0, x1, x2, U, V, amp, N, lim):
    re = 0.0
    im = 0.0
    for k in range(U.shape[0]):
        a = x0 * U[k, 0] + x1 * U[k, 1] + x2 * U[k, 2]
        b = x0 * V[k, 0] + x1 * V[k, 1] + x2 * V[k, 2]
        if a * a + b * b <= lim:
            continue
        pr, pi = _cpow(a, b, N)
        re += amp * pr
        im += amp * pi
    return re, im


@nb.njit(parallel=True, cache=True)
def superpose_points(X, U, V, amp, N, lim):
    n = X.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for i in nb.prange(n):
        re, im = _beam_sum(X[i, 0], X[i, 1], X[i, 2], U, V, amp, N, lim)
        out[i] = complex(re, im)
    return out


@nb.njit(parallel=True, cache=True)
def superpose_grid_abs(sin_phi, cos_phi, cos_th, sin_th, U, V, amp, N, lim):
    out = np.empty((sin_phi.shape[0], cos_th.shape[0]))
    for i in nb.prange(sin_phi.shape[0]):
        sp = sin_phi[i]
        cp = cos_phi[i]
        for j in range(cos_th.shape[0]):
            re, im = _beam_sum(sp * cos_th[j], sp * sin_th[j], cp, U, V, amp, N, lim)
            out[i, j] = math.sqrt(re * re + im * im)
    return out


@nb.njit(parallel=True, cache=True)
def project_onto_beams(X, w, f, U, V, amp, N, lim):
    """``sum_i w_i f_i conj(Q_q(x_i))`` for every beam ``q`` given by rows of ``U, V``."""
    nq = U.shape[0]
    out = np.empty(nq, dtype=np.complex128)
    for q in nb.prange(nq):
        u0, u1, u2 = U[q, 0], U[q, 1], U[q, 2]
        v0, v1, v2 = V[q, 0], V[q, 1], V[q, 2]
        re = 0.0
        im = 0.0
        for i in range(X.shape[0]):
            a = X[i, 0] * u0 + X[i, 1] * u1 + X[i, 2] * u2
            b = X[i, 0] * v0 + X[i, 1] * v1 + X[i, 2] * v2
            if a * a + b * b <= lim:
                continue
            pr, pi = _cpow(a, b, N)
            fr = f[i].real * w[i] * amp
            fi = f[i].imag * w[i] * amp
            # f * conj(p)
            re += fr * pr + fi * pi
            im += fi * pr - fr * pi
        out[q] = complex(re, im)
    return out


@nb.njit(parallel=True, cache=True)
def band_counts(C, P, s):
    """Number of rows of ``P`` with ``|<c, p>| <= s`` for each candidate pole ``c`` in ``C``."""
    out = np.zeros(C.shape[0], dtype=np.int64)
    for i in nb.prange(C.shape[0]):
        c0, c1, c2 = C[i, 0], C[i, 1], C[i, 2]
        k = 0
        for j in range(P.shape[0]):
            if abs(c0 * P[j, 0] + c1 * P[j, 1] + c2 * P[j, 2]) <= s:
                k += 1
        out[i] = k
    return out


@nb.njit(parallel=True, cache=True)
def circle_family_sweep(P, U, V, s, h):
    """Best band count over the one-parameter family of poles attached to each point.

    For point ``j`` the family is ``c(psi) = h p_j + sqrt(1 - h^2)(cos psi U_j + sin psi V_j)``:
    ``h = 0`` gives every great circle through ``p_j``, ``h = s`` every circle
    whose band has ``p_j`` on its edge. Returns per-point best counts and the
    angle at the middle of the best arc.
    """
    m = P.shape[0]
    best = np.zeros(m, dtype=np.int64)
    best_psi = np.zeros(m)
    g = math.sqrt(max(0.0, 1.0 - h * h))
    two_pi = 2.0 * math.pi
    for j in nb.prange(m):
        starts = np.empty(4 * m)
        ends = np.empty(4 * m)
        ni = 0
        always = 1  # p_j itself
        for q in range(m):
            if q == j:
                continue
            d = P[j, 0] * P[q, 0] + P[j, 1] * P[q, 1] + P[j, 2] * P[q, 2]
            x = U[j, 0] * P[q, 0] + U[j, 1] * P[q, 1] + U[j, 2] * P[q, 2]
            y = V[j, 0] * P[q, 0] + V[j, 1] * P[q, 1] + V[j, 2] * P[q, 2]
            A = h * d
            B = g * math.sqrt(x * x + y * y)
            if B < 1e-14:
                if abs(A) <= s:
                    always += 1
                continue
            lo = (-s - A) / B
            hi = (s - A) / B
            if hi < -1.0 or lo > 1.0:
                continue
            if lo <= -1.0 and hi >= 1.0:
                always += 1
                continue
            psi_q = math.atan2(y, x)
            if hi >= 1.0:
                w = math.acos(lo)
                a0 = psi_q - w
                a1 = psi_q + w
                b0 = 1.0
                b1 = 0.0  # empty second interval
            elif lo <= -1.0:
                w = math.acos(hi)
                a0 = psi_q + w
                a1 = psi_q + two_pi - w
                b0 = 1.0
                b1 = 0.0
            else:
                w1 = math.acos(hi)
                w2 = math.acos(lo)
                a0 = psi_q + w1
                a1 = psi_q + w2
                b0 = psi_q - w2
                b1 = psi_q - w1
            for r in range(2):
                if r == 0:
                    lo_a, hi_a = a0, a1
                else:
                    lo_a, hi_a = b0, b1
                    if hi_a < lo_a:
                        continue
                span = hi_a - lo_a
                lo_a = lo_a - two_pi * math.floor(lo_a / two_pi)
                hi_a = lo_a + span
                if hi_a >= two_pi:
                    # wraps past 2pi: split in two
                    starts[ni] = lo_a
                    ends[ni] = two_pi
                    ni += 1
                    starts[ni] = 0.0
                    ends[ni] = hi_a - two_pi
                    ni += 1
                else:
                    starts[ni] = lo_a
                    ends[ni] = hi_a
                    ni += 1
        # merge sorted starts and ends; starts first at equal angles (closed intervals)
        st = np.sort(starts[:ni])
        en = np.sort(ends[:ni])
        depth = 0
        top = 0
        psi_best = 0.0
        a = 0
        b = 0
        while a < ni:
            if st[a] <= en[b]:
                depth += 1
                if depth > top:
                    top = depth
                    nxt = st[a + 1] if a + 1 < ni and st[a + 1] < en[b] else en[b]
                    psi_best = 0.5 * (st[a] + nxt)
                a += 1
            else:
                depth -= 1
                b += 1
        best[j] = always + top
        best_psi[j] = psi_best
    return best, best_psi
