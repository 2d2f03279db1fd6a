# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels.py`` (same semantics, same
floating-point operation order)."""
from libc.math cimport floor, fabs
import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef double SNAP_TOL = 1e-9

IS_COMPILED = True


cdef void _fill(const double[:] m, double alpha, const long[:] st, const signed char[:] capk,
                long nsteps, const double[:] ystar1, double[:] y) noexcept nogil:
    cdef Py_ssize_t d = m.shape[0]
    cdef Py_ssize_t k, s
    cdef double left = alpha
    cdef double cap, add, ms, ys
    for s in range(d):
        y[s] = 0.0
    for k in range(nsteps):
        s = st[k]
        ms = m[s]
        if capk[k] == 0:
            cap = ms
        else:
            ys = ystar1[s]
            cap = ms if ms < ys else ys
        add = cap - y[s]
        if add > left:
            add = left
        if add > 0.0:
            y[s] = y[s] + add
            left -= add


cdef int _round(long n, const double[:] y1, const long[:] counts, double u,
                long[:] act) noexcept nogil:
    cdef Py_ssize_t d = counts.shape[0]
    cdef Py_ssize_t s
    cdef double p = u
    cdef double cum = 0.0
    cdef double v, r, base, hi
    cdef long c
    for s in range(d):
        v = n * y1[s]
        r = floor(v + 0.5)
        if fabs(v - r) <= SNAP_TOL:
            v = r
        c = counts[s]
        if v > c + SNAP_TOL:
            return -1
        if v > c:
            v = <double>c
        if v < 0.0:
            v = 0.0
        base = floor(v)
        hi = cum + (v - base)
        if p < hi:
            act[s] = <long>base + 1
            p += 1.0
        else:
            act[s] = <long>base
        cum = hi
    return 0


cdef void _evolve(const long[:] counts, const long[:] act, const double[:, :, :] cum,
                  const double[:] u, long[:] out) noexcept nogil:
    cdef Py_ssize_t d = counts.shape[0]
    cdef Py_ssize_t s, j, a, q
    cdef Py_ssize_t i = 0
    cdef long k
    cdef double x
    for s in range(d):
        out[s] = 0
    for s in range(d):
        for a in range(1, -1, -1):
            k = act[s] if a == 1 else counts[s] - act[s]
            for q in range(k):
                x = u[i]
                i += 1
                j = 0
                while j < d - 1 and x >= cum[a, s, j]:
                    j += 1
                out[j] += 1


def fill(m, double alpha, steps_state, steps_cap, long nsteps, ystar1, y_out):
    _fill(np.ascontiguousarray(m, dtype=np.float64),
          alpha, np.ascontiguousarray(steps_state, dtype=np.int64),
          np.ascontiguousarray(steps_cap, dtype=np.int8), nsteps,
          np.ascontiguousarray(ystar1, dtype=np.float64), y_out)


def round_counts(long n, y1, counts, double u, act_out):
    return _round(n, np.ascontiguousarray(y1, dtype=np.float64),
                  np.ascontiguousarray(counts, dtype=np.int64), u, act_out)


def evolve(counts, act, cum, u, out):
    _evolve(np.ascontiguousarray(counts, dtype=np.int64),
            np.ascontiguousarray(act, dtype=np.int64),
            np.ascontiguousarray(cum, dtype=np.float64),
            np.ascontiguousarray(u, dtype=np.float64), out)


def run_program(long n, counts0, double alpha, const long[:, :] prog_state,
                const signed char[:, :] prog_cap, const long[:] prog_len,
                const double[:, :] ystar1, const double[:, :, :, :] cum,
                const double[:, :, :] rew, const double[:] weights,
                const double[:, :] u_round, const double[:, :, :] u_trans,
                double[:] rewards_out, long[:, :, :] counts_out, long[:, :, :] act_out):
    cdef Py_ssize_t R = u_round.shape[0]
    cdef Py_ssize_t T = u_round.shape[1]
    cdef Py_ssize_t Tp = prog_state.shape[0]
    cdef Py_ssize_t Tk = cum.shape[0]
    cdef long[:] c0 = np.ascontiguousarray(counts0, dtype=np.int64)
    cdef Py_ssize_t d = c0.shape[0]
    cdef double[:] y = np.zeros(d)
    cdef double[:] m = np.zeros(d)
    cdef long[:] act = np.zeros(d, dtype=np.int64)
    cdef long[:] counts = np.zeros(d, dtype=np.int64)
    cdef long[:] nxt = np.zeros(d, dtype=np.int64)
    cdef Py_ssize_t r, t, s, tp, tk
    cdef double total, epoch
    cdef int status = 0
    with nogil:
        for r in range(R):
            for s in range(d):
                counts[s] = c0[s]
                counts_out[r, 0, s] = counts[s]
            total = 0.0
            for t in range(T):
                tp = t % Tp
                tk = t % Tk
                for s in range(d):
                    m[s] = counts[s] / <double>n
                _fill(m, alpha, prog_state[tp], prog_cap[tp], prog_len[tp], ystar1[tp], y)
                status = _round(n, y, counts, u_round[r, t], act)
                if status != 0:
                    break
                epoch = 0.0
                for s in range(d):
                    act_out[r, t, s] = act[s]
                    epoch += rew[tk, 1, s] * act[s] + rew[tk, 0, s] * (counts[s] - act[s])
                total += weights[t] * (epoch / n)
                _evolve(counts, act, cum[tk], u_trans[r, t], nxt)
                for s in range(d):
                    counts[s] = nxt[s]
                    counts_out[r, t + 1, s] = counts[s]
            if status != 0:
                break
            rewards_out[r] = total
    return status
