"""Pure-Python reference for the compiled kernels in ``_ckernels.pyx``.

Both implementations perform the same floating-point operations in the same
order and consume uniforms identically, so results agree bit for bit.

Step programs
    A decision rule of the priority / water-filling family is encoded per epoch
    as a list of steps ``(state, cap_kind)``.  Each step pours budget into
    ``state`` up to its cap: the state's mass when ``cap_kind == 0`` or
    ``min(mass, ystar1[state])`` when ``cap_kind == 1``.
"""
from __future__ import annotations

import math

import numpy as np

SNAP_TOL = 1e-9

IS_COMPILED = False


def fill(m, alpha, steps_state, steps_cap, nsteps, ystar1, y_out):
    """Apply a step program to the measure ``m``; active mass goes to ``y_out``."""
    d = len(m)
    for s in range(d):
        y_out[s] = 0.0
    left = float(alpha)
    for k in range(int(nsteps)):
        s = int(steps_state[k])
        ms = float(m[s])
        if steps_cap[k] == 0:
            cap = ms
        else:
            ys = float(ystar1[s])
            cap = ms if ms < ys else ys
        add = cap - float(y_out[s])
        if add > left:
            add = left
        if add > 0.0:
            y_out[s] = float(y_out[s]) + add
            left -= add


def round_counts(n, y1, counts, u, act_out):
    """Systematic-sampling rounding of ``n * y1``; returns 0, or -1 if a state
    would need more activations than it holds."""
    d = len(counts)
    p = float(u)
    cum = 0.0
    for s in range(d):
        v = n * float(y1[s])
        r = math.floor(v + 0.5)
        if abs(v - r) <= SNAP_TOL:
            v = r
        c = int(counts[s])
        if v > c + SNAP_TOL:
            return -1
        if v > c:
            v = float(c)
        if v < 0.0:
            v = 0.0
        base = math.floor(v)
        hi = cum + (v - base)
        if p < hi:
            act_out[s] = int(base) + 1
            p += 1.0
        else:
            act_out[s] = int(base)
        cum = hi
    return 0


def evolve(counts, act, cum, u, out):
    """Move arms one epoch.  ``cum[a, s]`` is the cumulative row of P^a at s
    (last entry exactly 1).  Arms are visited state by state, active group
    first, each consuming one uniform."""
    d = len(counts)
    out[:] = 0
    i = 0
    for s in range(d):
        for a, k in ((1, int(act[s])), (0, int(counts[s]) - int(act[s]))):
            if k == 0:
                continue
            dest = np.searchsorted(cum[a, s], u[i:i + k], side="right")
            np.minimum(dest, d - 1, out=dest)
            out += np.bincount(dest, minlength=d)
            i += k


def _reward(n, counts, act, rew_t):
    total = 0.0
    for s in range(len(counts)):
        total += rew_t[1, s] * act[s] + rew_t[0, s] * (counts[s] - act[s])
    return total / n


def run_program(n, counts0, alpha, prog_state, prog_cap, prog_len, ystar1,
                cum, rew, weights, u_round, u_trans, rewards_out, counts_out, act_out):
    """Simulate R replications of a step-program rule over T epochs.

    Per-epoch tables (program, ystar1, cum, rew) have Tp rows and epoch t
    reads row ``t % Tp``.  Returns 0, or -1 on a rounding precondition failure.
    """
    R, T = u_round.shape
    d = len(counts0)
    Tp = prog_state.shape[0]
    Tk = cum.shape[0]
    y = np.zeros(d)
    m = np.zeros(d)
    act = np.zeros(d, dtype=np.int64)
    nxt = np.zeros(d, dtype=np.int64)
    for r in range(R):
        counts = np.array(counts0, dtype=np.int64)
        counts_out[r, 0] = counts
        total = 0.0
        for t in range(T):
            tp = t % Tp
            tk = t % Tk
            for s in range(d):
                m[s] = counts[s] / n
            fill(m, alpha, prog_state[tp], prog_cap[tp], prog_len[tp], ystar1[tp], y)
            if round_counts(n, y, counts, u_round[r, t], act) != 0:
                return -1
            act_out[r, t] = act
            total += weights[t] * _reward(n, counts.tolist(), act.tolist(), rew[tk])
            evolve(counts, act, cum[tk], u_trans[r, t], nxt)
            counts[:] = nxt
            counts_out[r, t + 1] = counts
        rewards_out[r] = total
    return 0
