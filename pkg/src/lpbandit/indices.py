"""LP indices (finite and infinite horizon) and Whittle indices.

Finite horizon: backward induction on the single-arm MDP whose rewards are
penalized by the budget duals, ``R^a_s(t) - a * gamma_t``.  The index is the
Q-value gap ``Q_{s,1}(t) - Q_{s,0}(t)``.

Infinite horizon: the same gap for the average-reward Bellman equation, solved
by relative value iteration and polished by one exact policy evaluation so the
gaps are accurate to ~1e-12 rather than to the RVI stopping tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import RBModel
from .relaxation import FiniteLPSolution, InfiniteLPSolution

RVI_TOL = 1e-10
RVI_MAX_ITER = 1_000_000
APERIODICITY = 0.05
TIE_TOL = 1e-9
WHITTLE_TOL = 1e-6
GRID_SIZE = 200


class RVINonConvergence(RuntimeError):
    """Relative value iteration hit its cap (typically a multichain model)."""


@dataclass(frozen=True)
class IndexTable:
    """``finite[t, s]`` for finite horizon, or a length-d vector otherwise."""

    finite: np.ndarray
    q: np.ndarray | None = None  # (T, d, 2) or (d, 2)
    whittle: np.ndarray | None = None
    indexable: bool | None = None
    notes: dict = field(default_factory=dict)

    @property
    def lp(self) -> np.ndarray:
        return self.finite


def backward_induction(model: RBModel, gamma) -> np.ndarray:
    """Q[t, s, a] for rewards ``R^a_s(t) - a * gamma[t]`` and zero terminal value."""
    T, d = model.horizon, model.d
    Q = np.zeros((T, d, 2))
    V = np.zeros(d)
    for t in range(T - 1, -1, -1):
        P0, P1 = model.kernels(t)
        r0, r1 = model.rewards(t)
        Q[t, :, 0] = r0 + P0 @ V
        Q[t, :, 1] = r1 - gamma[t] + P1 @ V
        V = Q[t].max(axis=1)
    return Q


def finite_lp_indices(model: RBModel, solution: FiniteLPSolution) -> IndexTable:
    Q = backward_induction(model, solution.gamma)
    return IndexTable(Q[:, :, 1] - Q[:, :, 0], Q)


def dp_residual(model: RBModel, gamma, Q) -> float:
    """Max violation of the finite-horizon DP recursion by a Q table."""
    T = model.horizon
    worst = 0.0
    for t in range(T):
        P0, P1 = model.kernels(t)
        r0, r1 = model.rewards(t)
        V = Q[t + 1].max(axis=1) if t + 1 < T else np.zeros(model.d)
        worst = max(worst,
                    np.abs(Q[t, :, 0] - (r0 + P0 @ V)).max(),
                    np.abs(Q[t, :, 1] - (r1 - gamma[t] + P1 @ V)).max())
    return float(worst)


def _evaluate(P0, P1, r0, r1, policy):
    """Exact gain and bias of a stationary deterministic policy (bias[0] = 0)."""
    d = len(r0)
    P = np.where(policy[:, None] == 1, P1, P0)
    r = np.where(policy == 1, r1, r0)
    # unknowns: g, h_1..h_{d-1}  (h_0 = 0)
    M = np.zeros((d, d))
    M[:, 0] = 1.0
    M[:, 1:] = np.eye(d)[:, 1:] - P[:, 1:]
    sol = np.linalg.solve(M, r)
    h = np.concatenate([[0.0], sol[1:]])
    return sol[0], h


def average_reward_q(model: RBModel, gamma: float, tol: float = RVI_TOL,
                     max_iter: int = RVI_MAX_ITER, tau: float = APERIODICITY):
    """Solve ``g + h_s = max_a {R^a_s - a*gamma + P^a_s h}``.

    Returns ``(g, Q)`` with ``Q[s, a]`` the bracketed terms.  RVI runs on the
    aperiodic transform ``tau*I + (1-tau)*P``, which has the same optimal
    policies and the same Q-gaps; the result is then polished by exact policy
    evaluation on the original kernels.
    """
    P0, P1 = model.kernels()
    r0, r1 = model.rewards()
    r1g = r1 - gamma
    d = model.d
    eye = np.eye(d)
    A0 = tau * eye + (1 - tau) * P0
    A1 = tau * eye + (1 - tau) * P1
    h = np.zeros(d)
    for _ in range(max_iter):
        w = np.maximum(r0 + A0 @ h, r1g + A1 @ h)
        diff = w - h
        h = w - w[0]
        if diff.max() - diff.min() <= tol:
            break
    else:
        raise RVINonConvergence(f"relative value iteration did not converge in {max_iter} steps")
    h = (1 - tau) * h
    for _ in range(2 * d + 2):
        Q = np.stack([r0 + P0 @ h, r1g + P1 @ h], axis=1)
        policy = (Q[:, 1] >= Q[:, 0]).astype(int)
        try:
            g, h_new = _evaluate(P0, P1, r0, r1g, policy)
        except np.linalg.LinAlgError:
            break  # multichain policy: keep the RVI solution
        Qn = np.stack([r0 + P0 @ h_new, r1g + P1 @ h_new], axis=1)
        # accept the polish only if it still satisfies the optimality equation
        if np.abs(g + h_new - Qn.max(axis=1)).max() > 1e-9:
            break
        h = h_new
        if np.array_equal((Qn[:, 1] >= Qn[:, 0]).astype(int), policy):
            return float(g), Qn
    Q = np.stack([r0 + P0 @ h, r1g + P1 @ h], axis=1)
    g = float(np.mean(Q.max(axis=1) - h))
    return g, Q


def infinite_lp_indices(model: RBModel, solution: InfiniteLPSolution, **rvi) -> IndexTable:
    g, Q = average_reward_q(model, solution.gamma, **rvi)
    return IndexTable(Q[:, 1] - Q[:, 0], Q, notes={"gain": g})


def active_set(model: RBModel, gamma: float, tie_tol: float = TIE_TOL, **rvi) -> np.ndarray:
    """Boolean mask of S(gamma); exact ties count as active."""
    _, Q = average_reward_q(model, gamma, **rvi)
    return Q[:, 1] - Q[:, 0] >= -tie_tol


def whittle_bracket(model: RBModel) -> tuple[float, float]:
    r0, r1 = model.rewards()
    gap = r1 - r0
    spread = max(r0.max(), r1.max()) - min(r0.min(), r1.min())
    return float(gap.min() - 2 * spread), float(gap.max() + 2 * spread)


def whittle_indices(model: RBModel, tol: float = WHITTLE_TOL, grid_size: int = GRID_SIZE,
                    **rvi) -> IndexTable:
    """Whittle indices by bisection on membership of each state in S(gamma).

    Indexability is tested numerically: S(gamma) must shrink along an
    increasing grid of penalties (200 points plus every bisection endpoint).
    When it does not, indices are still reported as the boundary points found
    and ``indexable`` is False.
    """
    if model.is_finite:
        raise ValueError("Whittle indices are defined for infinite-horizon models")
    d = model.d
    lo, hi = whittle_bracket(model)
    width = hi - lo
    for _ in range(60):
        if active_set(model, lo, **rvi).all() and not active_set(model, hi, **rvi).any():
            break
        lo -= width
        hi += width
        width *= 2
    probes: dict[float, np.ndarray] = {}

    def member(g):
        if g not in probes:
            probes[g] = active_set(model, g, **rvi)
        return probes[g]

    idx = np.empty(d)
    for s in range(d):
        a, b = lo, hi  # s in S(a), s not in S(b)
        while b - a > tol / 2:
            mid = 0.5 * (a + b)
            if member(mid)[s]:
                a = mid
            else:
                b = mid
        idx[s] = 0.5 * (a + b)
    for g in np.linspace(lo, hi, grid_size):
        member(float(g))
    grid = sorted(probes)
    sets = np.array([probes[g] for g in grid])
    # monotone shrinkage: once a state leaves S(gamma) it never returns
    indexable = bool(np.all(sets[1:] <= sets[:-1]))
    return IndexTable(idx, whittle=idx, indexable=indexable,
                      notes={"bracket": (lo, hi), "probes": len(grid)})
