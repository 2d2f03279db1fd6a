"""Decision rules (maps from state distributions to occupation vectors) and
randomized rounding.

Priority and water-filling rules are all "step programs": per epoch, a list
of ``(state, cap_kind)`` steps that pour the budget into states in order (see
``_pykernels``).  That lets the simulator run them inside the compiled kernel.

Water-filling at epoch t with partition (S+, S0, S-, S_empty):

1. S+ in tie-break order, each up to its mass;
2. S0 in *reversed* enumeration order, each up to min(mass, y*_{s,1}(t));
3. S0 in forward order, then S-, then S_empty, each up to its mass.

On m = m*(t) the budget is spent exactly after pass 2, which gives y*(t).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .indices import IndexTable, finite_lp_indices
from .model import RBModel
from .relaxation import FiniteLPSolution, InfiniteLPSolution, Partition, solve_finite

CAP_MASS = 0
CAP_TARGET = 1


@dataclass(frozen=True)
class OccupationVector:
    y1: np.ndarray
    y0: np.ndarray

    @property
    def total(self) -> float:
        return float(self.y1.sum() + self.y0.sum())

    def stacked(self) -> np.ndarray:
        """(d, 2) array indexed [s, a]."""
        return np.stack([self.y0, self.y1], axis=1)


@dataclass(frozen=True)
class RoundingOutcome:
    activations: np.ndarray
    budget_used: int


def _occupation(m, y1) -> OccupationVector:
    m = np.asarray(m, dtype=float)
    return OccupationVector(y1, np.maximum(m - y1, 0.0))


class DecisionRule:
    """Base class: ``rule(t, m)`` returns the occupation vector at epoch t."""

    kind = "abstract"
    alpha: float

    def __call__(self, t: int, m) -> OccupationVector:
        raise NotImplementedError

    def reset(self) -> None:
        """Drop any per-trajectory state (only LP-update keeps some)."""


class ProgramRule(DecisionRule):
    """A rule given by per-epoch step programs.

    ``prog_state[t, k]`` / ``prog_cap[t, k]`` for ``k < prog_len[t]``; rows are
    reused cyclically, so a single row gives a stationary rule.
    """

    def __init__(self, kind, alpha, steps, ystar1=None, meta=None):
        Tp = len(steps)
        L = max(len(s) for s in steps)
        self.kind = kind
        self.alpha = float(alpha)
        d = 1 + max(int(st) for row in steps for st, _ in row)
        if ystar1 is not None:
            d = max(d, np.asarray(ystar1).shape[-1])
        self.prog_state = np.zeros((Tp, L), dtype=np.int64)
        self.prog_cap = np.zeros((Tp, L), dtype=np.int8)
        self.prog_len = np.zeros(Tp, dtype=np.int64)
        for t, row in enumerate(steps):
            self.prog_len[t] = len(row)
            for k, (s, cap) in enumerate(row):
                self.prog_state[t, k] = s
                self.prog_cap[t, k] = cap
        if ystar1 is None:
            ystar1 = np.zeros((Tp, d))
        self.ystar1 = np.ascontiguousarray(np.atleast_2d(ystar1), dtype=float)
        self.meta = meta or {}

    @property
    def stationary(self) -> bool:
        return len(self.prog_len) == 1

    def steps(self, t: int) -> list[tuple[int, int]]:
        tp = t % len(self.prog_len)
        n = self.prog_len[tp]
        return list(zip(self.prog_state[tp, :n].tolist(), self.prog_cap[tp, :n].tolist()))

    def __call__(self, t, m):
        tp = t % len(self.prog_len)
        m = np.ascontiguousarray(m, dtype=float)
        y1 = np.zeros(len(m))
        kernels.fill(m, self.alpha, self.prog_state[tp], self.prog_cap[tp],
                     int(self.prog_len[tp]), self.ystar1[tp], y1)
        return _occupation(m, y1)


# -- priority ------------------------------------------------------------

def priority_rule(sigma, alpha: float, m) -> OccupationVector:
    """Activate states in the order ``sigma`` until the budget is spent."""
    m = np.asarray(m, dtype=float)
    y1 = np.zeros(len(m))
    left = float(alpha)
    for s in sigma:
        take = min(max(left, 0.0), m[s])
        y1[s] = take
        left -= take
    return _occupation(m, y1)


def priority_policy(sigma, alpha: float, horizon: int | None = None) -> ProgramRule:
    """Static (or, with a list of orders, time-dependent) priority policy."""
    orders = [sigma] if np.ndim(sigma[0]) == 0 else list(sigma)
    steps = [[(int(s), CAP_MASS) for s in order] for order in orders]
    return ProgramRule("priority", alpha, steps, meta={"orders": [list(o) for o in orders]})


# -- water-filling ---------------------------------------------------------

def _by_score(states, score):
    """States sorted by descending score, ties by state id."""
    return sorted(states, key=lambda s: (-score[s], s))


def zero_enumeration(partition: Partition, index) -> list[int]:
    """S0 order used by water-filling: ascending |index|, then state id."""
    return sorted(partition.s_zero, key=lambda s: (abs(index[s]), s))


def water_filling_steps(partition: Partition, score, zero_order=None) -> list[tuple[int, int]]:
    zero_order = list(partition.s_zero) if zero_order is None else list(zero_order)
    steps = [(s, CAP_MASS) for s in _by_score(partition.s_plus, score)]
    steps += [(s, CAP_TARGET) for s in reversed(zero_order)]
    steps += [(s, CAP_MASS) for s in zero_order]
    steps += [(s, CAP_MASS) for s in _by_score(partition.s_minus, score)]
    steps += [(s, CAP_MASS) for s in _by_score(partition.s_empty, score)]
    return steps


def water_filling_rule(partition: Partition, ystar1, m, alpha: float, score=None,
                       zero_order=None) -> OccupationVector:
    """One epoch of water-filling (see module docstring)."""
    m = np.ascontiguousarray(m, dtype=float)
    d = len(m)
    score = np.zeros(d) if score is None else np.asarray(score)
    steps = water_filling_steps(partition, score, zero_order)
    st = np.array([s for s, _ in steps], dtype=np.int64)
    cp = np.array([c for _, c in steps], dtype=np.int8)
    y1 = np.zeros(d)
    kernels.fill(m, alpha, st, cp, len(steps), np.ascontiguousarray(ystar1, dtype=float), y1)
    return _occupation(m, y1)


def water_filling_policy(solution: FiniteLPSolution, alpha: float, scores,
                         zero_scores=None, kind="water-filling") -> ProgramRule:
    """Water-filling with per-epoch tie-break ``scores[t, s]`` (higher first).

    ``zero_scores[t, s]`` defines the S0 enumeration (ascending |score|, then
    id); it defaults to ``scores``.
    """
    scores = np.asarray(scores, dtype=float)
    zero_scores = scores if zero_scores is None else np.asarray(zero_scores, dtype=float)
    steps = []
    for t, part in enumerate(solution.partitions):
        zo = zero_enumeration(part, zero_scores[t])
        steps.append(water_filling_steps(part, scores[t], zo))
    return ProgramRule(kind, alpha, steps, ystar1=solution.y1)


def lp_index_policy(model: RBModel, solution: FiniteLPSolution,
                    index_table: IndexTable | None = None) -> ProgramRule:
    """Water-filling with the LP indices I_s(t) as tie-break scores."""
    if index_table is None:
        index_table = finite_lp_indices(model, solution)
    return water_filling_policy(solution, model.alpha, index_table.finite, kind="lp-index")


def random_tie_policy(model: RBModel, solution: FiniteLPSolution, rng,
                      index_table: IndexTable | None = None) -> ProgramRule:
    """Water-filling whose S+, S- and S_empty ties follow one random state order.

    The order is drawn once and reused for every epoch.  S0 is enumerated as in
    the LP-index policy, so LP-compatibility is unaffected.
    """
    d = model.d
    perm = np.asarray(rng.permutation(d))
    score = np.empty(d)
    score[perm] = -np.arange(d, dtype=float)  # earlier in perm = higher score
    scores = np.tile(score, (solution.T, 1))
    if index_table is None:
        index_table = finite_lp_indices(model, solution)
    rule = water_filling_policy(solution, model.alpha, scores, index_table.finite,
                                kind="random-tie")
    rule.meta["order"] = perm.tolist()
    return rule


def lp_priority_order(solution: InfiniteLPSolution, index) -> list[int]:
    """S+ by descending index, then S0, then S- and S_empty by descending index."""
    part = solution.partition
    return (_by_score(part.s_plus, index) + _by_score(part.s_zero, index)
            + _by_score(part.s_minus, index) + _by_score(part.s_empty, index))


def lp_priority_policy_infinite(model: RBModel, solution: InfiniteLPSolution,
                                index_table: IndexTable) -> ProgramRule:
    order = lp_priority_order(solution, index_table.finite)
    rule = priority_policy(order, model.alpha)
    rule.kind = "lp-priority-infinite"
    return rule


def whittle_policy(model: RBModel, index_table: IndexTable) -> ProgramRule:
    """Stationary priority by descending Whittle index."""
    w = index_table.whittle if index_table.whittle is not None else index_table.finite
    rule = priority_policy(_by_score(range(model.d), w), model.alpha)
    rule.kind = "whittle"
    return rule


# -- LP update --------------------------------------------------------------

@dataclass
class LPUpdateRule(DecisionRule):
    """Re-solve the LP from the observed measure every ``period`` epochs.

    Between re-solves, water-filling from the most recent solution (with its
    LP indices as tie-breaks) is applied at the relative epoch.
    """

    model: RBModel
    period: int = 1
    method: str = "simplex"
    kind: str = "lp-update"
    _cache: dict = field(default_factory=dict, repr=False)
    _last: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("update period must be >= 1")
        self.alpha = self.model.alpha

    def reset(self):
        self._last = None

    def solve_at(self, t: int, m):
        m = np.asarray(m, dtype=float)
        key = (t, m.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            sub = self.model.sliced(t, m)
            sol = solve_finite(sub, method=self.method)
            hit = (sol, lp_index_policy(sub, sol))
            if len(self._cache) > 200_000:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def __call__(self, t, m):
        m = np.asarray(m, dtype=float)
        if self._last is None or (t - self._last[0]) % self.period == 0 or t < self._last[0]:
            sol, rule = self.solve_at(t, m)
            self._last = (t, sol, rule)
            y1 = np.clip(sol.y1[0], 0.0, m)
            return _occupation(m, y1)
        t0, _, rule = self._last
        return rule(t - t0, m)


def lp_update_policy(model: RBModel, period: int = 1, method: str = "simplex") -> LPUpdateRule:
    return LPUpdateRule(model, period, method)


# -- rounding ---------------------------------------------------------------

def randomized_round(y1, counts, rng) -> RoundingOutcome:
    """Integer activations with E[activations_s] = N*y1_s (systematic sampling)."""
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    n = int(counts.sum())
    act = np.zeros(len(counts), dtype=np.int64)
    u = float(rng.random())
    if kernels.round_counts(n, np.ascontiguousarray(y1, dtype=float), counts, u, act) != 0:
        raise ValueError("rounding precondition violated: N*y1 exceeds the state counts")
    return RoundingOutcome(act, int(act.sum()))


def check_admissible(y: OccupationVector, m, alpha: float, tol: float = 1e-10) -> bool:
    m = np.asarray(m, dtype=float)
    return bool(y.y1.min() >= -tol and y.y0.min() >= -tol
                and abs(y.y1.sum() - alpha) <= tol
                and np.abs(y.y0 + y.y1 - m).max() <= tol)
