"""Finite- and infinite-horizon LP relaxations of the N-arm problem.

Variable layout (finite horizon): ``y[t, s, a]`` is column ``(t*d + s)*2 + a``.
Row layout: for each epoch t, d mass rows (initial condition at t=0, flow
conservation from t-1 otherwise) followed by one budget row, so the budget dual
of epoch t sits at row ``t*(d+1) + d``.

Infinite horizon: ``y[s, a]`` is column ``2*s + a``; row 0 is the budget, rows
1..d are stationarity, row d+1 is total mass (one stationarity row is
redundant; the solver keeps an artificial at zero on it).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp_core import LinearProgram, LPResult, solve
from .model import RBModel, require_valid

EPS_PART = 1e-9


@dataclass(frozen=True)
class Partition:
    s_plus: tuple[int, ...]
    s_zero: tuple[int, ...]
    s_minus: tuple[int, ...]
    s_empty: tuple[int, ...]

    @classmethod
    def from_occupation(cls, y1, y0, eps: float = EPS_PART) -> "Partition":
        act = np.asarray(y1) > eps
        pas = np.asarray(y0) > eps
        idx = np.arange(len(act))
        return cls(
            tuple(idx[act & ~pas].tolist()),
            tuple(idx[act & pas].tolist()),
            tuple(idx[~act & pas].tolist()),
            tuple(idx[~act & ~pas].tolist()),
        )

    def label(self, s: int) -> str:
        for name, group in (("+", self.s_plus), ("0", self.s_zero),
                            ("-", self.s_minus), ("empty", self.s_empty)):
            if s in group:
                return name
        raise KeyError(s)

    def to_dict(self):
        return {"plus": list(self.s_plus), "zero": list(self.s_zero),
                "minus": list(self.s_minus), "empty": list(self.s_empty)}


@dataclass(frozen=True)
class FiniteLPSolution:
    y1: np.ndarray  # (T, d) active mass
    y0: np.ndarray  # (T, d) passive mass
    value: float
    gamma: np.ndarray  # (T,) budget duals
    partitions: tuple[Partition, ...]
    lp_result: LPResult
    maximize: bool = True

    @property
    def T(self):
        return self.y1.shape[0]

    @property
    def m_star(self):
        return self.y0 + self.y1

    @property
    def flow_duals(self) -> np.ndarray:
        T, d = self.y1.shape
        duals = self.lp_result.duals.reshape(T, d + 1)
        return duals[:, :d]


@dataclass(frozen=True)
class InfiniteLPSolution:
    y1: np.ndarray
    y0: np.ndarray
    value: float
    gamma: float
    partition: Partition
    lp_result: LPResult

    @property
    def m_star(self):
        return self.y0 + self.y1


def finite_lp(model: RBModel, maximize: bool = True) -> LinearProgram:
    d, T = model.d, model.horizon
    nvar = 2 * d * T
    nrow = (d + 1) * T
    A = np.zeros((nrow, nvar))
    b = np.zeros(nrow)
    c = np.zeros(nvar)

    def col(t, s, a):
        return (t * d + s) * 2 + a

    for t in range(T):
        r0, r1 = model.rewards(t)
        base = t * (d + 1)
        for s in range(d):
            c[col(t, s, 0)] = r0[s]
            c[col(t, s, 1)] = r1[s]
            A[base + s, col(t, s, 0)] = 1.0
            A[base + s, col(t, s, 1)] = 1.0
            A[base + d, col(t, s, 1)] = 1.0
        b[base + d] = model.alpha
        if t == 0:
            b[:d] = model.m0
        else:
            P0, P1 = model.kernels(t - 1)
            for sp in range(d):
                A[base: base + d, col(t - 1, sp, 0)] -= P0[sp]
                A[base: base + d, col(t - 1, sp, 1)] -= P1[sp]
    return LinearProgram(c, A, b, maximize)


def infinite_lp(model: RBModel) -> LinearProgram:
    d = model.d
    A = np.zeros((d + 2, 2 * d))
    b = np.zeros(d + 2)
    c = np.zeros(2 * d)
    P0, P1 = model.kernels()
    r0, r1 = model.rewards()
    c[0::2] = r0
    c[1::2] = r1
    A[0, 1::2] = 1.0
    b[0] = model.alpha
    for s in range(d):
        A[1 + s, 2 * s] += 1.0
        A[1 + s, 2 * s + 1] += 1.0
    A[1: d + 1, 0::2] -= P0.T
    A[1: d + 1, 1::2] -= P1.T
    A[d + 1] = 1.0
    b[d + 1] = 1.0
    return LinearProgram(c, A, b, True)


def _check(res: LPResult, what: str):
    if not res.optimal:
        raise RuntimeError(f"{what} LP returned status {res.status.value}; "
                           "this cannot happen for a valid model")


def _finite(model: RBModel, maximize: bool, method: str) -> FiniteLPSolution:
    require_valid(model)
    if not model.is_finite:
        raise ValueError("solve_finite needs a finite-horizon model")
    lp = finite_lp(model, maximize)
    res = solve(lp, method=method)
    _check(res, "finite-horizon")
    d, T = model.d, model.horizon
    y = res.x.reshape(T, d, 2)
    y0, y1 = y[:, :, 0].copy(), y[:, :, 1].copy()
    gamma = res.duals.reshape(T, d + 1)[:, d].copy()
    parts = tuple(Partition.from_occupation(y1[t], y0[t]) for t in range(T))
    return FiniteLPSolution(y1, y0, res.value, gamma, parts, res, maximize)


def solve_finite(model: RBModel, method: str = "simplex") -> FiniteLPSolution:
    """Vertex-optimal solution of the finite-horizon LP relaxation (maximization)."""
    return _finite(model, True, method)


def solve_finite_min(model: RBModel, method: str = "simplex") -> FiniteLPSolution:
    """Same LP with the objective minimized (lower normalization of the score)."""
    return _finite(model, False, method)


def solve_infinite(model: RBModel, method: str = "simplex") -> InfiniteLPSolution:
    require_valid(model)
    lp = infinite_lp(model)
    res = solve(lp, method=method)
    _check(res, "infinite-horizon")
    y0 = res.x[0::2].copy()
    y1 = res.x[1::2].copy()
    gamma = float(res.duals[0])
    return InfiniteLPSolution(y1, y0, res.value, gamma,
                              Partition.from_occupation(y1, y0), res)


@dataclass(frozen=True)
class Classification:
    zero_sizes: tuple[int, ...]
    rankable_witness: bool
    nondegenerate_witness: bool
    degenerate_witness: bool

    def verdicts(self) -> list[str]:
        out = []
        if self.rankable_witness:
            out.append("rankable-witness")
        if self.nondegenerate_witness:
            out.append("non-degenerate-witness")
        if self.degenerate_witness:
            out.append("degenerate-witness")
        return out

    def to_dict(self):
        return {"zero_sizes": list(self.zero_sizes), "verdicts": self.verdicts()}


def classify(solution: FiniteLPSolution | InfiniteLPSolution) -> Classification:
    """Witness-based verdicts from the |S0| sizes of the solution at hand.

    These describe the solution found, not every optimal solution.
    """
    if isinstance(solution, InfiniteLPSolution):
        parts = (solution.partition,)
    else:
        parts = solution.partitions
    sizes = tuple(len(p.s_zero) for p in parts)
    return Classification(
        sizes,
        all(k <= 1 for k in sizes),
        all(k >= 1 for k in sizes),
        any(k == 0 for k in sizes),
    )
