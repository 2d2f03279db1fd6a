"""Equality-form linear programs and a self-contained revised simplex solver.

    optimize  c @ x   s.t.  A @ x == b,  x >= 0

The solver is a two-phase revised simplex on an explicit basis inverse
(product-form updates, periodic refactorization).  Pricing is partial
(block-wise Dantzig); after a run of degenerate pivots it switches to Bland's
rule, which cannot cycle, and switches back after the next improving pivot.
Returned solutions are always basic, which the relaxation code relies on: a
vertex of the occupation polytope randomizes in few states.

``solve(lp, method="highs")`` delegates to scipy as an independent cross-check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
COST_TOL = 1e-9


class LPNumericalError(RuntimeError):
    """Raised when no acceptable pivot exists or the iteration cap is hit."""


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    maximize: bool = True

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if A.shape != (b.size, c.size):
            raise ValueError(f"A has shape {A.shape}, expected {(b.size, c.size)}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self):
        return self.A.shape


@dataclass(frozen=True)
class LPResult:
    status: Status
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    value: float | None = None
    basic: bool = False
    basis: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Simplex:
    def __init__(self, A, b, refactor_every=50, block=None, bland_after=30):
        self.A = A
        self.b = b
        self.m, self.n = A.shape
        self.refactor_every = refactor_every
        self.block = block or max(32, self.n // 8)
        self.bland_after = bland_after
        self.iterations = 0

    # basis bookkeeping ------------------------------------------------
    def column(self, j):
        if j < self.n:
            return self.A[:, j]
        e = np.zeros(self.m)
        e[j - self.n] = 1.0
        return e

    def basis_matrix(self):
        B = np.zeros((self.m, self.m))
        for i, j in enumerate(self.basis):
            B[:, i] = self.column(j)
        return B

    def refactor(self):
        try:
            self.Binv = np.linalg.inv(self.basis_matrix())
        except np.linalg.LinAlgError as exc:
            raise LPNumericalError("singular basis") from exc
        self.xB = self.Binv @ self.b
        self.since_refactor = 0

    def pivot(self, r, j, u):
        piv = u[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        theta = self.xB[r] / piv
        self.xB -= theta * u
        self.xB[r] = theta
        self.is_basic[self.basis[r]] = False
        self.basis[r] = j
        self.is_basic[j] = True
        self.since_refactor += 1
        if self.since_refactor >= self.refactor_every:
            self.refactor()

    # one phase ----------------------------------------------------------
    def run(self, cost, allowed):
        """Minimize ``cost`` over columns flagged in ``allowed`` (len n + m)."""
        cost_struct = cost[: self.n]
        cost_art = cost[self.n:]
        max_iter = 50 * (self.m + self.n) + 1000
        degenerate_run = 0
        start = 0
        while True:
            if self.iterations > max_iter:
                raise LPNumericalError("iteration cap reached")
            cB = cost[self.basis]
            lam = cB @ self.Binv
            d = np.empty(self.n + self.m)
            d[: self.n] = cost_struct - lam @ self.A
            d[self.n:] = cost_art - lam
            cand = allowed & ~self.is_basic & (d < -COST_TOL)
            if not cand.any():
                return "optimal"
            if degenerate_run >= self.bland_after:
                j = int(np.flatnonzero(cand)[0])
            else:
                j = self._partial_price(d, cand, start)
                start = (j // self.block + 1) * self.block
            u = self.Binv @ self.column(j)
            r = self._ratio_test(u, bland=degenerate_run >= self.bland_after)
            if r is None:
                return "unbounded"
            degenerate = self.xB[r] <= FEAS_TOL
            self.pivot(r, j, u)
            self.iterations += 1
            degenerate_run = degenerate_run + 1 if degenerate else 0

    def _partial_price(self, d, cand, start):
        total = self.n + self.m
        nblocks = -(-total // self.block)
        for k in range(nblocks):
            lo = ((start // self.block + k) % nblocks) * self.block
            hi = min(lo + self.block, total)
            sub = cand[lo:hi]
            if sub.any():
                dd = np.where(sub, d[lo:hi], np.inf)
                return lo + int(np.argmin(dd))
        raise AssertionError("no candidate column")

    def _ratio_test(self, u, bland):
        pos = u > PIVOT_TOL
        if not pos.any():
            return None
        idx = np.flatnonzero(pos)
        xb = np.maximum(self.xB[idx], 0.0)
        ratios = xb / u[idx]
        if bland:
            tmin = ratios.min()
            ties = idx[ratios <= tmin + 1e-14]
            return int(ties[np.argmin(self.basis[ties])])
        # Harris two-pass: widen by the feasibility tolerance, then take the
        # largest pivot element among the near-minimal ratios.
        bound = ((xb + FEAS_TOL) / u[idx]).min()
        ok = ratios <= bound
        sel = idx[ok]
        return int(sel[np.argmax(u[sel])])

    def drive_out_artificials(self):
        """Pivot zero-level artificials out of the basis; rows where that is
        impossible are linearly dependent and keep their artificial at zero."""
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            row = self.Binv[r] @ self.A
            row[self.is_basic[: self.n]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-7:
                u = self.Binv @ self.A[:, j]
                self.pivot(r, j, u)


def _solve_simplex(lp: LinearProgram, **options) -> LPResult:
    A = lp.A.copy()
    b = lp.b.copy()
    m, n = A.shape
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    cost = -lp.c if lp.maximize else lp.c.copy()

    sx = _Simplex(A, b, **options)
    sx.basis = np.arange(n, n + m)
    sx.is_basic = np.zeros(n + m, dtype=bool)
    sx.is_basic[n:] = True
    sx.refactor()

    allowed = np.ones(n + m, dtype=bool)
    phase1 = np.concatenate([np.zeros(n), np.ones(m)])
    sx.run(phase1, allowed)
    sx.refactor()
    infeas = np.maximum(sx.xB[sx.basis >= n], 0.0).sum()
    if infeas > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)) * 10:
        return LPResult(Status.INFEASIBLE, iterations=sx.iterations)
    sx.drive_out_artificials()
    sx.refactor()

    allowed[n:] = False
    full_cost = np.concatenate([cost, np.zeros(m)])
    status = sx.run(full_cost, allowed)
    if status == "unbounded":
        return LPResult(Status.UNBOUNDED, iterations=sx.iterations)
    sx.refactor()

    x = np.zeros(n)
    xb = sx.xB.copy()
    xb[np.abs(xb) < 1e-13] = 0.0
    if xb.min(initial=0.0) < -10 * FEAS_TOL:
        raise LPNumericalError(f"basic solution infeasible by {-xb.min():.3g}")
    xb = np.maximum(xb, 0.0)
    struct = sx.basis < n
    x[sx.basis[struct]] = xb[struct]
    lam = full_cost[sx.basis] @ sx.Binv
    if lp.maximize:
        lam = -lam
    lam[flip] *= -1.0
    value = float(lp.c @ x)
    return LPResult(Status.OPTIMAL, x, lam, value, True, sx.basis.copy(), sx.iterations)


def _solve_highs(lp: LinearProgram) -> LPResult:
    from scipy.optimize import linprog

    sign = -1.0 if lp.maximize else 1.0
    res = linprog(sign * lp.c, A_eq=lp.A, b_eq=lp.b, bounds=(0, None), method="highs-ds")
    if res.status == 2:
        return LPResult(Status.INFEASIBLE)
    if res.status == 3:
        return LPResult(Status.UNBOUNDED)
    if res.status != 0:
        raise LPNumericalError(res.message)
    duals = sign * np.asarray(res.eqlin.marginals)
    n_pos = int((res.x > 1e-9).sum())
    return LPResult(Status.OPTIMAL, res.x, duals, float(lp.c @ res.x), n_pos <= lp.A.shape[0])


def solve(lp: LinearProgram, method: str = "simplex", **options) -> LPResult:
    """Solve ``lp``; ``method`` is ``"simplex"`` (built-in) or ``"highs"`` (scipy)."""
    if method == "simplex":
        return _solve_simplex(lp, **options)
    if method == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


def certificate(lp: LinearProgram, res: LPResult) -> dict:
    """Residuals to check an optimal result: feasibility, duality gap, dual feasibility."""
    x, lam = res.x, res.duals
    reduced = lp.c - lp.A.T @ lam
    if lp.maximize:
        dual_infeas = max(0.0, float(reduced.max(initial=0.0)))
    else:
        dual_infeas = max(0.0, float(-reduced.min(initial=0.0)))
    return {
        "primal_residual": float(np.abs(lp.A @ x - lp.b).max(initial=0.0)),
        "min_x": float(x.min(initial=0.0)),
        "duality_gap": abs(float(lp.c @ x - lp.b @ lam)),
        "dual_infeasibility": dual_infeas,
        "complementarity": float(np.abs(x * reduced).max(initial=0.0)),
        "support": int((x > 1e-9).sum()),
    }
