"""N-arm simulation, mean-field iteration and small exact/statistical checks.

Random numbers: replication ``r`` of a run with seed ``S`` uses
``default_rng([S, r])`` and draws, in this order, ``T`` rounding uniforms and a
``(T, n)`` block of transition uniforms.  All policies simulated with the same
seed therefore see common random numbers, and the compiled and pure-Python
kernels produce identical trajectories.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import RBModel
from .policies import DecisionRule, OccupationVector, ProgramRule

UNIFORM_BLOCK = 4_000_000
ORACLE_CAP = 10_000_000


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    half_width: float
    replications: int
    std: float = 0.0

    @classmethod
    def from_samples(cls, x) -> "ValueEstimate":
        x = np.asarray(x, dtype=float)
        R = len(x)
        std = float(x.std(ddof=1)) if R > 1 else 0.0
        return cls(float(x.mean()), 1.96 * std / math.sqrt(R), R, std)

    def to_dict(self):
        return {"mean": self.mean, "ci_half_width": self.half_width,
                "replications": self.replications}


@dataclass(frozen=True)
class Trajectory:
    counts: np.ndarray       # (T+1, d)
    activations: np.ndarray  # (T, d)
    reward: float            # total reward per arm

    @property
    def n(self) -> int:
        return int(self.counts[0].sum())


@dataclass(frozen=True)
class SimulationResult:
    estimate: ValueEstimate
    trajectory: Trajectory
    rewards: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MeanFieldTrajectory:
    m: np.ndarray   # (T+1, d)
    y1: np.ndarray  # (T, d)
    y0: np.ndarray
    value: float


def phi(p0, p1, y: OccupationVector) -> np.ndarray:
    """Expected next-epoch distribution: ``sum_{s',a} y_{s',a} P^a_{s's}``."""
    return np.asarray(y.y0) @ p0 + np.asarray(y.y1) @ p1


def initial_counts(m0, n: int) -> np.ndarray:
    """Largest-remainder apportionment of n arms to the distribution m0."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    target = np.asarray(m0, dtype=float) * n
    base = np.floor(target + 1e-9).astype(np.int64)
    short = n - int(base.sum())
    if short > 0:
        frac = target - base
        order = sorted(range(len(frac)), key=lambda s: (-frac[s], s))
        for s in order[:short]:
            base[s] += 1
    elif short < 0:
        order = sorted(range(len(base)), key=lambda s: (target[s] - base[s], s))
        for s in order:
            if short == 0:
                break
            take = min(base[s], -short)
            base[s] -= take
            short += take
    return base


def cumulative_kernels(kern: np.ndarray) -> np.ndarray:
    cum = np.cumsum(kern, axis=-1)
    cum[..., -1] = 1.0
    return np.ascontiguousarray(cum)


def replication_uniforms(seed: int, reps, T: int, n: int):
    R = len(reps)
    u_round = np.empty((R, T))
    u_trans = np.empty((R, T, n))
    for i, r in enumerate(reps):
        rng = np.random.default_rng([seed, r])
        u_round[i] = rng.random(T)
        u_trans[i] = rng.random((T, n))
    return u_round, u_trans


def _generic_run(rule: DecisionRule, n, counts0, cum, rew, weights, u_round, u_trans,
                 rewards_out, counts_out, act_out):
    """Python loop with the kernel's arithmetic, for rules that are not step programs."""
    R, T = u_round.shape
    d = len(counts0)
    Tk = cum.shape[0]
    act = np.zeros(d, dtype=np.int64)
    nxt = np.zeros(d, dtype=np.int64)
    for r in range(R):
        rule.reset()
        counts = np.array(counts0, dtype=np.int64)
        counts_out[r, 0] = counts
        total = 0.0
        for t in range(T):
            tk = t % Tk
            m = counts / n
            y = rule(t, m)
            if kernels.round_counts(n, np.ascontiguousarray(y.y1, dtype=float), counts,
                                    u_round[r, t], act) != 0:
                return -1
            act_out[r, t] = act
            epoch = 0.0
            for s in range(d):
                epoch += rew[tk, 1, s] * act[s] + rew[tk, 0, s] * (counts[s] - act[s])
            total += weights[t] * (epoch / n)
            kernels.evolve(counts, act, cum[tk], u_trans[r, t], nxt)
            counts[:] = nxt
            counts_out[r, t + 1] = counts
        rewards_out[r] = total
    return 0


def _run(model: RBModel, rule: DecisionRule, n: int, T: int, weights, replications: int,
         seed: int, m0, backend=None) -> SimulationResult:
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    n = int(n)
    impl = backend or kernels.backend
    d = model.d
    if model.is_finite:
        kern = model.kernel_array(T)
        rew = model.reward_array(T)
    else:
        kern = np.stack([np.stack(model.kernels())])
        rew = np.stack([np.stack(model.rewards())])
    cum = cumulative_kernels(kern)
    rew = np.ascontiguousarray(rew)
    weights = np.ascontiguousarray(weights, dtype=float)
    counts0 = initial_counts(model.m0 if m0 is None else m0, n)
    rewards = np.empty(replications)
    first = None
    chunk = max(1, UNIFORM_BLOCK // max(1, T * n))
    for lo in range(0, replications, chunk):
        reps = range(lo, min(lo + chunk, replications))
        R = len(reps)
        u_round, u_trans = replication_uniforms(seed, reps, T, n)
        rew_out = np.zeros(R)
        counts_out = np.zeros((R, T + 1, d), dtype=np.int64)
        act_out = np.zeros((R, T, d), dtype=np.int64)
        if isinstance(rule, ProgramRule):
            status = impl.run_program(n, counts0, rule.alpha, rule.prog_state, rule.prog_cap,
                                      rule.prog_len, rule.ystar1, cum, rew, weights,
                                      u_round, u_trans, rew_out, counts_out, act_out)
        else:
            status = _generic_run(rule, n, counts0, cum, rew, weights, u_round, u_trans,
                                  rew_out, counts_out, act_out)
        if status != 0:
            raise RuntimeError("decision rule asked for more activations than arms present")
        rewards[lo: lo + R] = rew_out
        if first is None:
            first = Trajectory(counts_out[0].copy(), act_out[0].copy(), float(rew_out[0]))
    return SimulationResult(ValueEstimate.from_samples(rewards), first, rewards)


def simulate_policy(model: RBModel, rule: DecisionRule, n: int, replications: int = 1000,
                    seed: int = 0, m0=None, backend=None) -> SimulationResult:
    """Total reward per arm over the horizon, averaged over replications."""
    if not model.is_finite:
        raise ValueError("use simulate_policy_infinite for infinite-horizon models")
    T = model.horizon
    return _run(model, rule, n, T, np.ones(T), replications, seed, m0, backend)


def simulate_policy_infinite(model: RBModel, rule: DecisionRule, n: int, burn_in: int = 200,
                             horizon: int = 1000, replications: int = 100, seed: int = 0,
                             m0=None, backend=None) -> SimulationResult:
    """Time-average reward per arm over ``horizon`` epochs after ``burn_in``."""
    T = burn_in + horizon
    weights = np.concatenate([np.zeros(burn_in), np.full(horizon, 1.0 / horizon)])
    return _run(model, rule, n, T, weights, replications, seed, m0, backend)


def mean_field(model: RBModel, rule: DecisionRule, m0=None, T: int | None = None
               ) -> MeanFieldTrajectory:
    """Deterministic recursion m(t+1) = phi(rule(t, m(t)))."""
    T = model.horizon if T is None else T
    d = model.d
    m = np.zeros((T + 1, d))
    y1 = np.zeros((T, d))
    y0 = np.zeros((T, d))
    m[0] = model.m0 if m0 is None else m0
    value = 0.0
    rule.reset()
    for t in range(T):
        y = rule(t, m[t])
        y1[t], y0[t] = y.y1, y.y0
        r0, r1 = model.rewards(t)
        value += float(r0 @ y.y0 + r1 @ y.y1)
        p0, p1 = model.kernels(t)
        m[t + 1] = phi(p0, p1, y)
    return MeanFieldTrajectory(m, y1, y0, value)


# -- one-step error statistics -------------------------------------------

@dataclass(frozen=True)
class ErrorStats:
    n: int
    samples: int
    mean_error: np.ndarray       # per-coordinate mean of E
    mean_error_sigma: np.ndarray  # standard error of that mean
    mean_l1: float
    l1_bound: float              # sqrt(d) / sqrt(n)
    tail: dict                   # eps -> (frequency, standard error, bound)

    def to_dict(self):
        return {"n": self.n, "samples": self.samples,
                "mean_error": self.mean_error.tolist(),
                "mean_error_sigma": self.mean_error_sigma.tolist(),
                "mean_l1": self.mean_l1, "l1_bound": self.l1_bound,
                "tail": {str(k): list(v) for k, v in self.tail.items()}}


def lemma1_statistics(model: RBModel, rule: DecisionRule, n: int, samples: int = 100_000,
                      seed: int = 0, t: int = 0, m=None, eps=(0.05, 0.1)) -> ErrorStats:
    """One-step error E = M(t+1) - phi(Y(t)) from a fixed empirical measure.

    Y(t) is the rounded rule output, so it varies between samples; E is measured
    against phi of the realized Y, and next states are drawn with numpy's
    multinomial sampler (independent of the simulation kernels).
    """
    rng = np.random.default_rng(seed)
    d = model.d
    counts = initial_counts(model.m0 if m is None else m, n)
    y = rule(t, counts / n)
    y1 = np.ascontiguousarray(y.y1, dtype=float)
    u = rng.random(samples)
    act = np.empty((samples, d), dtype=np.int64)
    buf = np.zeros(d, dtype=np.int64)
    for i in range(samples):
        if kernels.round_counts(n, y1, counts, u[i], buf) != 0:
            raise RuntimeError("rule output inconsistent with the empirical measure")
        act[i] = buf
    p0, p1 = model.kernels(t)
    nxt = np.zeros((samples, d), dtype=np.int64)
    for s in range(d):
        for a, k in ((1, act[:, s]), (0, counts[s] - act[:, s])):
            P = p1 if a == 1 else p0
            if k.max() > 0:
                nxt += rng.multinomial(k, P[s])
    Y1 = act / n
    Y0 = (counts - act) / n
    expected = Y0 @ p0 + Y1 @ p1
    E = nxt / n - expected
    l1 = np.abs(E).sum(axis=1)
    tail = {}
    for e in eps:
        f = float((l1 >= e).mean())
        tail[e] = (f, math.sqrt(max(f * (1 - f), 1.0 / samples) / samples),
                   2 * d * math.exp(-2 * n * e * e / d ** 2))
    return ErrorStats(n, samples, E.mean(axis=0), E.std(axis=0, ddof=1) / math.sqrt(samples),
                      float(l1.mean()), math.sqrt(d) / math.sqrt(n), tail)


# -- UGAP -------------------------------------------------------------------

@dataclass(frozen=True)
class UGAPReport:
    consistent: bool
    t_eps: np.ndarray            # per start: first epoch after which it stays in the ball
    final_distance: np.ndarray
    epsilon: float
    t_max: int
    witness: np.ndarray | None = None

    @property
    def verdict(self) -> str:
        return "UGAP-consistent" if self.consistent else "violation found"

    def to_dict(self):
        return {"verdict": self.verdict, "epsilon": self.epsilon, "t_max": self.t_max,
                "t_eps_max": int(self.t_eps.max()),
                "final_distance_max": float(self.final_distance.max()),
                "witness": None if self.witness is None else self.witness.tolist()}


def ugap_check(model: RBModel, rule: DecisionRule, m_star, grid_size: int = 100,
               t_max: int = 10_000, epsilon: float = 1e-6, seed: int = 0) -> UGAPReport:
    """Iterate the closed-loop map from corner and random starts.

    A start counts as converged once it stays within ``epsilon`` (L1) of
    ``m_star`` up to ``t_max``.  Iteration stops early when the distance drops
    below 1e-13, where the fixed point has been reached to rounding.
    """
    d = model.d
    p0, p1 = model.kernels()
    m_star = np.asarray(m_star, dtype=float)
    rng = np.random.default_rng(seed)
    starts = np.vstack([np.eye(d), rng.dirichlet(np.ones(d), size=grid_size)])
    t_eps = np.zeros(len(starts), dtype=np.int64)
    final = np.zeros(len(starts))
    witness = None
    for i, m in enumerate(starts):
        last_out = -1
        dist = float(np.abs(m - m_star).sum())
        for t in range(t_max):
            if dist > epsilon:
                last_out = t
            elif dist < 1e-13:
                break
            m = phi(p0, p1, rule(0, m))
            dist = float(np.abs(m - m_star).sum())
        if dist > epsilon:
            last_out = t_max
        t_eps[i] = last_out + 1
        final[i] = dist
        if last_out >= t_max and witness is None:
            witness = starts[i]
    consistent = bool((t_eps <= t_max).all() and (final <= epsilon).all())
    return UGAPReport(consistent, t_eps, final, epsilon, t_max, witness)


# -- exact oracle -------------------------------------------------------------

def _compositions(n: int, d: int):
    """All length-d non-negative integer vectors summing to n."""
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(n + d - 2 - prev)
        yield tuple(out)


def _multinomial(k: int, p) -> dict:
    d = len(p)
    out = {}
    for c in _compositions(k, d):
        if any(ci > 0 and pi == 0.0 for ci, pi in zip(c, p)):
            continue
        logc = math.lgamma(k + 1) - sum(math.lgamma(ci + 1) for ci in c)
        prob = math.exp(logc) * math.prod(pi ** ci for pi, ci in zip(p, c) if ci)
        out[c] = prob
    return out


def _convolve(a: dict, b: dict) -> dict:
    out = {}
    for ka, pa in a.items():
        for kb, pb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0.0) + pa * pb
    return out


def _activation_vectors(x, budget):
    """All k with 0 <= k_s <= x_s and sum k = budget."""
    d = len(x)

    def rec(s, left):
        if s == d - 1:
            if left <= x[s]:
                yield (left,)
            return
        for k in range(min(x[s], left) + 1):
            for rest in rec(s + 1, left - k):
                yield (k,) + rest

    yield from rec(0, budget)


def exact_oracle(model: RBModel, n: int, cap: int = ORACLE_CAP) -> float:
    """Optimal expected total reward per arm for n arms, by DP over count vectors."""
    if not model.is_finite:
        raise ValueError("exact_oracle needs a finite-horizon model")
    budget = model.alpha * n
    if abs(budget - round(budget)) > 1e-9:
        raise ValueError("alpha * n must be an integer")
    budget = int(round(budget))
    init = model.m0 * n
    if np.abs(init - np.round(init)).max() > 1e-9:
        raise ValueError("n * m0 must be integral")
    d, T = model.d, model.horizon
    states = list(_compositions(n, d))
    n_actions = math.comb(budget + d - 1, d - 1)
    cells = len(states) * T * n_actions
    if cells > cap:
        raise ValueError(f"oracle needs ~{cells} cells, above the cap {cap}")
    V = {x: 0.0 for x in states}
    for t in range(T - 1, -1, -1):
        p0, p1 = model.kernels(t)
        r0, r1 = model.rewards(t)
        groups = {}

        def group(s, a, k):
            key = (s, a, k)
            if key not in groups:
                groups[key] = _multinomial(k, (p1 if a else p0)[s])
            return groups[key]

        newV = {}
        for x in states:
            best = -math.inf
            for k in _activation_vectors(x, budget):
                reward = sum(r1[s] * k[s] + r0[s] * (x[s] - k[s]) for s in range(d)) / n
                dist = {tuple([0] * d): 1.0}
                for s in range(d):
                    if k[s]:
                        dist = _convolve(dist, group(s, 1, k[s]))
                    if x[s] - k[s]:
                        dist = _convolve(dist, group(s, 0, x[s] - k[s]))
                cont = sum(p * V[y] for y, p in dist.items())
                best = max(best, reward + cont)
            newV[x] = best
        V = newV
    return float(V[tuple(int(v) for v in np.round(init))])
