"""Restless-bandit problem instances: definition, validation, generators, JSON I/O.

Kernels and rewards are stored either once for all epochs (``p0.shape == (d, d)``)
or per epoch (``p0.shape == (T, d, d)``, finite horizon only).  Every consumer
should go through :meth:`RBModel.kernels` / :meth:`RBModel.rewards` so the two
layouts are interchangeable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

ROW_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class RBModel:
    """A population of statistically identical two-action arms.

    ``horizon`` is the number of decision epochs T, or ``None`` for the
    infinite-horizon (average reward) model.
    """

    d: int
    alpha: float
    horizon: int | None
    p0: np.ndarray
    p1: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    m0: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for attr in ("p0", "p1", "r0", "r1", "m0"):
            object.__setattr__(self, attr, _frozen(getattr(self, attr)))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "d", int(self.d))
        if self.horizon is not None:
            object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def is_finite(self) -> bool:
        return self.horizon is not None

    @property
    def per_epoch(self) -> bool:
        return self.p0.ndim == 3 or self.r0.ndim == 2

    def kernels(self, t: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """(P0, P1) used at epoch ``t``."""
        p0 = self.p0[t] if self.p0.ndim == 3 else self.p0
        p1 = self.p1[t] if self.p1.ndim == 3 else self.p1
        return p0, p1

    def rewards(self, t: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """(R0, R1) used at epoch ``t``."""
        r0 = self.r0[t] if self.r0.ndim == 2 else self.r0
        r1 = self.r1[t] if self.r1.ndim == 2 else self.r1
        return r0, r1

    def kernel_array(self, T: int | None = None, start: int = 0) -> np.ndarray:
        """Stacked kernels of shape (T, 2, d, d) for epochs start..start+T-1."""
        T = (self.horizon - start) if T is None else T
        return np.stack([np.stack(self.kernels(start + t)) for t in range(T)])

    def reward_array(self, T: int | None = None, start: int = 0) -> np.ndarray:
        """Stacked rewards of shape (T, 2, d)."""
        T = (self.horizon - start) if T is None else T
        return np.stack([np.stack(self.rewards(start + t)) for t in range(T)])

    def sliced(self, start: int, m0=None) -> "RBModel":
        """The remaining problem from epoch ``start`` on, with a new initial measure."""
        if not self.is_finite:
            raise ValueError("only finite-horizon models can be sliced")
        kern = self.kernel_array(start=start)
        rew = self.reward_array(start=start)
        return RBModel(
            d=self.d,
            alpha=self.alpha,
            horizon=self.horizon - start,
            p0=kern[:, 0] if self.p0.ndim == 3 else self.p0,
            p1=kern[:, 1] if self.p1.ndim == 3 else self.p1,
            r0=rew[:, 0] if self.r0.ndim == 2 else self.r0,
            r1=rew[:, 1] if self.r1.ndim == 2 else self.r1,
            m0=self.m0 if m0 is None else m0,
            name=self.name,
        )

    def with_m0(self, m0) -> "RBModel":
        return RBModel(self.d, self.alpha, self.horizon, self.p0, self.p1,
                       self.r0, self.r1, m0, self.name)

    def with_horizon(self, horizon: int | None) -> "RBModel":
        if self.per_epoch:
            raise ValueError("cannot change the horizon of a per-epoch model")
        return RBModel(self.d, self.alpha, horizon, self.p0, self.p1,
                       self.r0, self.r1, self.m0, self.name)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alpha": self.alpha,
            "horizon": "infinite" if self.horizon is None else self.horizon,
            "p0": self.p0.tolist(),
            "p1": self.p1.tolist(),
            "r0": self.r0.tolist(),
            "r1": self.r1.tolist(),
            "m0": self.m0.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RBModel":
        horizon = data["horizon"]
        if isinstance(horizon, str):
            if horizon != "infinite":
                raise ValueError(f"horizon must be an integer or 'infinite', got {horizon!r}")
            horizon = None
        return cls(
            d=data["d"],
            alpha=data["alpha"],
            horizon=horizon,
            p0=data["p0"],
            p1=data["p1"],
            r0=data["r0"],
            r1=data["r1"],
            m0=data["m0"],
            name=data.get("name", ""),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RBModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RBModel":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, RBModel):
            return NotImplemented
        return (
            self.d == other.d
            and self.alpha == other.alpha
            and self.horizon == other.horizon
            and all(
                np.array_equal(getattr(self, a), getattr(other, a))
                for a in ("p0", "p1", "r0", "r1", "m0")
            )
        )

    __hash__ = object.__hash__


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failure: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


def validate(model: RBModel) -> ValidationReport:
    """Check every model invariant; report the first one that is violated."""
    d = model.d
    if d < 1:
        return ValidationReport(False, "state count", f"d={d}")
    if not 0.0 < model.alpha < 1.0:
        return ValidationReport(False, "budget fraction", f"alpha={model.alpha}")
    if model.horizon is not None and model.horizon < 1:
        return ValidationReport(False, "horizon", f"T={model.horizon}")
    for name in ("p0", "p1"):
        p = getattr(model, name)
        if p.shape[-2:] != (d, d) or p.ndim not in (2, 3):
            return ValidationReport(False, "shape", f"{name} has shape {p.shape}")
        if p.ndim == 3 and (model.horizon is None or p.shape[0] != model.horizon):
            return ValidationReport(False, "shape", f"{name} per-epoch length {p.shape[0]}")
        if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
            return ValidationReport(False, "kernel entries", f"{name} entries outside [0, 1]")
        dev = np.abs(p.sum(axis=-1) - 1.0).max()
        if dev > ROW_TOL:
            return ValidationReport(False, "row-stochasticity", f"{name} row sum off by {dev:.3g}")
    for name in ("r0", "r1"):
        r = getattr(model, name)
        if r.shape[-1:] != (d,) or r.ndim not in (1, 2):
            return ValidationReport(False, "shape", f"{name} has shape {r.shape}")
        if r.ndim == 2 and (model.horizon is None or r.shape[0] != model.horizon):
            return ValidationReport(False, "shape", f"{name} per-epoch length {r.shape[0]}")
        if not np.all(np.isfinite(r)):
            return ValidationReport(False, "reward entries", f"{name} not finite")
    m0 = model.m0
    if m0.shape != (d,):
        return ValidationReport(False, "shape", f"m0 has shape {m0.shape}")
    if m0.min() < 0.0 or abs(m0.sum() - 1.0) > ROW_TOL:
        return ValidationReport(False, "initial distribution", f"m0 sums to {m0.sum()!r}")
    return ValidationReport(True)


def require_valid(model: RBModel) -> None:
    report = validate(model)
    if not report:
        raise ValueError(f"invalid model ({report.failure}): {report.detail}")


def _uniform_stochastic(rng: np.random.Generator, size) -> np.ndarray:
    # normalized exponentials == Dirichlet(1, ..., 1) rows
    e = rng.exponential(size=size)
    return e / e.sum(axis=-1, keepdims=True)


def random_model(d: int, t: int | None, seed: int, alpha: float = 0.5) -> RBModel:
    """Random time-homogeneous model: uniform stochastic rows, U[0,1] rewards, uniform m0."""
    if d < 2:
        raise ValueError("random_model needs d >= 2")
    rng = np.random.default_rng(seed)
    p0 = _uniform_stochastic(rng, (d, d))
    p1 = _uniform_stochastic(rng, (d, d))
    r0 = rng.uniform(size=d)
    r1 = rng.uniform(size=d)
    return RBModel(d, alpha, t, p0, p1, r0, r1, np.full(d, 1.0 / d), name=f"random-d{d}-s{seed}")


class DegenerateExample(NamedTuple):
    model: RBModel
    condition: bool
    beta_star: float | None


def degenerate_example(p1: float, p2: float, q1: float, q2: float) -> DegenerateExample:
    """Two-state, T=2 model whose LP optimum sits on a zone boundary at t=1.

    ``condition`` is ``q1 + p2 > 1 + p1 + q2``; when it holds ``beta_star`` is the
    optimal active mass in state 1 at t=0 and the LP value is ``beta_star + 0.5``.
    """
    for v in (p1, p2, q1, q2):
        if not 0.0 <= v <= 1.0:
            raise ValueError("parameters must lie in [0, 1]")
    P1 = np.array([[p1, 1 - p1], [p2, 1 - p2]])
    P0 = np.array([[q1, 1 - q1], [q2, 1 - q2]])
    model = RBModel(
        d=2, alpha=0.5, horizon=2, p0=P0, p1=P1,
        r0=[0.0, 0.0], r1=[1.0, 0.0], m0=[0.5, 0.5],
        name=f"degenerate({p1},{p2},{q1},{q2})",
    )
    cond = q1 + p2 > 1 + p1 + q2
    beta = 0.5 * (q1 + p2 - 1) / ((q1 + p2) - (p1 + q2)) if cond else None
    return DegenerateExample(model, cond, beta)


def screening_states(t: int) -> list[tuple[int, int]]:
    """Posterior pairs (a, b), a, b >= 1, a + b <= t + 1, ordered by (a + b, a)."""
    return [(a, n - a) for n in range(2, t + 2) for a in range(1, n)]


def screening_model(t: int = 5, alpha: float = 0.25) -> RBModel:
    """Beta-Bernoulli applicant screening: interview at epochs 0..t-2, admit at t-1."""
    if t < 2:
        raise ValueError("screening_model needs t >= 2")
    states = screening_states(t)
    index = {s: i for i, s in enumerate(states)}
    d = len(states)
    eye = np.eye(d)
    interview = np.zeros((d, d))
    for i, (a, b) in enumerate(states):
        if a + b == t + 1:
            interview[i, i] = 1.0  # unreachable before the last epoch
        else:
            interview[i, index[(a + 1, b)]] = a / (a + b)
            interview[i, index[(a, b + 1)]] = b / (a + b)
    p1 = np.stack([interview] * (t - 1) + [eye])
    p0 = np.stack([eye] * t)
    r0 = np.zeros((t, d))
    r1 = np.zeros((t, d))
    r1[-1] = [a / (a + b) for a, b in states]
    m0 = np.zeros(d)
    m0[index[(1, 1)]] = 1.0
    return RBModel(d, alpha, t, p0, p1, r0, r1, m0, name=f"screening-T{t}")


def identity_example(T: int = 3) -> RBModel:
    """Two states, identity kernels, R1 = [1, 0]: rankable and degenerate."""
    return RBModel(2, 0.5, T, np.eye(2), np.eye(2), [0.0, 0.0], [1.0, 0.0], [0.5, 0.5],
                   name=f"identity-T{T}")
