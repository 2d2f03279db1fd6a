"""Desk-scale numerical studies: tie-breaking comparison, applicant screening
and the degenerate-instance convergence rate.

Each study returns a list of flat dict records and can be written to a
directory as ``results.csv`` + ``config.json`` (+ ``plot.svg`` when matplotlib
is available) by :func:`run_experiment`.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .indices import finite_lp_indices
from .model import RBModel, degenerate_example, random_model, screening_model, screening_states
from .policies import DecisionRule, lp_index_policy, lp_update_policy, random_tie_policy
from .relaxation import classify, solve_finite, solve_finite_min
from .simulate import ValueEstimate, simulate_policy

from . import kernels


class UndefinedScore(ValueError):
    pass


def score(v: float, v_rel: float, v_rel_min: float) -> float:
    """Affine normalization: 0 at the minimizing LP value, 1 at the maximizing one."""
    den = v_rel - v_rel_min
    if not den > 0:
        raise UndefinedScore("score undefined when v_rel <= v_rel_min")
    return (v - v_rel_min) / den


@dataclass(frozen=True)
class ScoreRecord:
    model_id: int
    policy_id: str
    n: int
    score: float
    ci: float
    mean: float
    ci_half_width: float
    v_rel: float
    v_rel_min: float


def git_hash(data: bytes) -> str:
    """Content hash in git's blob format."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def model_hash(model: RBModel) -> str:
    return git_hash(model.to_json().encode())


# -- tie solving ----------------------------------------------------------

def _tie_model(args):
    model_id, d, T, n_grid, n_orders, replications, seed = args
    model = random_model(d, T, seed=seed * 100_003 + model_id)
    sol = solve_finite(model)
    vmin = solve_finite_min(model).value
    table = finite_lp_indices(model, sol)
    rules = {"lp-index": lp_index_policy(model, sol, table)}
    order_rng = np.random.default_rng([seed, model_id, 7])
    for k in range(n_orders):
        rules[f"random-{k}"] = random_tie_policy(model, sol, order_rng, table)
    out = []
    for n in n_grid:
        sim_seed = seed * 1_000_003 + model_id * 1000 + n
        for pid, rule in rules.items():
            est = simulate_policy(model, rule, n, replications, sim_seed).estimate
            den = sol.value - vmin
            out.append(ScoreRecord(model_id, pid, n, score(est.mean, sol.value, vmin),
                                   est.half_width / den, est.mean, est.half_width,
                                   sol.value, vmin))
    return out, model_hash(model)


def tie_solving_experiment(n_models: int = 100, d: int = 10, T: int = 20,
                           n_grid=(10, 20, 30, 40, 50), n_orders: int = 5,
                           replications: int = 1000, seed: int = 0, workers: int = 1):
    """Water-filling with LP-index tie-breaks versus random priority orders.

    Returns ``(records, hashes)``; policies sharing a (model, n) cell use
    common random numbers.
    """
    jobs = [(i, d, T, tuple(n_grid), n_orders, replications, seed) for i in range(n_models)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_tie_model, jobs))
    else:
        results = [_tie_model(j) for j in jobs]
    records = [r for recs, _ in results for r in recs]
    return records, [h for _, h in results]


def summarize_tie_solving(records, n: int) -> dict:
    """Per-model LP-index score versus the mean random-order score at one n."""
    by_model: dict[int, dict] = {}
    for r in records:
        if r.n != n:
            continue
        cell = by_model.setdefault(r.model_id, {"random": []})
        if r.policy_id == "lp-index":
            cell["lp"] = r.score
        else:
            cell["random"].append(r.score)
    lp = np.array([c["lp"] for c in by_model.values()])
    rnd = np.array([np.mean(c["random"]) for c in by_model.values()])
    diff = lp - rnd
    k = len(diff)

    def hw(x):
        return float(1.96 * x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0

    return {"n": n, "models": k, "lp_wins": int((diff >= 0).sum()),
            "lp_mean": float(lp.mean()), "random_mean": float(rnd.mean()),
            "lp_ci": hw(lp), "random_ci": hw(rnd), "diff_mean": float(diff.mean()),
            "diff_ci": hw(diff)}


# -- applicant screening ---------------------------------------------------

PRIORS = {"uniform": (1.0, 1.0), "beta31": (3.0, 1.0)}


def _screening_rep(rule: DecisionRule, n: int, T: int, seed: int, r: int, prior: str,
                   states, index, up, down) -> float:
    a_prior, b_prior = PRIORS[prior]
    d = len(states)
    rng = np.random.default_rng([seed, r])
    p = rng.beta(a_prior, b_prior, size=n)
    u_round = rng.random(T)
    u_sel = rng.random((T, n))
    u_sig = rng.random((T, n))
    arm_state = np.full(n, index[(1, 1)])
    act = np.zeros(d, dtype=np.int64)
    rule.reset()
    total = 0.0
    for ep in range(T):
        counts = np.bincount(arm_state, minlength=d).astype(np.int64)
        y = rule(ep, counts / n)
        if kernels.round_counts(n, np.ascontiguousarray(y.y1, dtype=float), counts,
                                u_round[ep], act) != 0:
            raise RuntimeError("rounding precondition violated")
        # arms grouped by state, smallest selection key first
        order = np.lexsort((u_sel[ep], arm_state))
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        chosen = np.zeros(n, dtype=bool)
        for s in np.flatnonzero(act):
            chosen[order[starts[s]: starts[s] + act[s]]] = True
        if ep == T - 1:
            total += p[chosen].sum() / n
        else:
            nxt = np.where(u_sig[ep] < p, up[arm_state], down[arm_state])
            arm_state = np.where(chosen, nxt, arm_state)
    return total


def simulate_screening(model: RBModel, rule: DecisionRule, n: int, replications: int,
                       seed: int, prior: str = "uniform"):
    """Per-applicant simulation with hidden qualities p_i.

    Replication r draws, from ``default_rng([seed, r])``: the qualities from the
    true prior, T rounding uniforms, a (T, n) block of selection keys, and a
    (T, n) block of signal uniforms (an interview of applicant i at epoch t
    succeeds iff ``u_sig[t, i] < p_i``).  Within a state the activated applicants
    are those with the smallest keys.  Admission at the last epoch earns p_i.
    Returns ``(ValueEstimate, per-replication values)``.
    """
    T = model.horizon
    states = screening_states(T)
    if len(states) != model.d:
        raise ValueError("model is not a screening model")
    index = {s: i for i, s in enumerate(states)}
    up = np.array([index.get((a + 1, b), i) for i, (a, b) in enumerate(states)])
    down = np.array([index.get((a, b + 1), i) for i, (a, b) in enumerate(states)])
    x = np.array([_screening_rep(rule, n, T, seed, r, prior, states, index, up, down)
                  for r in range(replications)])
    return ValueEstimate.from_samples(x), x


def screening_experiment(t: int = 5, alpha: float = 0.25, n_grid=(20, 40, 80, 160),
                         priors=("uniform", "beta31"), replications: int = 400,
                         seed: int = 0):
    """LP-index versus LP-update on the screening model under two true priors.

    Policies are always built from the uniform-prior model; only the
    simulator's hidden qualities change with ``prior``.  The update-minus-index
    difference carries a paired CI (both policies share random numbers).
    """
    model = screening_model(t, alpha)
    sol = solve_finite(model)
    vmin = solve_finite_min(model).value
    rules = {"lp-index": lp_index_policy(model, sol), "lp-update": lp_update_policy(model)}
    records = []
    for prior in priors:
        for n in n_grid:
            sim_seed = seed * 1_000_003 + n * 10 + (prior != "uniform")
            res = {pid: simulate_screening(model, rule, n, replications, sim_seed, prior)
                   for pid, rule in rules.items()}
            diff = res["lp-update"][1] - res["lp-index"][1]
            diff_hw = 1.96 * diff.std(ddof=1) / math.sqrt(len(diff))
            for pid, (est, _) in res.items():
                records.append({"prior": prior, "n": n, "policy": pid, "mean": est.mean,
                                "ci_half_width": est.half_width, "v_rel": sol.value,
                                "v_rel_min": vmin, "score": score(est.mean, sol.value, vmin),
                                "update_minus_index": float(diff.mean()),
                                "diff_ci_half_width": float(diff_hw)})
    return records, [model_hash(model)]


# -- degenerate rate -------------------------------------------------------

def find_nondegenerate_instance(seed: int = 0, d: int = 3, T: int = 3, tries: int = 1000):
    """First random model whose LP vertex solution has |S0(t)| >= 1 at every epoch."""
    for k in range(tries):
        model = random_model(d, T, seed=seed * 7919 + k)
        sol = solve_finite(model)
        if classify(sol).nondegenerate_witness:
            return model, sol
    raise RuntimeError("no non-degenerate instance found")


def gap_records(label: str, model: RBModel, sol, n_grid, replications: int, seed: int):
    rule = lp_index_policy(model, sol)
    out = []
    for n in n_grid:
        est = simulate_policy(model, rule, n, replications, seed * 1_000_003 + n).estimate
        gap = sol.value - est.mean
        out.append({"instance": label, "n": n, "policy": "lp-index", "mean": est.mean,
                    "ci_half_width": est.half_width, "v_rel": sol.value, "gap": gap,
                    "sqrt_n_gap": math.sqrt(n) * gap,
                    "sqrt_n_ci": math.sqrt(n) * est.half_width})
    return out


def degenerate_rate_experiment(params=(0.1, 0.8, 0.9, 0.1), n_grid=(100, 400, 1600, 6400),
                               replications: int = 4000, seed: int = 0,
                               comparison_grid=(10, 20, 50, 100, 200)):
    """sqrt(n) * gap(n) on the degenerate instance, plus a non-degenerate contrast."""
    ex = degenerate_example(*params)
    if not ex.condition:
        raise ValueError("degeneracy condition q1 + p2 > 1 + p1 + q2 does not hold")
    sol = solve_finite(ex.model)
    records = gap_records("degenerate", ex.model, sol, n_grid, replications, seed)
    hashes = [model_hash(ex.model)]
    if comparison_grid:
        model, nsol = find_nondegenerate_instance(seed)
        records += gap_records("non-degenerate", model, nsol, comparison_grid,
                               replications, seed)
        hashes.append(model_hash(model))
    return records, hashes


def loglog_slope(ns, gaps) -> float:
    """Least-squares slope of log|gap| against log n."""
    g = np.maximum(np.abs(np.asarray(gaps, dtype=float)), 1e-300)
    return float(np.polyfit(np.log(ns), np.log(g), 1)[0])


# -- output ------------------------------------------------------------------

EXPERIMENTS = ("tie-solving", "screening", "degenerate-rate")


def _settings(name: str, full: bool, replications: int | None, workers: int) -> dict:
    if name == "tie-solving":
        cfg = {"n_models": 100, "d": 10, "T": 20, "n_grid": [10, 20, 30, 40, 50],
               "n_orders": 100 if full else 5, "replications": 1000, "workers": workers}
    elif name == "screening":
        cfg = {"t": 5, "alpha": 0.25, "n_grid": [20, 40, 80, 160],
               "priors": ["uniform", "beta31"], "replications": 10000 if full else 2000}
    elif name == "degenerate-rate":
        cfg = {"params": [0.1, 0.8, 0.9, 0.1], "n_grid": [100, 400, 1600, 6400],
               "replications": 16000 if full else 4000,
               "comparison_grid": [10, 20, 50, 100, 200]}
    else:
        raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    if replications is not None:
        cfg["replications"] = replications
    return cfg


def run_experiment(name: str, seed: int, out: str, full: bool = False,
                   replications: int | None = None, workers: int = 1, plot: bool = True):
    """Run one study and write results.csv, config.json and (optionally) plot.svg."""
    cfg = _settings(name, full, replications, workers)
    if name == "tie-solving":
        recs, hashes = tie_solving_experiment(cfg["n_models"], cfg["d"], cfg["T"],
                                              cfg["n_grid"], cfg["n_orders"],
                                              cfg["replications"], seed, workers)
        rows = [asdict(r) for r in recs]
        summary = [summarize_tie_solving(recs, n) for n in cfg["n_grid"]]
    elif name == "screening":
        rows, hashes = screening_experiment(cfg["t"], cfg["alpha"], cfg["n_grid"],
                                            cfg["priors"], cfg["replications"], seed)
        summary = []
    else:
        rows, hashes = degenerate_rate_experiment(tuple(cfg["params"]), cfg["n_grid"],
                                                  cfg["replications"], seed,
                                                  cfg["comparison_grid"])
        summary = []
    os.makedirs(out, exist_ok=True)
    write_csv(os.path.join(out, "results.csv"), rows)
    config = {"experiment": name, "seed": seed, "full": full, "settings": cfg,
              "backend": kernels.BACKEND_NAME, "input_hashes": hashes,
              "results_hash": git_hash(open(os.path.join(out, "results.csv"), "rb").read()),
              "summary": summary}
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(config, fh, indent=2)
    if plot:
        plot_results(name, rows, os.path.join(out, "plot.svg"))
    return rows, config


def write_csv(path: str, rows: list[dict]) -> None:
    fields: list[str] = []
    for r in rows:
        for k in r:
            if k not in fields:
                fields.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def plot_results(name: str, rows: list[dict], path: str) -> bool:
    """Line chart of the key quantity against n; returns False without matplotlib."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    if name == "tie-solving":
        for label, pred in (("LP-index", lambda p: p == "lp-index"),
                            ("random order", lambda p: p != "lp-index")):
            ns = sorted({r["n"] for r in rows})
            ys = [np.mean([r["score"] for r in rows if r["n"] == n and pred(r["policy_id"])])
                  for n in ns]
            ax.plot(ns, ys, marker="o", label=label)
        ax.set_ylabel("mean score")
    elif name == "screening":
        for prior in sorted({r["prior"] for r in rows}):
            for pid in ("lp-index", "lp-update"):
                sel = [r for r in rows if r["prior"] == prior and r["policy"] == pid]
                ax.errorbar([r["n"] for r in sel], [r["mean"] for r in sel],
                            yerr=[r["ci_half_width"] for r in sel], marker="o",
                            label=f"{pid} ({prior})")
        ax.axhline(rows[0]["v_rel"], color="grey", ls="--", label="LP bound")
        ax.set_ylabel("reward per applicant")
    else:
        for inst in sorted({r["instance"] for r in rows}):
            sel = [r for r in rows if r["instance"] == inst]
            ax.errorbar([r["n"] for r in sel], [r["sqrt_n_gap"] for r in sel],
                        yerr=[r["sqrt_n_ci"] for r in sel], marker="o", label=inst)
        ax.set_xscale("log")
        ax.set_ylabel("sqrt(n) * gap")
    ax.set_xlabel("n")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True
