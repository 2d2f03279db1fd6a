"""Command-line entry point (``lpbandit`` or ``python -m lpbandit``)."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import experiments, indices, policies, relaxation, simulate
from .model import (RBModel, degenerate_example, identity_example, random_model,
                    screening_model, validate)


def _load(path) -> RBModel:
    model = RBModel.load(path)
    report = validate(model)
    if not report.ok:
        raise SystemExit(f"invalid model ({report.failure}): {report.detail}")
    return model


def _emit_json(obj, out=None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _emit_csv(rows, out=None):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def cmd_make_model(args):
    kind = args.kind
    if kind == "random":
        model = random_model(args.d, None if args.infinite else args.T, args.seed, args.alpha)
    elif kind == "degenerate":
        model = degenerate_example(*args.params).model
    elif kind == "screening":
        model = screening_model(args.T)
    else:
        model = identity_example(args.T)
    text = model.to_json()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_solve_lp(args):
    model = _load(args.model)
    if args.infinite or not model.is_finite:
        sol = relaxation.solve_infinite(model, method=args.method)
        out = {"value": sol.value, "gamma": sol.gamma,
               "y_star": {"y0": sol.y0.tolist(), "y1": sol.y1.tolist()},
               "m_star": sol.m_star.tolist(), "partition": sol.partition.to_dict()}
    else:
        solver = relaxation.solve_finite_min if args.min else relaxation.solve_finite
        sol = solver(model, method=args.method)
        out = {"value": sol.value, "gamma": sol.gamma.tolist(),
               "y_star": {"y0": sol.y0.tolist(), "y1": sol.y1.tolist()},
               "m_star": sol.m_star.tolist(),
               "partition": [p.to_dict() for p in sol.partitions]}
    out["classification"] = relaxation.classify(sol).to_dict()
    _emit_json(out, args.out)


def cmd_indices(args):
    model = _load(args.model)
    rows = []
    if model.is_finite:
        if args.whittle:
            raise SystemExit("Whittle indices need an infinite-horizon model")
        sol = relaxation.solve_finite(model)
        tab = indices.finite_lp_indices(model, sol)
        for t in range(model.horizon):
            for s in range(model.d):
                rows.append({"state": s, "epoch": t, "lp_index": tab.finite[t, s],
                             "whittle_index": "", "partition_set": sol.partitions[t].label(s)})
    else:
        sol = relaxation.solve_infinite(model)
        tab = indices.infinite_lp_indices(model, sol)
        w = indices.whittle_indices(model) if args.whittle else None
        for s in range(model.d):
            rows.append({"state": s, "epoch": "inf", "lp_index": tab.finite[s],
                         "whittle_index": "" if w is None else w.whittle[s],
                         "partition_set": sol.partition.label(s)})
        if w is not None and not w.indexable:
            print("warning: indexability test failed; Whittle indices unreliable",
                  file=sys.stderr)
    _emit_csv(rows, args.out)


def build_rule(model: RBModel, spec: str, update_period: int = 1):
    """Parse a ``--policy`` string into a decision rule."""
    if model.is_finite:
        sol = relaxation.solve_finite(model)
        if spec == "wf":
            return policies.water_filling_policy(sol, model.alpha, np.zeros_like(sol.y1)), sol
        if spec == "lp-index":
            return policies.lp_index_policy(model, sol), sol
        if spec == "lp-update":
            return policies.lp_update_policy(model, update_period), sol
        if spec.startswith("random-tie:"):
            rng = np.random.default_rng(int(spec.split(":", 1)[1]))
            return policies.random_tie_policy(model, sol, rng), sol
    else:
        sol = relaxation.solve_infinite(model)
        if spec in ("wf", "lp-index", "lp-priority"):
            tab = indices.infinite_lp_indices(model, sol)
            return policies.lp_priority_policy_infinite(model, sol, tab), sol
        if spec == "whittle":
            return policies.whittle_policy(model, indices.whittle_indices(model)), sol
    if spec.startswith("priority:"):
        order = [int(s) for s in spec.split(":", 1)[1].split(",")]
        if sorted(order) != list(range(model.d)):
            raise SystemExit("priority order must be a permutation of 0..d-1")
        return policies.priority_policy(order, model.alpha), sol
    raise SystemExit(f"unknown policy {spec!r}")


def cmd_simulate(args):
    model = _load(args.model)
    rule, sol = build_rule(model, args.policy, args.update_period)
    rows = []
    for n in args.n:
        if model.is_finite:
            est = simulate.simulate_policy(model, rule, n, args.replications, args.seed).estimate
            vmin = relaxation.solve_finite_min(model).value
            try:
                sc = experiments.score(est.mean, sol.value, vmin)
            except experiments.UndefinedScore:
                sc = ""
        else:
            est = simulate.simulate_policy_infinite(model, rule, n, args.burn_in, args.horizon,
                                                    args.replications, args.seed).estimate
            sc = ""
        rows.append({"n": n, "policy": args.policy, "mean": est.mean,
                     "ci_half_width": est.half_width, "v_rel": sol.value, "score": sc})
    _emit_csv(rows, args.out)


def cmd_oracle(args):
    model = _load(args.model)
    value = simulate.exact_oracle(model, args.n)
    _emit_json({"n": args.n, "oracle": value,
                "v_rel": relaxation.solve_finite(model).value}, args.out)


def cmd_ugap(args):
    model = _load(args.model)
    rule, sol = build_rule(model, args.policy)
    rep = simulate.ugap_check(model, rule, sol.m_star, args.grid_size, args.t_max,
                              args.epsilon, args.seed)
    _emit_json(rep.to_dict(), args.out)


def cmd_lemma1(args):
    model = _load(args.model)
    rule, _ = build_rule(model, args.policy)
    out = [simulate.lemma1_statistics(model, rule, n, args.samples, args.seed).to_dict()
           for n in args.n]
    _emit_json(out, args.out)


def cmd_experiment(args):
    rows, cfg = experiments.run_experiment(args.name, args.seed, args.out, args.full,
                                           args.replications, args.workers,
                                           plot=not args.no_plot)
    print(f"wrote {len(rows)} rows to {args.out}/results.csv")
    for line in cfg["summary"]:
        print(json.dumps(line))


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpbandit",
                                description="LP relaxations and LP-based policies for restless bandits")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("make-model", help="write a built-in model as JSON")
    q.add_argument("kind", choices=["random", "degenerate", "screening", "identity"])
    q.add_argument("--d", type=int, default=10)
    q.add_argument("--T", type=int, default=20)
    q.add_argument("--infinite", action="store_true")
    q.add_argument("--alpha", type=float, default=0.5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--params", type=float, nargs=4, default=[0.1, 0.8, 0.9, 0.1],
                   metavar=("P1", "P2", "Q1", "Q2"))
    q.add_argument("--out")
    q.set_defaults(func=cmd_make_model)

    q = sub.add_parser("solve-lp", help="solve the LP relaxation, print JSON")
    q.add_argument("--model", required=True)
    q.add_argument("--min", action="store_true", help="minimize instead of maximize")
    q.add_argument("--infinite", action="store_true")
    q.add_argument("--method", choices=["simplex", "highs"], default="simplex")
    q.add_argument("--out")
    q.set_defaults(func=cmd_solve_lp)

    q = sub.add_parser("indices", help="LP (and Whittle) indices as CSV")
    q.add_argument("--model", required=True)
    q.add_argument("--whittle", action="store_true")
    q.add_argument("--out")
    q.set_defaults(func=cmd_indices)

    q = sub.add_parser("simulate", help="Monte-Carlo value of a policy")
    q.add_argument("--model", required=True)
    q.add_argument("--policy", default="lp-index",
                   help="wf | lp-index | lp-update | priority:<s0,s1,..> | random-tie:<seed>"
                        " | whittle (infinite horizon)")
    q.add_argument("--update-period", type=int, default=1)
    q.add_argument("--n", type=int, nargs="+", default=[100])
    q.add_argument("--replications", type=int, default=1000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--burn-in", type=int, default=200)
    q.add_argument("--horizon", type=int, default=1000)
    q.add_argument("--out")
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("oracle", help="exact optimal value for a tiny instance")
    q.add_argument("--model", required=True)
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--out")
    q.set_defaults(func=cmd_oracle)

    q = sub.add_parser("ugap-check", help="test the global attractor property")
    q.add_argument("--model", required=True)
    q.add_argument("--policy", default="lp-priority")
    q.add_argument("--grid-size", type=int, default=100)
    q.add_argument("--t-max", type=int, default=10_000)
    q.add_argument("--epsilon", type=float, default=1e-6)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_ugap)

    q = sub.add_parser("lemma1", help="one-step error statistics")
    q.add_argument("--model", required=True)
    q.add_argument("--policy", default="lp-index")
    q.add_argument("--n", type=int, nargs="+", default=[10, 100, 1000])
    q.add_argument("--samples", type=int, default=100_000)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out")
    q.set_defaults(func=cmd_lemma1)

    q = sub.add_parser("experiment", help="run a numerical study")
    q.add_argument("name", choices=list(experiments.EXPERIMENTS))
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.add_argument("--full", action="store_true", help="larger, slower settings")
    q.add_argument("--replications", type=int)
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--no-plot", action="store_true")
    q.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
