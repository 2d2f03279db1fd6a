import numpy as np
import pytest

from lpbandit.lp_core import certificate
from lpbandit.model import RBModel, degenerate_example, identity_example, random_model
from lpbandit.relaxation import (Partition, classify, finite_lp, solve_finite,
                                 solve_finite_min, solve_infinite)


def _check_finite_invariants(model, sol):
    T = model.horizon
    assert np.allclose(sol.y1.sum(axis=1), model.alpha, atol=1e-8)
    assert np.allclose(sol.m_star[0], model.m0, atol=1e-8)
    for t in range(T - 1):
        p0, p1 = model.kernels(t)
        nxt = sol.y0[t] @ p0 + sol.y1[t] @ p1
        assert np.allclose(sol.m_star[t + 1], nxt, atol=1e-8)


def test_identity_example_solution():
    model = identity_example(4)
    sol = solve_finite(model)
    assert sol.value == pytest.approx(2.0)
    assert np.allclose(sol.y1[:, 0], 0.5)
    c = classify(sol)
    assert c.zero_sizes == (0, 0, 0, 0)
    assert "rankable-witness" in c.verdicts() and "degenerate-witness" in c.verdicts()


def test_degenerate_example_solution():
    sol = solve_finite(degenerate_example(0.1, 0.8, 0.9, 0.1).model)
    assert sol.value == pytest.approx(0.7333333333333, abs=1e-8)
    c = classify(sol)
    assert c.zero_sizes == (2, 0)
    assert c.degenerate_witness and not c.rankable_witness


def test_highs_agrees_on_random_models():
    for seed in range(5):
        model = random_model(6, 8, seed)
        a = solve_finite(model)
        b = solve_finite(model, method="highs")
        assert a.value == pytest.approx(b.value, abs=1e-9)
        _check_finite_invariants(model, a)


def test_min_below_max_and_zero_rewards():
    for seed in range(5):
        model = random_model(5, 6, seed)
        assert solve_finite_min(model).value <= solve_finite(model).value + 1e-12
    z = RBModel(3, 0.4, 3, np.eye(3), np.eye(3), np.zeros(3), np.zeros(3), np.ones(3) / 3)
    assert solve_finite(z).value == pytest.approx(0.0)
    assert solve_finite_min(z).value == pytest.approx(0.0)


def test_total_randomization_bound():
    for seed in range(100):
        sol = solve_finite(random_model(5, 6, seed))
        assert sum(len(p.s_zero) for p in sol.partitions) <= 6


def test_certificates_on_relaxation():
    model = random_model(6, 5, 3)
    sol = solve_finite(model)
    cert = certificate(finite_lp(model), sol.lp_result)
    assert cert["primal_residual"] <= 1e-8 and cert["duality_gap"] <= 1e-7
    assert cert["support"] <= finite_lp(model).A.shape[0]


def test_infinite_uniform_kernel():
    d = 4
    U = np.full((d, d), 1 / d)
    r0 = np.array([0.1, 0.2, 0.3, 0.4])
    model = RBModel(d, 0.25, None, U, U, r0, r0 + 0.5, np.ones(d) / d)
    sol = solve_infinite(model)
    assert sol.value == pytest.approx(r0.mean() + 0.25 * 0.5)
    assert sol.y1.sum() == pytest.approx(0.25)


def test_infinite_two_state_brute_force():
    p0 = np.array([[0.6, 0.4], [0.3, 0.7]])
    p1 = np.array([[0.9, 0.1], [0.5, 0.5]])
    model = RBModel(2, 0.3, None, p0, p1, [0.0, 0.0], [1.0, 0.2], [0.5, 0.5])
    sol = solve_infinite(model)
    assert 0 in sol.partition.s_plus + sol.partition.s_zero
    # brute force: one state fully decided, the other randomized so the budget binds
    r1 = np.array([1.0, 0.2])

    def stationary(act):
        P = (1 - act)[:, None] * p0 + act[:, None] * p1
        w, v = np.linalg.eig(P.T)
        pi = np.real(v[:, np.argmin(np.abs(w - 1))])
        return pi / pi.sum()

    best = -np.inf
    for s in range(2):
        for other in (0.0, 1.0):
            def policy(x):
                return np.array([x, other]) if s == 0 else np.array([other, x])

            def used(x):
                return float((stationary(policy(x)) * policy(x)).sum())

            lo, hi = 0.0, 1.0
            if (used(lo) - 0.3) * (used(hi) - 0.3) > 0:
                continue
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if (used(mid) - 0.3) * (used(lo) - 0.3) > 0:
                    lo = mid
                else:
                    hi = mid
            act = policy(0.5 * (lo + hi))
            best = max(best, float((stationary(act) * act * r1).sum()))
    assert sol.value == pytest.approx(best, abs=1e-9)


def test_infinite_invariants_and_prop2():
    for seed in range(10):
        model = random_model(5, None, seed)
        sol = solve_infinite(model)
        p0, p1 = model.kernels()
        assert sol.y1.sum() == pytest.approx(model.alpha, abs=1e-8)
        assert sol.m_star.sum() == pytest.approx(1.0, abs=1e-8)
        assert np.allclose(sol.y0 @ p0 + sol.y1 @ p1, sol.m_star, atol=1e-8)
        assert len(sol.partition.s_zero) <= 1
        assert solve_infinite(model, method="highs").value == pytest.approx(sol.value, abs=1e-9)


def test_partition_threshold():
    p = Partition.from_occupation([0.5, 1e-10, 0.2, 0.0], [0.0, 0.3, 0.1, 1e-12])
    assert p.s_plus == (0,) and p.s_minus == (1,) and p.s_zero == (2,) and p.s_empty == (3,)
    assert p.label(2) == "0"


def test_non_finite_errors():
    with pytest.raises(ValueError):
        solve_finite(random_model(3, None, 0))
