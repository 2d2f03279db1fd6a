"""Randomized property checks with hypothesis."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from lpbandit.model import RBModel, random_model, validate
from lpbandit.policies import (OccupationVector, check_admissible, priority_rule,
                               randomized_round, water_filling_rule)
from lpbandit.relaxation import solve_finite
from lpbandit.simulate import phi

seeds = st.integers(0, 2**31 - 1)


def _simplex(seed, d):
    return np.random.default_rng(seed).dirichlet(np.ones(d))


@given(seeds, st.integers(2, 8), st.floats(0.05, 0.95))
def test_priority_admissible(seed, d, alpha):
    m = _simplex(seed, d)
    sigma = np.random.default_rng(seed + 1).permutation(d)
    assert check_admissible(priority_rule(sigma, alpha, m), m, alpha)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 6), st.integers(1, 4))
def test_water_filling_admissible(seed, d, T):
    model = random_model(d, T, seed % 1000)
    sol = solve_finite(model)
    t = seed % T
    m = _simplex(seed, d)
    y = water_filling_rule(sol.partitions[t], sol.y1[t], m, model.alpha)
    assert check_admissible(y, m, model.alpha)


@given(seeds, st.integers(2, 6))
def test_phi_mass_and_linearity(seed, d):
    rng = np.random.default_rng(seed)
    p0, p1 = rng.dirichlet(np.ones(d), size=(2, d))
    y = OccupationVector(rng.random(d), rng.random(d))
    z = OccupationVector(rng.random(d), rng.random(d))
    a, b = rng.normal(size=2)
    combo = OccupationVector(a * y.y1 + b * z.y1, a * y.y0 + b * z.y0)
    assert np.allclose(phi(p0, p1, combo), a * phi(p0, p1, y) + b * phi(p0, p1, z),
                       atol=1e-12)
    assert abs(phi(p0, p1, y).sum() - y.total) <= 1e-12


@given(seeds, st.integers(2, 6), st.integers(1, 80))
def test_rounding_contract(seed, d, n):
    rng = np.random.default_rng(seed)
    counts = np.bincount(rng.integers(0, d, n), minlength=d)
    alpha = float(rng.uniform(0.05, 0.95))
    m = counts / n
    y = priority_rule(rng.permutation(d), alpha, m)
    out = randomized_round(y.y1, counts, rng)
    lo = int(np.floor(alpha * n + 1e-9))
    assert out.budget_used in (lo, lo + 1)
    assert (out.activations <= counts).all() and (out.activations >= 0).all()
    assert (np.abs(out.activations - n * y.y1) < 1 + 1e-9).all()


@given(seeds)
def test_json_round_trip(seed):
    m = random_model(3, 2, seed)
    assert RBModel.from_json(m.to_json()) == m
    assert validate(m).ok
