import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infostab.errors import DomainError, PreconditionError, ZeroProbability
from infostab.estimators import (
    EstimationFn,
    bandit_stability,
    bandit_stability_audit,
    bandit_stability_terms,
    bandit_unbiasedness_residual,
    importance_weighted,
    sqrt2dn_estimator,
    sqrt2dn_fn,
    sqrt2dn_matrix,
    table_from_dict,
    table_to_dict,
    unbiasedness_residual,
)
from infostab.games import build_standard


def full_info_fn(game):
    """g(a, sigma) = sigma / |A| for full information."""
    table = np.zeros((game.k, len(game.alphabet), game.d))
    for s, tok in enumerate(game.alphabet):
        table[:, s] = np.asarray(tok, dtype=float) / game.k
    return EstimationFn(table)


def bandit_iw_fn(game):
    """g(a, sigma) = sigma e_a, the classical importance-weighted numerator."""
    table = np.zeros((game.k, len(game.alphabet), game.d))
    for s, tok in enumerate(game.alphabet):
        for a in range(game.k):
            table[a, s, a] = float(tok)
    return EstimationFn(table)


def test_importance_weighted_zero_and_scaling():
    g = build_standard("armed_bandit", d=3)
    assert np.all(importance_weighted(EstimationFn.zeros(g), [0.2, 0.3, 0.5], 1, 0) == 0)
    fn = bandit_iw_fn(g)
    s = g.signals[2, 1]
    np.testing.assert_allclose(importance_weighted(fn, np.full(3, 1 / 3), 2, s), 3 * fn(2, s))
    with pytest.raises(ZeroProbability):
        importance_weighted(fn, [0.5, 0.5, 0.0], 2, s)


def test_importance_weighting_is_unbiased_in_expectation():
    game = build_standard("armed_bandit", d=3, outcomes=3)
    fn = bandit_iw_fn(game)
    p = np.array([0.2, 0.3, 0.5])
    for z in range(game.m):
        mean = sum(p[a] * importance_weighted(fn, p, a, game.signals[a, z]) for a in range(game.k))
        np.testing.assert_allclose(mean, game.losses[z], atol=1e-14)


def test_full_information_residual_zero():
    game = build_standard("full_information", d=3, outcomes=3)
    rep = unbiasedness_residual(full_info_fn(game), game)
    assert rep.residual == pytest.approx(0.0, abs=1e-15) and rep.ok


def test_zero_estimator_residual_with_witness():
    game = build_standard("armed_bandit", d=2)
    rep = unbiasedness_residual(EstimationFn.zeros(game), game)
    assert rep.residual == pytest.approx(1.0)
    z, b, c = rep.witness
    assert abs(game.loss_table[b, z] - game.loss_table[c, z]) == pytest.approx(1.0)


def test_sqrt2dn_worked_value():
    g = sqrt2dn_estimator(np.array([0.5, 0.5]), 0.1, 0, 1.0)
    # exact rational-plus-sqrt evaluation: h = 1/(1/2 + 1/sqrt 2)
    h = 1.0 / (0.5 + math.sqrt(0.5))
    assert g[0] == pytest.approx(0.5 + 0.1 / 8 * (1 + h) - 0.5 * 0.1 * h / 8, abs=1e-15)
    np.testing.assert_allclose(g, [0.517678, -0.005178], atol=1e-6)


def test_sqrt2dn_vanishes_at_half_small_eta():
    q = np.array([0.1, 0.6, 0.3])
    for a in range(3):
        assert np.max(np.abs(sqrt2dn_estimator(q, 1e-12, a, 0.5))) < 1e-11


def test_sqrt2dn_permutation_symmetry():
    q = np.full(4, 0.25)
    base = sqrt2dn_estimator(q, 0.3, 0, 0.8)
    for a in range(4):
        out = sqrt2dn_estimator(q, 0.3, a, 0.8)
        np.testing.assert_allclose(out, np.roll(base, a), atol=1e-15)


def test_sqrt2dn_rejects_boundary():
    with pytest.raises(DomainError):
        sqrt2dn_estimator(np.array([0.0, 1.0]), 0.1, 0, 0.3)


def test_sqrt2dn_sum_identity():
    rng = np.random.default_rng(0)
    q = rng.dirichlet(np.ones(5), size=1000)
    z = rng.uniform(size=(1000, 5))
    eta = rng.uniform(0.01, 1.4, size=1000)
    total = sqrt2dn_matrix(q, eta, z).sum(axis=-2)
    np.testing.assert_allclose(total, z + (eta / 8 - 0.5)[:, None], atol=1e-13)


def test_sqrt2dn_matrix_matches_scalar_form():
    q = np.array([0.1, 0.2, 0.7])
    z = np.array([0.3, 0.9, 0.0])
    G = sqrt2dn_matrix(q, 0.4, z)
    for a in range(3):
        np.testing.assert_allclose(G[a], sqrt2dn_estimator(q, 0.4, a, z[a]), atol=1e-15)


def test_sqrt2dn_unbiasedness_residual_random():
    rng = np.random.default_rng(1)
    q = rng.dirichlet(np.ones(4))
    rep = bandit_unbiasedness_residual(sqrt2dn_fn(q, 0.2), rng.uniform(size=(2000, 4)))
    assert rep.residual < 1e-10


def test_stability_small_eta_vanishes():
    q = np.array([0.3, 0.7])
    res = bandit_stability_audit(q, np.array([0.5, 0.5]), 1e-8)
    assert res.lhs < 1e-7 and res.holds


def test_stability_closed_form_cross_check():
    q = np.array([0.5, 0.5])
    z = np.array([1.0, 0.0])
    res = bandit_stability_audit(q, z, 1.0)
    A = bandit_stability_terms(q, z, 1.0)
    assert res.lhs == pytest.approx(np.sum(np.sqrt(q) * A), abs=1e-14)
    # frozen from the closed form with exact sqrt(1/2)
    r = math.sqrt(0.5)
    a0 = ((1 + 4 * r) ** 2 / (1 + 4 * r + 4) + (1 - r) / (8 * (r + 1) - 1)) / 8
    a1 = ((1 - 4 * r) ** 2 / (1 - 4 * r + 4) + (1 - r) / (8 * (r + 1) - 1)) / 8
    np.testing.assert_allclose(A, [a0, a1], atol=1e-15)
    assert res.holds and res.rhs == pytest.approx(math.sqrt(2) / 4)


def test_stability_precondition():
    with pytest.raises(PreconditionError):
        bandit_stability_audit([0.5, 0.5], [0.0, 1.0], 1.5)
    with pytest.raises(PreconditionError):
        bandit_stability_audit([0.5, 0.5], [0.0, 1.0], 0.0)
    with pytest.raises(DomainError):
        bandit_stability_audit([0.0, 1.0], [0.0, 1.0], 0.5)


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    d=st.integers(2, 8),
    eta=st.floats(1e-4, math.sqrt(2)),
)
def test_stability_bound_and_terms(seed, d, eta):
    rng = np.random.default_rng(seed)
    q = rng.dirichlet(np.full(d, 0.3))
    q = np.maximum(q, 1e-12)
    q /= q.sum()
    z = rng.uniform(size=d)
    res = bandit_stability_audit(q, z, eta)
    assert res.holds
    assert np.all(bandit_stability_terms(q, z, eta) <= 0.25 + 1e-9)
    # dual domain: 1 + sqrt(q_b) eta g(a)_b / q_a > 0
    G = sqrt2dn_matrix(q, eta, z)
    assert np.all(1 + np.sqrt(q)[None, :] * eta * G / q[:, None] > 0)


def test_stability_terms_exact_rational_check():
    # at q_b = 1/4 the closed form is rational; compare against Fraction arithmetic
    eta = Fraction(1, 2)
    zb = Fraction(1)
    r = Fraction(1, 2)
    u = 2 * zb - 1
    expected = ((eta + 4 * u * r) ** 2 / (eta**2 + 4 * eta * u * r + 8 * r * r) + eta**2 * (1 - r) / (8 * (r + 1) - eta**2)) / 8
    got = bandit_stability_terms(np.array([0.25, 0.75]), np.array([1.0, 0.0]), 0.5)[0]
    assert got == pytest.approx(float(expected), abs=1e-15)


def test_stability_batched_equals_loop():
    rng = np.random.default_rng(4)
    q = rng.dirichlet(np.ones(3), size=5)
    z = rng.uniform(size=(5, 3))
    eta = rng.uniform(0.1, 1.0, size=5)
    batched = bandit_stability(q, z, eta)
    for i in range(5):
        assert batched[i] == pytest.approx(float(bandit_stability(q[i], z[i], eta[i])), rel=1e-14)


def test_table_round_trip():
    game = build_standard("graph_feedback", d=3, neighbors=[[0, 1], [1], [2]], outcomes=2)
    rng = np.random.default_rng(5)
    g = EstimationFn(rng.normal(size=(game.k, len(game.alphabet), game.d)))
    doc = table_to_dict(g, game)
    h = table_from_dict(doc, game)
    for a in range(game.k):
        for s in set(game.signals[a].tolist()):
            np.testing.assert_allclose(h(a, s), g(a, s))
