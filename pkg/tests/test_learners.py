import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infostab.errors import ArgumentError, DomainError
from infostab.games import DecisionSet
from infostab.geometry import Potential
from infostab.learners import (
    FTRL,
    MD,
    audit_regret_bound,
    diameter,
    ftrl_solve,
    ftrl_step,
    init,
    kkt_residual,
    md_step,
    run_trajectory,
    simplex_argmin,
)

POTENTIALS = [Potential.negentropy(), Potential.log_barrier(), Potential.neg_sqrt(), Potential.tsallis(0.5)]


def dset_for(pot, d):
    return DecisionSet.clipped_simplex(d, 0.01) if pot.kind == "logbarrier" else DecisionSet.simplex(d)


def iw_stream(rng, n, d, runs):
    """Nonnegative importance-weighted style estimates: one nonzero coordinate per round."""
    arms = rng.integers(0, d, size=(runs, n))
    vals = rng.uniform(0, 1, size=(runs, n)) / rng.uniform(0.05, 1, size=(runs, n))
    out = np.zeros((runs, n, d))
    np.put_along_axis(out, arms[..., None], vals[..., None], axis=-1)
    return out


@pytest.mark.parametrize("pot", [Potential.negentropy(), Potential.neg_sqrt()], ids=str)
def test_init_simplex_uniform(pot):
    np.testing.assert_allclose(init(pot, DecisionSet.simplex(4)).q, 0.25, atol=1e-14)


def test_init_logbarrier_clipped_uniform():
    np.testing.assert_allclose(init(Potential.log_barrier(), DecisionSet.clipped_simplex(3, 0.01)).q, 1 / 3, atol=1e-14)


def test_init_logbarrier_unclipped_rejected():
    with pytest.raises(DomainError):
        init(Potential.log_barrier(), DecisionSet.simplex(3))


def test_unsupported_decision_set():
    with pytest.raises(DomainError):
        init(Potential.negentropy(), DecisionSet.explicit([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))


@pytest.mark.parametrize("pot", POTENTIALS, ids=str)
def test_md_zero_loss_is_fixed_point(pot):
    s = init(pot, dset_for(pot, 3))
    s = md_step(s, [0.3, 0.1, 0.0])
    s2 = md_step(s, np.zeros(3))
    np.testing.assert_allclose(s2.q, s.q, atol=1e-13)


def test_md_exponential_weights_value():
    s = md_step(init(Potential.negentropy(), DecisionSet.simplex(2), eta=1.0), [1.0, 0.0])
    np.testing.assert_allclose(s.q, [0.268941, 0.731059], atol=1e-6)
    np.testing.assert_allclose(s.q, [math.exp(-1) / (1 + math.exp(-1)), 1 / (1 + math.exp(-1))], atol=1e-15)


@pytest.mark.parametrize("pot", POTENTIALS, ids=str)
def test_md_shift_invariance(pot):
    s = md_step(init(pot, dset_for(pot, 3), eta=0.5), [0.2, 0.7, 0.1])
    a = md_step(s, [0.5, 0.0, 0.9]).q
    b = md_step(s, np.array([0.5, 0.0, 0.9]) + 3.0).q
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_md_rejects_changing_rate():
    s = init(Potential.negentropy(), DecisionSet.simplex(2), eta=0.5)
    with pytest.raises(ArgumentError):
        md_step(s, [1.0, 0.0], eta=0.25)
    with pytest.raises(ArgumentError):
        run_trajectory(Potential.negentropy(), DecisionSet.simplex(2), MD, [0.5, 0.4], np.zeros((2, 2)))


def test_ftrl_empty_history_equals_init():
    s = init(Potential.neg_sqrt(), DecisionSet.simplex(3), mode=FTRL, eta=0.3)
    np.testing.assert_allclose(ftrl_solve(s), s.q)


def test_ftrl_softmax():
    L = np.array([1.5, 0.2, 2.0, 0.0])
    eta = 0.7
    s = init(Potential.negentropy(), DecisionSet.simplex(4), mode=FTRL, eta=eta)
    s = ftrl_step(s, L)
    w = np.exp(-eta * L)
    np.testing.assert_allclose(s.q, w / w.sum(), atol=1e-14)


def test_ftrl_rejects_increasing_rate():
    s = init(Potential.negentropy(), DecisionSet.simplex(2), mode=FTRL, eta=0.3)
    with pytest.raises(ArgumentError):
        ftrl_step(s, [1.0, 0.0], 0.5)


@pytest.mark.parametrize("pot", POTENTIALS, ids=str)
@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_clipped_pinning_matches_grid(pot, eps):
    # d = 2: q = (x, 1 - x) with x in [eps, 1 - eps]
    theta = np.array([-3.0, 1.0])
    q = simplex_argmin(pot, theta, eps)
    x = np.linspace(eps, 1 - eps, 200_001)
    obj = pot.f(x) + pot.f(1 - x) - theta[0] * x - theta[1] * (1 - x)
    xb = x[np.argmin(obj)]
    assert q[0] == pytest.approx(xb, abs=1e-5)
    if xb == eps:
        assert q[0] == eps


@pytest.mark.parametrize("pot", POTENTIALS, ids=str)
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 50.0), eps=st.sampled_from([0.0, 0.001, 0.05]))
def test_argmin_kkt(pot, seed, scale, eps):
    if eps == 0 and pot.kind == "logbarrier":
        eps = 0.001
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=(20, 6)) * scale
    q = simplex_argmin(pot, theta, eps)
    assert np.all(q >= eps)
    assert kkt_residual(pot, q, theta, eps).max() <= 1e-10


def test_md_and_ftrl_coincide_for_exponential_weights():
    rng = np.random.default_rng(2)
    losses = rng.uniform(-1, 3, size=(5, 50, 4))
    pot = Potential.negentropy()
    D = DecisionSet.simplex(4)
    a = run_trajectory(pot, D, MD, 0.3, losses)
    b = run_trajectory(pot, D, FTRL, 0.3, losses)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_batched_trajectory_matches_state_api():
    rng = np.random.default_rng(3)
    losses = rng.uniform(0, 2, size=(10, 3))
    etas = np.linspace(0.5, 0.2, 10)
    pot = Potential.neg_sqrt()
    D = DecisionSet.simplex(3)
    qs = run_trajectory(pot, D, FTRL, etas, losses)
    s = init(pot, D, mode=FTRL, eta=etas[0])
    for t in range(10):
        np.testing.assert_allclose(qs[t], s.q, atol=1e-13)
        if t + 1 < 10:
            s = ftrl_step(s, losses[t], etas[t + 1])


def test_negsqrt_simplex_diameter():
    for d in [2, 3, 5, 10]:
        diam = diameter(Potential.neg_sqrt(), DecisionSet.simplex(d))
        assert diam == pytest.approx(2 * math.sqrt(d) - 2, abs=1e-12)
        assert diam <= 2 * math.sqrt(d)


def test_negentropy_simplex_diameter():
    assert diameter(Potential.negentropy(), DecisionSet.simplex(5)) == pytest.approx(math.log(5), abs=1e-12)


def test_logbarrier_clipped_diameter():
    d, eps = 3, 0.01
    expected = -2 * math.log(eps) - math.log(1 - (d - 1) * eps) - d * math.log(d)
    assert diameter(Potential.log_barrier(), DecisionSet.clipped_simplex(d, eps)) == pytest.approx(expected)


def test_audit_zero_losses():
    pot = Potential.negentropy()
    D = DecisionSet.simplex(3)
    qs = np.full((10, 3), 1 / 3)
    res = audit_regret_bound(pot, D, qs, 0.5, np.zeros((10, 3)))
    assert res.lhs == pytest.approx(0.0, abs=1e-15)
    assert res.rhs == pytest.approx(math.log(3) / 0.5)
    assert res.holds


@pytest.mark.parametrize("pot", POTENTIALS, ids=str)
@pytest.mark.parametrize("mode", [MD, FTRL])
def test_audit_holds_on_random_runs(pot, mode):
    rng = np.random.default_rng(11)
    runs, n, d = 100, 100, 3
    D = dset_for(pot, d)
    losses = iw_stream(rng, n, d, runs)
    if mode == MD:
        etas = np.full((runs, n), 0.1)
    else:
        etas = 0.5 / np.sqrt(np.arange(1, n + 1))
    qs = run_trajectory(pot, D, mode, etas, losses)
    res = audit_regret_bound(pot, D, qs, etas, losses)
    assert res.holds.all()
    assert np.all(np.isfinite(res.rhs))
