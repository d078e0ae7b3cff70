import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infostab.adversaries import (
    FixedSequence,
    IIDStochastic,
    adversary_from_dict,
    crafted_hard_sequence,
    match_outcomes,
    run_rng,
    sample_action,
    worst_case_bandit,
)
from infostab.errors import ArgumentError
from infostab.games import build_standard


def test_run_rng_streams_differ_by_run_and_repeat():
    a = run_rng(3, 0).random(5)
    np.testing.assert_array_equal(a, run_rng(3, 0).random(5))
    assert not np.array_equal(a, run_rng(3, 1).random(5))
    assert not np.array_equal(a, run_rng(4, 0).random(5))


def test_sample_action_inverse_cdf():
    p = np.array([0.2, 0.5, 0.3])
    assert [int(sample_action(p, u)) for u in (0.0, 0.19, 0.2, 0.69, 0.7, 0.999)] == [0, 0, 1, 1, 2, 2]


def test_sample_action_skips_zero_mass():
    p = np.array([0.0, 1.0, 0.0])
    assert all(int(sample_action(p, u)) == 1 for u in np.linspace(0, 0.999, 50))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_sample_action_frequencies(seed):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(4))
    draws = sample_action(np.broadcast_to(p, (20000, 4)), rng.random(20000))
    freq = np.bincount(draws, minlength=4) / 20000
    assert np.max(np.abs(freq - p)) < 0.02


def test_fixed_sequence_cycles():
    adv = FixedSequence([(0.0, 1.0), (1.0, 0.0)])
    np.testing.assert_array_equal(adv.losses(5, 2), [[0, 1], [1, 0], [0, 1], [1, 0], [0, 1]])
    game = build_standard("armed_bandit", d=2)
    np.testing.assert_array_equal(adv.outcomes_for(game, 3), [1, 2, 1])


def test_fixed_ids_and_errors():
    game = build_standard("armed_bandit", d=2)
    np.testing.assert_array_equal(FixedSequence([3, 0]).outcomes_for(game, 3), [3, 0, 3])
    with pytest.raises(ArgumentError):
        FixedSequence([7]).outcomes_for(game, 2)
    with pytest.raises(ArgumentError):
        FixedSequence([])
    with pytest.raises(ArgumentError):
        FixedSequence([(0.0, 1.0, 0.0)]).losses(2, 2)


def test_iid_is_oblivious_and_seeded():
    adv = IIDStochastic(means=(0.1, 0.9))
    a = adv.losses(1000, 2, run_rng(1))
    np.testing.assert_array_equal(a, adv.losses(1000, 2, run_rng(1)))
    assert abs(a[:, 0].mean() - 0.1) < 0.05 and abs(a[:, 1].mean() - 0.9) < 0.05


def test_iid_probs_over_outcomes():
    game = build_standard("armed_bandit", d=2)
    z = IIDStochastic(probs=(0.0, 1.0, 0.0, 0.0)).outcomes_for(game, 20, run_rng(0))
    assert np.all(z == 1)
    with pytest.raises(ArgumentError):
        IIDStochastic(probs=(0.5, 0.5)).outcomes_for(game, 2, run_rng(0))
    with pytest.raises(ArgumentError):
        IIDStochastic()
    with pytest.raises(ArgumentError):
        IIDStochastic(means=(1.5,))


def test_worst_case_means():
    adv = worst_case_bandit(4, 0.1, best=2)
    np.testing.assert_allclose(adv.means, [0.5, 0.5, 0.4, 0.5])
    with pytest.raises(ArgumentError):
        worst_case_bandit(3, 0.1, best=3)


def test_crafted_sequence_is_frozen():
    a = crafted_hard_sequence(5, 400)
    b = crafted_hard_sequence(5, 400)
    assert a == b and len(a.outcomes) == 400
    seq = a.losses(400, 5)
    # same sequence for every run's generator
    np.testing.assert_array_equal(seq, a.losses(400, 5, run_rng(9, 3)))
    assert set(np.unique(seq)) <= {0.0, 1.0}
    assert seq[:, -1].sum() < seq[:, 0].sum()


def test_match_outcomes_rejects_unknown():
    game = build_standard("armed_bandit", d=2)
    np.testing.assert_array_equal(match_outcomes(game, [[1.0, 1.0], [0.0, 0.0]]), [3, 0])
    with pytest.raises(ArgumentError):
        match_outcomes(game, [[0.5, 0.0]])


def test_adversary_from_dict():
    assert adversary_from_dict({"kind": "bernoulli", "mean": 0.2}, d=3).means == (0.2, 0.2, 0.2)
    assert adversary_from_dict({"kind": "worst_case", "gap": 0.2}, d=2).means == (0.3, 0.5)
    assert adversary_from_dict({"kind": "fixed", "outcomes": [0, 1]}).by_index
    assert len(adversary_from_dict({"kind": "crafted"}, d=3, n=50).outcomes) == 50
    with pytest.raises(ArgumentError):
        adversary_from_dict({"kind": "adaptive"}, d=2)
