import itertools
import json

import numpy as np
import pytest

from infostab.errors import ArgumentError, ValidationError
from infostab.games import (
    DecisionSet,
    Game,
    build_standard,
    canonical_token,
    epsilon_D,
    game_from_dict,
    game_to_dict,
    load_game,
    outcome_grid,
    save_game,
    validate,
)

BINARY2 = [[0, 0], [1, 0], [0, 1], [1, 1]]


def brute_epsilon(game, dset, steps=400):
    """Grid search over mixtures of the vertices (two-vertex sets only)."""
    V = dset.vertices
    best = -np.inf
    for a in range(game.k):
        inner = np.inf
        for t in np.linspace(0, 1, steps + 1):
            b = t * V[0] + (1 - t) * V[1]
            inner = min(inner, np.max(game.losses @ (b - game.actions[a])))
        best = max(best, inner)
    return best


def test_bandit_two_arms():
    g = build_standard("armed_bandit", d=2, outcomes=BINARY2)
    assert g.k == 2 and g.m == 4
    np.testing.assert_array_equal(g.actions, np.eye(2))
    for a in range(2):
        for z, row in enumerate(BINARY2):
            assert g.signal(a, z) == row[a]
    assert g.signals[0, 0] == g.signals[0, 2]
    assert g.signals[0, 0] != g.signals[0, 1]


def test_full_information_two_arms():
    g = build_standard("full_information", d=2, outcomes=BINARY2)
    for a in range(2):
        for z, row in enumerate(BINARY2):
            assert g.signal(a, z) == tuple(row)
    assert len(g.alphabet) == 4


def test_graph_feedback_neighbours():
    g = build_standard("graph_feedback", d=3, neighbors=[[0, 1], [1], [2, 0]])
    z = 5  # outcome (1, 0, 1)
    np.testing.assert_array_equal(g.losses[z], [1, 0, 1])
    assert g.signal(0, z) == ((0, 1), (1, 0))
    assert g.signal(1, z) == ((1, 0),)
    assert g.signal(2, z) == ((0, 1), (2, 1))


def test_finite_matrix_game():
    L = [[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]
    H = [["a", "b"], ["a", "b"], ["c", "c"]]
    g = build_standard("finite_matrix", loss_matrix=L, signal_matrix=H)
    np.testing.assert_allclose(g.loss_table, L)
    assert g.signal(2, 0) == g.signal(2, 1) == "c"


def test_finite_matrix_rejects_large_loss():
    with pytest.raises(ValidationError) as exc:
        build_standard("finite_matrix", loss_matrix=[[0.0, 1.5], [1.0, 0.0]], signal_matrix=[[0, 0], [0, 0]])
    assert exc.value.assumption == "bounded_losses"
    assert exc.value.witness[:2] == (0, 1)


def test_build_rejects_small_d():
    with pytest.raises(ValidationError):
        build_standard("armed_bandit", d=1)


def test_validate_pass_and_failures():
    assert validate(build_standard("armed_bandit", d=3)).ok
    single = Game(np.eye(2)[:1], [[0.0, 1.0]], [[0]], (0,))
    rep = validate(single)
    assert [c.name for c in rep.failures] == ["finite_actions"]
    bad = Game(np.eye(2), [[0.2, 1.3]], [[0], [0]], (0,))
    rep = validate(bad)
    assert rep.failures[0].name == "bounded_losses"
    assert rep.failures[0].witness[:2] == (1, 0)


@pytest.mark.parametrize("kind", ["armed_bandit", "full_information"])
@pytest.mark.parametrize("d", [2, 3, 4])
def test_standard_games_validate(kind, d):
    assert validate(build_standard(kind, d=d, outcomes=3 if d < 4 else 2)).ok


def test_epsilon_conv_hull_nonpositive():
    rng = np.random.default_rng(0)
    for _ in range(20):
        k, m = rng.integers(2, 5), rng.integers(1, 6)
        L = rng.uniform(0, 1, size=(k, m))
        g = build_standard("finite_matrix", loss_matrix=L, signal_matrix=np.zeros((k, m), int))
        assert epsilon_D(g, DecisionSet.conv_hull(g)) <= 1e-12


def test_epsilon_single_outcome_uniform_losses():
    g = build_standard("finite_matrix", loss_matrix=[[0.4], [0.4], [0.4]], signal_matrix=[[0], [0], [0]])
    assert epsilon_D(g, DecisionSet.conv_hull(g)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_epsilon_clipped_bandit_bound(d, eps):
    g = build_standard("armed_bandit", d=d)
    assert g.m <= 16
    val = epsilon_D(g, DecisionSet.clipped_simplex(d, eps))
    assert val <= d * eps + 1e-12
    # for binary outcomes the worst case is a loss vector e_a with the rest zero:
    # any b in P_eps pays at least (d - 1) eps there
    assert val == pytest.approx((d - 1) * eps, abs=1e-9)


@pytest.mark.parametrize("eps", [0.02, 0.1, 0.3])
def test_epsilon_matches_brute_force(eps):
    g = build_standard("armed_bandit", d=2, outcomes=5)
    dset = DecisionSet.clipped_simplex(2, eps)
    assert epsilon_D(g, dset) == pytest.approx(brute_epsilon(g, dset), abs=1e-6)


def test_clipped_simplex_vertices():
    D = DecisionSet.clipped_simplex(3, 0.1)
    np.testing.assert_allclose(D.vertices.sum(axis=1), 1.0)
    np.testing.assert_allclose(D.vertices[0], [0.8, 0.1, 0.1])
    assert D.simplex_eps == 0.1
    assert DecisionSet.simplex(3).simplex_eps == 0.0
    assert D.contains([0.2, 0.3, 0.5]) and not D.contains([0.05, 0.45, 0.5])
    with pytest.raises(ArgumentError):
        DecisionSet.clipped_simplex(3, 0.4)


def test_explicit_contains():
    D = DecisionSet.explicit([[0, 0], [1, 0], [0, 1]])
    assert D.simplex_eps is None
    assert D.contains([0.2, 0.3]) and not D.contains([0.8, 0.4])


def test_canonical_tokens():
    assert canonical_token(1.0) == 1 and canonical_token(-0.0) == 0
    assert canonical_token([0.1 + 0.2, [1, 2.0]]) == (0.3, (1, 2))


@pytest.mark.parametrize("suffix", [".json", ".yaml"])
@pytest.mark.parametrize("kind", ["armed_bandit", "full_information", "graph_feedback"])
def test_game_document_round_trip(tmp_path, suffix, kind):
    rng = np.random.default_rng(1)
    z = rng.uniform(0, 1, size=(5, 3))
    g = build_standard(kind, d=3, outcomes=z, neighbors=[[0, 1], [1, 2], [2]])
    path = tmp_path / f"game{suffix}"
    save_game(g, path)
    h = load_game(path)
    np.testing.assert_allclose(h.losses, g.losses, atol=1e-12)
    np.testing.assert_array_equal(h.signals, g.signals)
    assert h.alphabet == g.alphabet


def test_game_document_shorthand():
    doc = {"actions": np.eye(2).tolist(), "outcomes": BINARY2, "signals": "bandit"}
    g = game_from_dict(json.loads(json.dumps(doc)))
    ref = build_standard("armed_bandit", d=2, outcomes=BINARY2)
    np.testing.assert_array_equal(g.signals, ref.signals)
    g = game_from_dict({**doc, "signals": "full"})
    assert len(g.alphabet) == 4
    g = game_from_dict({"kind": "bandit", "d": 3, "levels": 3})
    assert g.m == 27
    with pytest.raises(ValidationError):
        game_from_dict({"actions": [[1, 0]], "signals": "full"})


def test_outcome_grid_order():
    grid = outcome_grid(2, 2)
    np.testing.assert_array_equal(grid, [[0, 0], [0, 1], [1, 0], [1, 1]])
    assert len(outcome_grid(3, 3)) == 27
    assert list(itertools.chain(*game_to_dict(build_standard("bandit", d=2))["signals"])) == [0, 0, 1, 1, 0, 1, 0, 1]
