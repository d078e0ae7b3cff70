"""Finite linear partial monitoring games and decision sets.

A game is stored densely: ``actions`` is ``(k, d)``, ``losses`` is ``(m, d)``
with row ``j`` equal to the loss vector of outcome ``j``, and ``signals`` is a
``(k, m)`` integer table indexing into ``alphabet``. Signal tokens are
canonicalized so that equal observations compare equal exactly.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import linprog

from .errors import ArgumentError, ValidationError

LOSS_TOL = 1e-12


def canonical_token(token):
    """Hashable, exact-match representation of a signal."""
    if isinstance(token, (list, tuple, np.ndarray)):
        return tuple(canonical_token(t) for t in token)
    if isinstance(token, (bool, np.bool_)):
        return bool(token)
    if isinstance(token, (int, np.integer)):
        return int(token)
    if isinstance(token, (float, np.floating)):
        x = round(float(token), 12)
        # collapse integral floats and -0.0 so JSON round trips compare equal
        return int(x) if x.is_integer() else x
    return token


def outcome_grid(d, levels=2):
    """All vectors in ``{0, 1/(levels-1), ..., 1}^d``, in lexicographic order."""
    if levels < 2:
        raise ArgumentError("outcome grid needs at least two levels")
    vals = np.linspace(0.0, 1.0, levels)
    return np.array(list(itertools.product(vals, repeat=d)), dtype=float)


@dataclass(frozen=True)
class Game:
    actions: np.ndarray
    losses: np.ndarray
    signals: np.ndarray
    alphabet: tuple
    name: str = "game"

    def __post_init__(self):
        actions = np.atleast_2d(np.asarray(self.actions, dtype=float))
        losses = np.atleast_2d(np.asarray(self.losses, dtype=float))
        signals = np.asarray(self.signals, dtype=np.int64)
        if actions.shape[1] != losses.shape[1]:
            raise ValidationError("actions and loss vectors differ in dimension", assumption="shape")
        if signals.shape != (actions.shape[0], losses.shape[0]):
            raise ValidationError("signal table must be |A| x |Z|", assumption="shape")
        if signals.size and (signals.min() < 0 or signals.max() >= len(self.alphabet)):
            raise ValidationError("signal id outside the alphabet", assumption="signals")
        for arr in (actions, losses, signals):
            arr.setflags(write=False)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "signals", signals)
        object.__setattr__(self, "alphabet", tuple(self.alphabet))

    @property
    def k(self):
        return self.actions.shape[0]

    @property
    def m(self):
        return self.losses.shape[0]

    @property
    def d(self):
        return self.actions.shape[1]

    @property
    def loss_table(self):
        """``(k, m)`` matrix of ``<a, l(z)>``."""
        return self.actions @ self.losses.T

    def signal(self, a, z):
        return self.alphabet[self.signals[a, z]]

    def is_simplex_game(self):
        """Whether the actions are exactly the standard basis of ``R^d``."""
        return self.k == self.d and np.array_equal(self.actions, np.eye(self.d))

    @classmethod
    def from_tokens(cls, actions, losses, tokens, name="game"):
        """Build from a ``|A| x |Z|`` nested list of raw signal tokens."""
        alphabet = {}
        ids = []
        for row in tokens:
            out = []
            for tok in row:
                tok = canonical_token(tok)
                out.append(alphabet.setdefault(tok, len(alphabet)))
            ids.append(out)
        return cls(actions, losses, np.array(ids, dtype=np.int64).reshape(len(ids), -1), tuple(alphabet), name)


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: object = None


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def raise_if_failed(self):
        if not self.ok:
            c = self.failures[0]
            raise ValidationError(f"assumption {c.name} violated: {c.detail}", assumption=c.name, witness=c.witness)


def validate(game: Game) -> ValidationReport:
    """Check the finite-action, bounded-loss and signal-alphabet assumptions."""
    report = ValidationReport()
    k = game.k
    report.checks.append(AssumptionCheck(
        "finite_actions", 1 < k < np.inf and np.all(np.isfinite(game.actions)),
        f"|A| = {k}", witness=k if k <= 1 else None,
    ))
    table = game.loss_table
    bad = np.argwhere(~((table >= -LOSS_TOL) & (table <= 1 + LOSS_TOL)))
    witness = None
    if len(bad):
        a, z = (int(i) for i in bad[0])
        witness = (a, z, float(table[a, z]))
    report.checks.append(AssumptionCheck(
        "bounded_losses", len(bad) == 0,
        "all <a, l(z)> in [0, 1]" if not len(bad) else f"<a{witness[0]}, l(z{witness[1]})> = {witness[2]}",
        witness=witness,
    ))
    ok = game.signals.size == 0 or (game.signals.min() >= 0 and game.signals.max() < len(game.alphabet))
    report.checks.append(AssumptionCheck("signals_in_alphabet", bool(ok), f"|Sigma| = {len(game.alphabet)}"))
    return report


# -- standard games -----------------------------------------------------------

def _as_outcomes(d, outcomes):
    if outcomes is None:
        return outcome_grid(d, 2)
    if isinstance(outcomes, (int, np.integer)):
        return outcome_grid(d, int(outcomes))
    out = np.atleast_2d(np.asarray(outcomes, dtype=float))
    if out.shape[1] != d:
        raise ValidationError(f"outcomes must have {d} columns", assumption="shape")
    return out


def _checked(game):
    validate(game).raise_if_failed()
    return game


def full_information(d, outcomes=None):
    z = _as_outcomes(d, outcomes)
    tokens = [[tuple(row) for row in z] for _ in range(d)]
    return _checked(Game.from_tokens(np.eye(d), z, tokens, name=f"full_information({d})"))


def armed_bandit(d, outcomes=None):
    z = _as_outcomes(d, outcomes)
    tokens = [[row[a] for row in z] for a in range(d)]
    return _checked(Game.from_tokens(np.eye(d), z, tokens, name=f"bandit({d})"))


def graph_feedback(d, neighbors, outcomes=None):
    """Actions observe the losses of their neighbours; ``neighbors[a]`` lists them."""
    if len(neighbors) != d:
        raise ValidationError("need one neighbour set per action", assumption="shape")
    z = _as_outcomes(d, outcomes)
    tokens = [[tuple((int(b), row[b]) for b in sorted(neighbors[a])) for row in z] for a in range(d)]
    return _checked(Game.from_tokens(np.eye(d), z, tokens, name=f"graph({d})"))


def finite_matrix(loss_matrix, signal_matrix):
    """Classical finite partial monitoring: ``loss_matrix[a, z]`` and ``signal_matrix[a, z]``."""
    lm = np.asarray(loss_matrix, dtype=float)
    if lm.ndim != 2:
        raise ValidationError("loss matrix must be two-dimensional", assumption="shape")
    sm = np.asarray(signal_matrix, dtype=object)
    if sm.shape[:2] != lm.shape:
        raise ValidationError("loss and signal matrices differ in shape", assumption="shape")
    return _checked(Game.from_tokens(np.eye(lm.shape[0]), lm.T, signal_matrix, name="finite_matrix"))


def build_standard(kind, d=None, outcomes=None, neighbors=None, loss_matrix=None, signal_matrix=None):
    kind = kind.lower().replace("-", "_")
    if kind in ("finite_matrix", "matrix"):
        if loss_matrix is None or signal_matrix is None:
            raise ValidationError("finite matrix game needs loss and signal matrices", assumption="shape")
        return finite_matrix(loss_matrix, signal_matrix)
    if d is None or d < 2:
        raise ValidationError("need d >= 2", assumption="finite_actions", witness=d)
    if kind in ("full_information", "full", "full_info"):
        return full_information(d, outcomes)
    if kind in ("armed_bandit", "bandit"):
        return armed_bandit(d, outcomes)
    if kind in ("graph_feedback", "graph"):
        if neighbors is None:
            raise ValidationError("graph feedback needs neighbour sets", assumption="shape")
        return graph_feedback(d, neighbors, outcomes)
    raise ValidationError(f"unknown game kind {kind!r}", assumption="kind")


# -- decision sets ------------------------------------------------------------

@dataclass(frozen=True)
class DecisionSet:
    """Polytope given by its vertices.

    ``kind`` is ``conv_hull`` (of the actions), ``clipped_simplex`` (the
    simplex with every coordinate at least ``eps``) or ``explicit``.
    """

    kind: str
    vertices: np.ndarray
    eps: float = 0.0

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def d(self):
        return self.vertices.shape[1]

    @property
    def simplex_eps(self):
        """``eps`` if this set is ``{q in simplex: q >= eps}`` (``0`` for the simplex), else ``None``."""
        if self.kind == "clipped_simplex":
            return self.eps
        n, d = self.vertices.shape
        if n == d and np.array_equal(self.vertices, np.eye(d)):
            return 0.0
        return None

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        e = self.simplex_eps
        if e is not None:
            return bool(abs(x.sum() - 1) <= tol and np.all(x >= e - tol))
        res = linprog(
            np.zeros(len(self.vertices)),
            A_eq=np.vstack([self.vertices.T, np.ones(len(self.vertices))]),
            b_eq=np.append(x, 1.0),
            bounds=(0, None),
            method="highs",
        )
        return res.status == 0

    @classmethod
    def conv_hull(cls, game_or_actions):
        acts = game_or_actions.actions if isinstance(game_or_actions, Game) else game_or_actions
        return cls("conv_hull", acts)

    @classmethod
    def simplex(cls, d):
        return cls("conv_hull", np.eye(d))

    @classmethod
    def clipped_simplex(cls, d, eps):
        if not 0 < eps < 1.0 / d:
            raise ArgumentError(f"clipped simplex needs 0 < eps < 1/d, got eps={eps}")
        return cls("clipped_simplex", eps * np.ones((d, d)) + (1 - d * eps) * np.eye(d), float(eps))

    @classmethod
    def explicit(cls, vertices):
        return cls("explicit", vertices)


def epsilon_D(game: Game, dset: DecisionSet) -> float:
    """``max_a min_{b in D} max_z <b - a, l(z)>``; the inner problem is an LP over vertex weights."""
    V = dset.vertices
    n = len(V)
    vl = V @ game.losses.T  # (n, m)
    al = game.loss_table  # (k, m)
    best = -np.inf
    # variables: lambda (n), t; minimize t s.t. vl^T lambda - t <= al[a]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([vl.T, -np.ones((game.m, 1))])
    A_eq = np.append(np.ones(n), 0.0)[None, :]
    bounds = [(0, None)] * n + [(None, None)]
    for a in range(game.k):
        res = linprog(c, A_ub=A_ub, b_ub=al[a], A_eq=A_eq, b_eq=[1.0], bounds=bounds, method="highs")
        if res.status != 0:
            raise RuntimeError(f"epsilon_D linear program failed: {res.message}")
        best = max(best, res.fun)
    return float(best)


# -- game documents -----------------------------------------------------------

def _plain(tok):
    if isinstance(tok, tuple):
        return [_plain(t) for t in tok]
    return tok


def game_to_dict(game: Game):
    return {
        "name": game.name,
        "actions": game.actions.tolist(),
        "outcomes": game.losses.tolist(),
        "signals": [[_plain(game.alphabet[i]) for i in row] for row in game.signals.tolist()],
    }


def game_from_dict(doc) -> Game:
    """Build a game from a parsed document.

    Either ``kind`` (with ``d``, optional ``levels``/``outcomes``/``neighbors``,
    or ``loss_matrix``/``signal_matrix``) or explicit ``actions``, ``outcomes``
    and ``signals`` (a token matrix or ``bandit``/``full``).
    """
    if not isinstance(doc, dict):
        raise ValidationError("game document must be a mapping", assumption="format")
    if "kind" in doc:
        outcomes = doc.get("outcomes", doc.get("levels"))
        return build_standard(
            doc["kind"], d=doc.get("d"), outcomes=outcomes, neighbors=doc.get("neighbors"),
            loss_matrix=doc.get("loss_matrix"), signal_matrix=doc.get("signal_matrix"),
        )
    try:
        actions = np.asarray(doc["actions"], dtype=float)
        losses = np.atleast_2d(np.asarray(doc["outcomes"], dtype=float))
        signals = doc["signals"]
    except KeyError as exc:
        raise ValidationError(f"game document missing field {exc}", assumption="format") from None
    table = actions @ losses.T
    if isinstance(signals, str):
        if signals == "bandit":
            tokens = table.tolist()
        elif signals == "full":
            tokens = [[tuple(row) for row in losses.tolist()] for _ in range(len(actions))]
        else:
            raise ValidationError(f"unknown signal shorthand {signals!r}", assumption="format")
    else:
        tokens = signals
    game = Game.from_tokens(actions, losses, tokens, name=doc.get("name", "game"))
    return _checked(game)


def load_game(path) -> Game:
    path = Path(path)
    text = path.read_text()
    doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    return game_from_dict(doc)


def save_game(game: Game, path):
    path = Path(path)
    doc = game_to_dict(game)
    if path.suffix == ".json":
        path.write_text(json.dumps(doc, indent=2))
    else:
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
