"""Oblivious adversaries and the per-run random streams.

Every run draws from its own counter-based generator,
``Generator(Philox(SeedSequence([seed, run])))``. The adversary commits to
the whole outcome sequence at the start of an episode, before any action is
taken, so the sequence never depends on the learner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .games import Game


def run_rng(seed: int, run: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(run)])))


def sample_action(p, u):
    """Inverse-CDF draw over actions in index order; batched over leading axes of ``p``."""
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p, axis=-1)
    u = np.asarray(u, dtype=float)[..., None] * cdf[..., -1:]
    return np.minimum((cdf <= u).sum(axis=-1), p.shape[-1] - 1)


@dataclass(frozen=True)
class FixedSequence:
    """A fixed list of outcomes: integer outcome ids or loss vectors, cycled if shorter than ``n``."""

    outcomes: tuple

    def __init__(self, outcomes):
        object.__setattr__(self, "outcomes", tuple(
            o if np.isscalar(o) else tuple(float(x) for x in o) for o in outcomes
        ))
        if not self.outcomes:
            raise ArgumentError("fixed sequence is empty")

    @property
    def by_index(self):
        return np.isscalar(self.outcomes[0])

    def losses(self, n, d, rng=None):
        if self.by_index:
            raise ArgumentError("this sequence holds outcome ids; use outcomes(game, ...)")
        seq = np.asarray(self.outcomes, dtype=float)
        if seq.shape[1] != d:
            raise ArgumentError(f"sequence has dimension {seq.shape[1]}, expected {d}")
        return seq[np.arange(n) % len(seq)]

    def outcomes_for(self, game: Game, n, rng=None):
        if self.by_index:
            idx = np.asarray(self.outcomes, dtype=np.int64)
            if idx.min() < 0 or idx.max() >= game.m:
                raise ArgumentError("outcome id outside the game")
            return idx[np.arange(n) % len(idx)]
        return match_outcomes(game, self.losses(n, game.d))


@dataclass(frozen=True)
class IIDStochastic:
    """Outcomes drawn independently each round.

    Give either ``means`` (independent Bernoulli loss per coordinate) or
    ``probs`` (a distribution over the outcome ids of a finite game).
    """

    means: tuple | None = None
    probs: tuple | None = None

    def __post_init__(self):
        if (self.means is None) == (self.probs is None):
            raise ArgumentError("give exactly one of means or probs")
        if self.means is not None:
            m = np.asarray(self.means, dtype=float)
            if np.any((m < 0) | (m > 1)):
                raise ArgumentError("Bernoulli means must lie in [0, 1]")
            object.__setattr__(self, "means", tuple(m.tolist()))
        else:
            p = np.asarray(self.probs, dtype=float)
            if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
                raise ArgumentError("outcome probabilities must form a distribution")
            object.__setattr__(self, "probs", tuple(p.tolist()))

    def losses(self, n, d, rng):
        if self.means is None:
            raise ArgumentError("outcome-id adversary has no loss vectors without a game")
        m = np.asarray(self.means)
        if len(m) != d:
            raise ArgumentError(f"adversary has {len(m)} arms, expected {d}")
        return (rng.random((n, d)) < m).astype(float)

    def outcomes_for(self, game: Game, n, rng):
        if self.probs is None:
            return match_outcomes(game, self.losses(n, game.d, rng))
        p = np.asarray(self.probs)
        if len(p) != game.m:
            raise ArgumentError("outcome distribution does not match the game")
        return sample_action(np.broadcast_to(p, (n, len(p))), rng.random(n))


def worst_case_bandit(d, gap, best=0):
    """Bernoulli bandit with means 1/2 except ``1/2 - gap`` on the best arm."""
    if not 0 <= best < d:
        raise ArgumentError("best arm out of range")
    means = np.full(d, 0.5)
    means[best] -= gap
    return IIDStochastic(means=tuple(means))


def crafted_hard_sequence(d, n, gap=None, best=None, seed=0):
    """One frozen draw of the two-point lower-bound construction, replayed identically for every run.

    All arms are Bernoulli(1/2) except ``best`` (default: the last arm) at
    ``1/2 - gap`` with ``gap = 2 sqrt(d/n)`` capped at 1/4, so the learner has
    to separate arms whose total losses differ by only a few ``sqrt(dn)``.
    The draw uses its own generator seeded by ``seed``.
    """
    if d < 2 or n < 1:
        raise ArgumentError("need at least two arms and one round")
    gap = min(2.0 * (d / n) ** 0.5, 0.25) if gap is None else float(gap)
    best = d - 1 if best is None else int(best)
    means = np.full(d, 0.5)
    means[best] -= gap
    seq = (run_rng(seed, 0).random((n, d)) < means).astype(float)
    return FixedSequence([tuple(r) for r in seq])


def match_outcomes(game: Game, losses):
    """Map loss vectors to the ids of identical rows of ``game.losses``."""
    losses = np.asarray(losses, dtype=float)
    eq = np.all(np.abs(losses[:, None, :] - game.losses[None, :, :]) <= 1e-12, axis=-1)
    if not np.all(eq.any(axis=1)):
        raise ArgumentError("adversary produced a loss vector that is not an outcome of the game")
    return eq.argmax(axis=1)


def adversary_from_dict(doc, d=None, n=None):
    kind = doc.get("kind", "bernoulli")
    if kind == "fixed":
        return FixedSequence(doc["outcomes"])
    if kind in ("bernoulli", "iid"):
        if "probs" in doc:
            return IIDStochastic(probs=doc["probs"])
        means = doc.get("means")
        if means is None:
            means = [doc.get("mean", 0.5)] * int(d)
        return IIDStochastic(means=means)
    if kind == "worst_case":
        return worst_case_bandit(int(doc.get("d", d)), float(doc.get("gap", 0.1)), int(doc.get("best", 0)))
    if kind == "crafted":
        return crafted_hard_sequence(int(doc.get("d", d)), int(doc.get("n", n)), doc.get("gap"), doc.get("best"),
                                     int(doc.get("seed", 0)))
    raise ArgumentError(f"unknown adversary kind {kind!r}")
