"""Exact Bayesian posteriors over finitely supported priors and information-directed sampling.

A prior is a weighted list of outcome-index sequences. Because every posterior
is the prior restricted to the sequences consistent with the history, a
posterior is identified by ``(t, mask)``; the Monte Carlo and exact
enumeration routines cache per-round decisions on that key.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import minimize

from .errors import ArgumentError, DomainError, ValidationError, ZeroPosterior
from .games import DecisionSet, Game, game_from_dict, game_to_dict
from .geometry import Potential, bregman

GAP_TOL = 1e-9


@dataclass(frozen=True)
class Prior:
    game: Game
    sequences: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        seqs = np.atleast_2d(np.asarray(self.sequences, dtype=np.int64))
        w = np.asarray(self.weights, dtype=float)
        if len(w) != len(seqs) or len(w) == 0:
            raise ValidationError("need one positive weight per sequence", assumption="prior")
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ValidationError("prior weights must be positive and sum to 1", assumption="prior")
        if seqs.min() < 0 or seqs.max() >= self.game.m:
            raise ValidationError("sequence refers to an unknown outcome", assumption="prior")
        seqs.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "weights", w)

    @property
    def n(self):
        return self.sequences.shape[1]

    @classmethod
    def uniform(cls, game, sequences):
        seqs = np.atleast_2d(sequences)
        return cls(game, seqs, np.full(len(seqs), 1.0 / len(seqs)))


def optimal_vertices(prior: Prior, dset: DecisionSet):
    """Index of ``argmin_{v in vertices(D)} sum_t <v, l(z_t)>`` per sequence (lowest index on ties)."""
    cum = prior.game.losses[prior.sequences].sum(axis=1)  # (M, d)
    return np.argmin(cum @ dset.vertices.T, axis=1)


@dataclass
class PosteriorState:
    prior: Prior
    dset: DecisionSet
    weights: np.ndarray
    t: int = 0
    astar_index: np.ndarray = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.astar_index is None:
            self.astar_index = optimal_vertices(self.prior, self.dset)

    @classmethod
    def start(cls, prior: Prior, dset: DecisionSet | None = None):
        dset = DecisionSet.conv_hull(prior.game) if dset is None else dset
        return cls(prior, dset, prior.weights.copy())

    @property
    def game(self):
        return self.prior.game

    @property
    def astar(self):
        """``(M, d)`` optimal vertex per sequence."""
        return self.dset.vertices[self.astar_index]

    @property
    def mean_astar(self):
        return self.weights @ self.astar

    @property
    def mask(self):
        return tuple(bool(x) for x in self.weights > 0)


def condition(post: PosteriorState, a, sigma) -> PosteriorState:
    """Posterior after observing signal id ``sigma`` for action ``a`` in round ``post.t``."""
    if post.t >= post.prior.n:
        raise ArgumentError("horizon exhausted")
    z = post.prior.sequences[:, post.t]
    consistent = post.game.signals[a, z] == sigma
    w = np.where(consistent, post.weights, 0.0)
    total = w.sum()
    if total <= 0:
        raise ZeroPosterior(f"no supported sequence emits signal {sigma} for action {a} at round {post.t}")
    return PosteriorState(post.prior, post.dset, w / total, post.t + 1, post.astar_index, post.history + [(a, sigma)])


def face_divergence(potential: Potential, x, y):
    """Bregman divergence restricted to the face where ``y > 0``.

    ``x`` (shape ``(..., d)``) must vanish off that face; for potentials that are
    finite at zero this is the continuous extension of ``D(x, y)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("divergence base point must be nonnegative")
    face = y > 0
    if np.any(np.abs(x[..., ~face]) > 1e-12):
        raise DomainError("conditional mean leaves the face of the prior mean")
    val = bregman(potential, x[..., face], y[face])
    if np.any(~np.isfinite(val)):
        raise DomainError(f"{potential} divergence is infinite between posterior means")
    return val


@dataclass
class RegretInfo:
    delta: np.ndarray
    info: np.ndarray
    mean_astar: np.ndarray


def regret_info(post: PosteriorState, potential: Potential) -> RegretInfo:
    """Expected regret ``Delta_a`` and information gain ``I_a`` by exact enumeration."""
    game = post.game
    if post.t >= post.prior.n:
        raise ArgumentError("horizon exhausted")
    w = post.weights
    z = post.prior.sequences[:, post.t]
    astar = post.astar
    mean = w @ astar
    loss_now = game.losses[z]  # (M, d)
    opt = np.sum(w * np.einsum("md,md->m", astar, loss_now))
    delta = game.loss_table[:, z] @ w - opt
    info = np.zeros(game.k)
    S = len(game.alphabet)
    for a in range(game.k):
        sig = game.signals[a, z]
        mass = np.bincount(sig, weights=w, minlength=S)
        present = mass > 0
        if present.sum() <= 1:
            continue
        cond = np.stack([np.bincount(sig, weights=w * astar[:, i], minlength=S) for i in range(game.d)], axis=1)
        cond = cond[present] / mass[present, None]
        info[a] = float(mass[present] @ face_divergence(potential, cond, mean))
    return RegretInfo(delta, np.maximum(info, 0.0), mean)


def ratio(p, delta, info, lam=2.0):
    """``max(0, <p, Delta>)^lam / <p, I>`` with ``0`` when the regret term vanishes and ``inf`` when only the information does."""
    p = np.asarray(p, dtype=float)
    dd = np.maximum(p @ np.asarray(delta, dtype=float), 0.0)
    ii = p @ np.asarray(info, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = dd**lam / ii
    return np.where(dd <= 0, 0.0, np.where(ii > 0, out, np.inf))


def _ratio_grad(p, delta, info):
    dd = p @ delta
    ii = p @ info
    return 2 * dd / ii * delta - dd**2 / ii**2 * info


def _pairwise_min(delta, info):
    """Exact minimum of the squared ratio over all distributions supported on at most two actions."""
    k = len(delta)
    best_val, best_p = np.inf, None
    for a in range(k):
        for b in range(a, k):
            da, db, ia, ib = delta[a], delta[b], info[a], info[b]
            cands = [0.0, 1.0]
            dl, il = da - db, ia - ib
            if dl != 0 and il != 0:
                w = (il * db - 2 * dl * ib) / (dl * il)
                if 0 < w < 1:
                    cands.append(w)
            for w in cands:
                p = np.zeros(k)
                p[a] += w
                p[b] += 1 - w
                val = float(ratio(p, delta, info))
                if val < best_val - 1e-15:
                    best_val, best_p = val, p
    return best_p, best_val


def frank_wolfe_gap(p, delta, info):
    """``<grad R(p), p> - min_a grad R(p)_a``, an upper bound on ``R(p) - min R`` by convexity."""
    g = _ratio_grad(p, delta, info)
    return float(g @ p - g.min())


def _convex_fallback(delta, info, p0):
    k = len(delta)

    def obj(x):
        x = np.maximum(x, 0)
        return float(ratio(x / x.sum(), delta, info))

    res = minimize(
        obj, p0, method="SLSQP", bounds=[(0, 1)] * k,
        constraints=[{"type": "eq", "fun": lambda x: x.sum() - 1}], options={"ftol": 1e-15, "maxiter": 500},
    )
    x = np.maximum(res.x, 0)
    return x / x.sum()


def ids_distribution(delta, info):
    """Minimiser of ``lim_{e -> 0+} max(0, <p, Delta>)^2 / (<p, I> + e)`` over the simplex.

    Zero is attainable exactly when some ``Delta_a <= 0``; then the point mass on
    the most informative such action is returned. If no action is informative
    the point mass on ``argmin Delta`` is returned. Otherwise the exact
    two-point minimiser is certified by its Frank-Wolfe gap, with a generic
    solver as fallback.
    """
    delta = np.asarray(delta, dtype=float)
    info = np.asarray(info, dtype=float)
    if np.any(info < 0):
        raise ArgumentError("information gains must be nonnegative")
    k = len(delta)
    nonpos = np.flatnonzero(delta <= 0)
    if len(nonpos):
        a = nonpos[np.argmax(info[nonpos])]
        return np.eye(k)[a]
    if not np.any(info > 0):
        return np.eye(k)[int(np.argmin(delta))]
    p, val = _pairwise_min(delta, info)
    if frank_wolfe_gap(p, delta, info) > GAP_TOL * max(1.0, val):
        alt = _convex_fallback(delta, info, p)
        if ratio(alt, delta, info) < val:
            p = alt
    return p


def mix_to_support(p, eps):
    """``(1 - eps |A|) p + eps 1``, a distribution with every entry at least ``eps``."""
    p = np.asarray(p, dtype=float)
    k = len(p)
    if not 0 < eps < 1 or eps * k > 1:
        raise ArgumentError("need 0 < eps < 1 and eps |A| <= 1")
    return (1 - eps * k) * p + eps


# -- ratio lemma audit --------------------------------------------------------

@lru_cache(maxsize=8)
def simplex_grid(d, res):
    """All points of the simplex with coordinates in multiples of ``1/res``."""
    counts = np.zeros((1, 0), dtype=np.int64)
    left = np.array([res], dtype=np.int64)
    for _ in range(d - 1):
        reps = left + 1
        starts = np.repeat(np.cumsum(reps) - reps, reps)
        head = np.arange(reps.sum()) - starts
        counts = np.hstack([np.repeat(counts, reps, axis=0), head[:, None]])
        left = np.repeat(left, reps) - head
    out = np.hstack([counts, left[:, None]]) / res
    out.setflags(write=False)
    return out


@dataclass
class RatioAudit:
    convexity_ok: bool
    part_b_ok: bool
    value_at_ids: float
    grid_min: float
    bound: float


def _pow(x, lam):
    if lam == 2:
        return x * x
    if lam == 3:
        return x * x * x
    if lam == 4:
        y = x * x
        return y * y
    if lam == 2.5:
        return x * x * np.sqrt(x)
    return x**lam


def ratio_lemma_audit(delta, info, lam, grid_res=1000, chords=200, rng=None, tol=1e-9):
    """Check convexity of ``R_lam`` on random chords and ``R_lam(p_2) <= 2^(lam-2) min R_lam`` on a grid.

    ``p_2`` is the squared-ratio minimiser returned by :func:`ids_distribution`.
    ``lam`` may be a sequence, in which case a list of audits is returned and
    the grid products are shared.
    """
    delta = np.asarray(delta, dtype=float)
    info = np.asarray(info, dtype=float)
    lams = [float(x) for x in np.atleast_1d(lam)]
    if min(lams) < 2:
        raise ArgumentError("the ratio lemma needs lam >= 2")
    if not np.any(info > 0) or np.any(info < 0):
        raise ArgumentError("need I >= 0 and I != 0")
    rng = np.random.default_rng(0) if rng is None else rng
    d = len(delta)
    p1 = rng.dirichlet(np.ones(d), size=chords)
    p2 = rng.dirichlet(np.ones(d), size=chords)
    t = rng.uniform(size=chords)
    p = ids_distribution(delta, info)
    grid = simplex_grid(d, grid_res)
    dd = np.maximum(grid @ delta, 0.0)
    ii = grid @ info
    pos = dd > 0
    dd, ii = dd[pos], ii[pos]
    out = []
    for lv in lams:
        mid = ratio((t[:, None] * p1 + (1 - t[:, None]) * p2), delta, info, lv)
        ends = t * ratio(p1, delta, info, lv) + (1 - t) * ratio(p2, delta, info, lv)
        with np.errstate(invalid="ignore"):
            convex = bool(np.all((mid <= ends + tol * np.maximum(1.0, np.abs(ends))) | np.isinf(ends)))
        at_p = float(ratio(p, delta, info, lv))
        if len(dd) < len(grid):
            gmin = 0.0
        else:
            with np.errstate(divide="ignore"):
                gmin = float(np.min(np.where(ii > 0, _pow(dd, lv) / ii, np.inf)))
        bound = 2.0 ** (lv - 2) * gmin
        out.append(RatioAudit(convex, at_p <= bound + tol * max(1.0, bound), at_p, gmin, bound))
    return out if np.ndim(lam) else out[0]


# -- running the policy ----------------------------------------------------------

@dataclass
class IDSRound:
    delta: np.ndarray
    info: np.ndarray
    p: np.ndarray
    action: int
    signal: int
    mean_astar: np.ndarray


@dataclass
class IDSTrajectory:
    sequence: int
    rounds: list
    regret: float
    regret_vs_astar: float
    sum_p_delta: float
    sum_p_info: float
    max_ratio: float
    potential_gap: float


class IDSPolicy:
    """IDS decisions cached on the posterior key ``(t, mask)``."""

    def __init__(self, prior: Prior, potential: Potential, dset: DecisionSet | None = None, mix_eps=0.0):
        self.prior = prior
        self.potential = potential
        self.dset = DecisionSet.conv_hull(prior.game) if dset is None else dset
        self.mix_eps = mix_eps
        self._cache = {}

    def start(self):
        return PosteriorState.start(self.prior, self.dset)

    def decide(self, post: PosteriorState):
        key = (post.t, post.mask)
        hit = self._cache.get(key)
        if hit is None:
            ri = regret_info(post, self.potential)
            p = ids_distribution(ri.delta, ri.info)
            if self.mix_eps > 0:
                p = mix_to_support(p, self.mix_eps)
            hit = (ri, p)
            self._cache[key] = hit
        return hit


def _sample(p, u):
    c = np.cumsum(p)
    return int(min(np.searchsorted(c, u * c[-1], side="right"), len(p) - 1))


def run_ids(prior: Prior, potential: Potential, dset=None, sequence=None, rng=None, policy=None, mix_eps=0.0):
    """Play one episode of IDS against ``sequence`` (sampled from the prior if ``None``)."""
    rng = np.random.default_rng() if rng is None else rng
    policy = IDSPolicy(prior, potential, dset, mix_eps) if policy is None else policy
    game = prior.game
    if sequence is None:
        sequence = _sample(prior.weights, rng.uniform())
    zs = prior.sequences[sequence]
    post = policy.start()
    f_start = float(potential.value(post.mean_astar))
    rounds = []
    incurred = 0.0
    sum_pd = sum_pi = 0.0
    max_ratio = 0.0
    for t in range(prior.n):
        ri, p = policy.decide(post)
        a = _sample(p, rng.uniform())
        sig = int(game.signals[a, zs[t]])
        rounds.append(IDSRound(ri.delta, ri.info, p, a, sig, ri.mean_astar))
        incurred += game.loss_table[a, zs[t]]
        sum_pd += float(p @ ri.delta)
        sum_pi += float(p @ ri.info)
        max_ratio = max(max_ratio, float(ratio(p, ri.delta, ri.info)))
        post = condition(post, a, sig)
    cum = game.loss_table[:, zs].sum(axis=1)
    astar_loss = float(policy.dset.vertices[post.astar_index[sequence]] @ game.losses[zs].sum(axis=0))
    f_end = float(potential.value(post.mean_astar))
    return IDSTrajectory(
        int(sequence), rounds, float(incurred - cum.min()), float(incurred - astar_loss),
        sum_pd, sum_pi, max_ratio, f_end - f_start,
    )


@dataclass
class IDSMonteCarlo:
    regrets: np.ndarray
    sum_p_delta: np.ndarray
    sum_p_info: np.ndarray
    potential_gap: np.ndarray
    max_ratio: float

    @property
    def mean(self):
        return float(self.regrets.mean())

    @property
    def se(self):
        return float(self.regrets.std(ddof=1) / math.sqrt(len(self.regrets))) if len(self.regrets) > 1 else 0.0


def monte_carlo_ids(prior: Prior, potential: Potential, episodes, rng=None, dset=None, mix_eps=0.0) -> IDSMonteCarlo:
    rng = np.random.default_rng() if rng is None else rng
    policy = IDSPolicy(prior, potential, dset, mix_eps)
    out = [run_ids(prior, potential, rng=rng, policy=policy) for _ in range(episodes)]
    return IDSMonteCarlo(
        np.array([o.regret for o in out]),
        np.array([o.sum_p_delta for o in out]),
        np.array([o.sum_p_info for o in out]),
        np.array([o.potential_gap for o in out]),
        max(o.max_ratio for o in out),
    )


@dataclass
class IDSExact:
    bayes_regret: float
    sum_p_delta: float
    sum_p_info: float
    max_ratio: float


def enumerate_ids(prior: Prior, potential: Potential, dset=None, mix_eps=0.0) -> IDSExact:
    """Exact expectations over the whole tree of actions and signals (small priors only)."""
    policy = IDSPolicy(prior, potential, dset, mix_eps)
    game = prior.game
    memo = {}
    worst = [0.0]

    def visit(post):
        if post.t == prior.n:
            return 0.0, 0.0, 0.0
        key = (post.t, post.mask)
        if key in memo:
            return memo[key]
        ri, p = policy.decide(post)
        worst[0] = max(worst[0], float(ratio(p, ri.delta, ri.info)))
        z = prior.sequences[:, post.t]
        loss = float(p @ (game.loss_table[:, z] @ post.weights))
        pd, pi = float(p @ ri.delta), float(p @ ri.info)
        for a in np.flatnonzero(p > 0):
            sig = game.signals[a, z]
            mass = np.bincount(sig, weights=post.weights, minlength=len(game.alphabet))
            for s in np.flatnonzero(mass > 0):
                sub = visit(condition(post, int(a), int(s)))
                w = p[a] * mass[s]
                loss += w * sub[0]
                pd += w * sub[1]
                pi += w * sub[2]
        memo[key] = (loss, pd, pi)
        return memo[key]

    loss, pd, pi = visit(policy.start())
    best = prior.weights @ game.loss_table[:, prior.sequences].sum(axis=2).min(axis=0)
    return IDSExact(float(loss - best), pd, pi, worst[0])


def telescoping_identity(post: PosteriorState, potential: Potential, p):
    """``(<p, I>, E[F(A*_{t+1})] - F(A*_t))``; the two agree for any ``p``."""
    ri = regret_info(post, potential)
    game = post.game
    z = post.prior.sequences[:, post.t]
    face = ri.mean_astar > 0
    f_now = float(potential.value(ri.mean_astar[face]))
    expected = 0.0
    for a in np.flatnonzero(np.asarray(p) > 0):
        sig = game.signals[a, z]
        mass = np.bincount(sig, weights=post.weights, minlength=len(game.alphabet))
        for s in np.flatnonzero(mass > 0):
            nxt = condition(post, int(a), int(s)).mean_astar
            expected += p[a] * mass[s] * float(potential.value(nxt[face]))
    return float(np.asarray(p) @ ri.info), expected - f_now


def ids_bound(n, eps_d, diam, beta, lam=2.0):
    """``n max(eps_D, 0) + 2^(1 - 2/lam) diam^(1/lam) (n beta)^(1 - 1/lam)``.

    The constant is the one the proof derives; ``eps_D`` is clamped at zero here.
    """
    return n * max(eps_d, 0.0) + 2.0 ** (1 - 2 / lam) * diam ** (1 / lam) * (n * beta) ** (1 - 1 / lam)


# -- prior documents ------------------------------------------------------------

def prior_to_dict(prior: Prior):
    return {
        "game": game_to_dict(prior.game),
        "support": [
            {"sequence": seq.tolist(), "weight": float(w)} for seq, w in zip(prior.sequences, prior.weights)
        ],
    }


def prior_from_dict(doc, game: Game | None = None) -> Prior:
    if game is None:
        if "game" not in doc:
            raise ValidationError("prior document needs a game", assumption="format")
        game = game_from_dict(doc["game"])
    support = doc["support"]
    seqs = [s["sequence"] for s in support]
    w = np.array([float(s["weight"]) for s in support])
    return Prior(game, seqs, w / w.sum() if abs(w.sum() - 1) <= 1e-9 else w)


def load_prior(path) -> Prior:
    path = Path(path)
    text = path.read_text()
    return prior_from_dict(json.loads(text) if path.suffix == ".json" else yaml.safe_load(text))
