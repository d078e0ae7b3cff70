"""Data-dependent learning rates for FTRL with an adaptive information ratio.

The rate after observing ``beta_1..beta_{t-1}`` is

    eta_t = c_lam (diam / (beta_0 + sum_{s<t} beta_s))^(1 - 1/lam),
    c_lam = lam^(1/lam) (lam - 1)^(1 - 1/lam),

which is the constant that makes ``diam/eta_n + (1 - 1/lam) sum_t (eta_t/lam)^(1/(lam-1)) beta_t``
collapse to ``(lam/(lam-1))^(1-1/lam) diam^(1/lam) (beta_0 + sum beta)^(1-1/lam)``.
``literal=True`` uses ``lam^(-1/lam)`` in place of ``lam^(1/lam)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import learners
from .adversaries import run_rng, sample_action
from .errors import ArgumentError
from .expopt import LambdaInstance, beta_table, realized_regret, solve_exploration_adaptive
from .games import DecisionSet, Game, epsilon_D
from .geometry import Potential

BETA_TOL = 1e-12


def rate_constant(lam, literal=False):
    if lam <= 1:
        raise ArgumentError("lambda must exceed 1")
    lead = lam ** (-1.0 / lam) if literal else lam ** (1.0 / lam)
    return lead * (lam - 1.0) ** (1.0 - 1.0 / lam)


def regret_constant(lam):
    """``(lam / (lam - 1))^(1 - 1/lam)``."""
    return (lam / (lam - 1.0)) ** (1.0 - 1.0 / lam)


@dataclass
class AdaptiveSchedule:
    lam: float
    beta0: float
    diam: float
    running: float = 0.0
    literal: bool = False
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.lam <= 1:
            raise ArgumentError("lambda must exceed 1")
        if self.beta0 <= 0 or self.diam <= 0:
            raise ArgumentError("beta_0 and the diameter must be positive")

    @property
    def eta(self):
        return eta_t(self)

    def observe(self, beta):
        """Add ``beta(sigma_t, A_t)``; rejects values above ``beta_0``."""
        beta = float(beta)
        if beta < 0 or beta > self.beta0 * (1 + BETA_TOL):
            raise ArgumentError(f"observed beta {beta} outside [0, beta_0={self.beta0}]")
        self.running += beta
        self.history.append(beta)
        return self


def eta_t(schedule: AdaptiveSchedule) -> float:
    c = rate_constant(schedule.lam, schedule.literal)
    return c * (schedule.diam / (schedule.beta0 + schedule.running)) ** (1.0 - 1.0 / schedule.lam)


def schedule_rates(betas, beta0, diam, lam, literal=False):
    """Rates ``eta_1..eta_n`` for realized ``betas`` of shape ``(..., n)``."""
    betas = np.asarray(betas, dtype=float)
    zero = np.zeros(betas.shape[:-1] + (1,))
    prior = np.cumsum(np.concatenate([zero, betas[..., :-1]], axis=-1), axis=-1)
    c = rate_constant(lam, literal)
    return c * (diam / (beta0 + prior)) ** (1.0 - 1.0 / lam)


def tech1_audit(betas, lam, tol=1e-9):
    """``sum_t beta_t (sum_{s<t} beta_s)^(1/lam - 1) <= lam (sum_{t>=1} beta_t)^(1/lam)``.

    ``betas[..., 0]`` is ``beta_0``; the sums on the left start from it.
    Returns ``(lhs, rhs, holds)``.
    """
    betas = np.asarray(betas, dtype=float)
    prior = np.cumsum(betas, axis=-1)[..., :-1]
    obs = betas[..., 1:]
    lhs = np.sum(obs * prior ** (1.0 / lam - 1.0), axis=-1)
    rhs = lam * np.sum(obs, axis=-1) ** (1.0 / lam)
    return lhs, rhs, lhs <= rhs + tol


@dataclass
class LedgerAudit:
    lhs: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray


def ledger_audit(betas, beta0, diam, lam, literal=False, tol=1e-6) -> LedgerAudit:
    """Deterministic check of ``diam/eta_n + (1-1/lam) sum_t (eta_t/lam)^(1/(lam-1)) beta_t``
    against ``(lam/(lam-1))^(1-1/lam) diam^(1/lam) (beta_0 + sum_{t<=n} beta_t)^(1-1/lam)``."""
    betas = np.asarray(betas, dtype=float)
    etas = schedule_rates(betas, beta0, diam, lam, literal)
    pen = (1 - 1 / lam) * np.sum((etas / lam) ** (1 / (lam - 1)) * betas, axis=-1)
    lhs = diam / etas[..., -1] + pen
    rhs = regret_constant(lam) * diam ** (1 / lam) * (beta0 + betas.sum(axis=-1)) ** (1 - 1 / lam)
    return LedgerAudit(lhs, rhs, lhs <= rhs + tol)


def online_bound(n, eps_total, diam, beta0, betas, lam):
    """``n (eps + eps_D + alpha) + (lam/(lam-1))^(1-1/lam) diam^(1/lam) (beta_0 + sum_{t<n} beta_t)^(1-1/lam)``."""
    betas = np.asarray(betas, dtype=float)
    head = betas[..., :-1].sum(axis=-1) if betas.shape[-1] else 0.0
    return n * eps_total + regret_constant(lam) * diam ** (1 / lam) * (beta0 + head) ** (1 - 1 / lam)


# -- online-tuned FTRL with per-round solves ----------------------------------

@dataclass
class AdaptiveRun:
    qs: np.ndarray
    ps: np.ndarray
    etas: np.ndarray
    actions: np.ndarray
    signals: np.ndarray
    outcomes: np.ndarray
    betas: np.ndarray
    estimates: np.ndarray
    certified: np.ndarray
    regret: float
    bound: float
    diameter: float
    eps_d: float
    beta0: float
    ledger: LedgerAudit
    md_audit: learners.RegretAudit


def run_adaptive_ftrl(game: Game, dset: DecisionSet, potential: Potential, beta, lam, precision, n, adversary,
                      seed=0, run=0, literal=False) -> AdaptiveRun:
    """FTRL with the adaptive rate, solving the penalised exploration problem every round."""
    if n < 1:
        raise ArgumentError("need at least one round")
    if not game.is_simplex_game():
        raise ArgumentError("the learner only supports games whose actions are the standard basis")
    table = beta_table(game, beta)
    if np.any(table < 0):
        raise ArgumentError("beta must be nonnegative")
    beta0 = float(table.max())
    diam = learners.diameter(potential, dset)
    schedule = AdaptiveSchedule(lam, beta0, diam, literal=literal)
    rng = run_rng(seed, run)
    outcomes = adversary.outcomes_for(game, n, rng)
    u = rng.random(n)
    state = learners.init(potential, dset, learners.FTRL, schedule.eta)
    d, k = game.d, game.k
    qs, ps, est = np.zeros((n, d)), np.zeros((n, k)), np.zeros((n, d))
    etas, betas, cert = np.zeros(n), np.zeros(n), np.zeros(n)
    acts = np.zeros(n, dtype=np.int64)
    sigs = np.zeros(n, dtype=np.int64)
    for t in range(n):
        etas[t] = state.eta
        inst = LambdaInstance(game, dset, state.q, state.eta, potential)
        sol = solve_exploration_adaptive(inst, table, lam, precision)
        a = int(sample_action(sol.p, u[t]))
        s = int(game.signals[a, outcomes[t]])
        qs[t], ps[t], acts[t], sigs[t], cert[t] = state.q, sol.p, a, s, sol.value
        est[t] = sol.g(a, s) / sol.p[a]
        betas[t] = table[a, s]
        schedule.observe(betas[t])
        state = learners.ftrl_step(state, est[t], schedule.eta)
    eps_d = max(epsilon_D(game, dset), 0.0)
    regret = realized_regret(game, acts, outcomes)
    bound = float(online_bound(n, eps_d + max(float(cert.max()), 0.0), diam, beta0, betas, lam))
    ledger = ledger_audit(betas, beta0, diam, lam, literal)
    audit = learners.audit_regret_bound(potential, dset, qs, etas, est)
    return AdaptiveRun(qs, ps, etas, acts, sigs, outcomes, betas, est, cert, regret, bound, diam, eps_d, beta0,
                       ledger, audit)


# -- first-order bandit instantiation -----------------------------------------

@dataclass
class FirstOrderReport:
    regrets: np.ndarray
    bounds: np.ndarray
    optimal_loss: np.ndarray
    se: float
    per_seed_pass: np.ndarray
    ledger_holds: np.ndarray
    eps_clip: float

    @property
    def mean_regret(self):
        return float(self.regrets.mean())

    @property
    def mean_bound(self):
        return float(self.bounds.mean())

    @property
    def holds(self):
        return bool(self.mean_regret <= self.mean_bound + 3 * self.se)


def first_order_bound(n, d, eps_clip, optimal_loss):
    """``n d eps + d log(1/eps) + sqrt(d (1 + L*) log(1/eps))``."""
    log = math.log(1.0 / eps_clip)
    return n * d * eps_clip + d * log + np.sqrt(d * (1.0 + np.asarray(optimal_loss, dtype=float)) * log)


def first_order_bandit_audit(d, n, adversary=None, eps_clip=None, seeds=100, seed=0, losses=None,
                             lam=2.0) -> FirstOrderReport:
    """Log-barrier FTRL on the clipped simplex with ``P_t = Q_t`` and importance weighting.

    With ``beta(sigma, a) = 2 sigma^2`` (so ``beta_0 = 2``) the penalised
    objective is nonpositive at ``P_t = Q_t``: the log-barrier stability of the
    estimate ``sigma e_a / q_a`` is at most ``eta sigma^2 / 2``. The rates come
    from the adaptive schedule and all seeds run as one batch.
    """
    if eps_clip is None:
        eps_clip = 1.0 / (n * d)
    if not 0 < eps_clip < 1.0 / d:
        raise ArgumentError("need 0 < eps_clip < 1/d")
    if losses is None:
        if adversary is None:
            raise ArgumentError("give an adversary or explicit losses")
        rngs = [run_rng(seed, r) for r in range(seeds)]
        losses = np.stack([adversary.losses(n, d, g) for g in rngs])
        u = np.stack([g.random(n) for g in rngs])
    else:
        losses = np.asarray(losses, dtype=float)
        seeds = losses.shape[0]
        u = np.stack([run_rng(seed, r).random(n) for r in range(seeds)])
    pot = Potential.log_barrier()
    dset = DecisionSet.clipped_simplex(d, eps_clip)
    diam = learners.diameter(pot, dset)
    beta0 = 2.0
    c = rate_constant(lam)
    cum = np.zeros((seeds, d))
    running = np.zeros(seeds)
    played = np.zeros(seeds)
    betas = np.zeros((seeds, n))
    rows = np.arange(seeds)
    for t in range(n):
        eta = c * (diam / (beta0 + running)) ** (1.0 - 1.0 / lam)
        q = learners.simplex_argmin(pot, -eta[:, None] * cum, eps_clip)
        a = sample_action(q, u[:, t])
        sigma = losses[rows, t, a]
        played += sigma
        cum[rows, a] += sigma / q[rows, a]
        betas[:, t] = 2.0 * sigma**2
        running += betas[:, t]
    optimal = losses.sum(axis=1).min(axis=1)
    regrets = played - optimal
    bounds = first_order_bound(n, d, eps_clip, optimal)
    se = float(regrets.std(ddof=1) / math.sqrt(seeds)) if seeds > 1 else 0.0
    ledger = ledger_audit(betas, beta0, diam, lam).holds
    return FirstOrderReport(regrets, bounds, optimal, se, regrets <= bounds + 3 * se, ledger, eps_clip)
