"""Mirror descent and follow-the-regularized-leader over simplex-like decision sets.

Both updates reduce to ``argmin_{q in D} F(q) - <theta, q>`` for a dual point
``theta``; for a separable potential on ``{q in simplex: q >= eps}`` the
solution is ``q_i = max(eps, grad f*(theta_i - mu))`` with a scalar ``mu``
fixing the normalisation, which :func:`simplex_argmin` finds by Newton's method.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError, InfeasibleStep
from .games import DecisionSet
from .geometry import Potential, psi

MD = "md"
FTRL = "ftrl"


def _simplex_eps(dset: DecisionSet):
    eps = dset.simplex_eps
    if eps is None:
        raise DomainError("only the simplex and clipped simplices are supported as decision sets")
    return eps


def simplex_argmin(potential: Potential, theta, eps=0.0, max_iter=200):
    """Minimise ``F(q) - <theta, q>`` over ``{q >= eps, sum q = 1}``; batched over leading axes."""
    theta = np.asarray(theta, dtype=float)
    d = theta.shape[-1]
    if not 0 <= eps < 1.0 / d:
        raise ArgumentError("need 0 <= eps < 1/d")
    if eps == 0 and not potential.zero_in_domain:
        raise DomainError(f"{potential} is infinite on the simplex boundary; use a clipped simplex")
    if not np.all(np.isfinite(theta)):
        raise InfeasibleStep("dual point is not finite")
    shift = theta - theta.max(axis=-1, keepdims=True)
    lo = -float(potential.df(1.0))
    hi = -float(potential.df(1.0 / d))
    mu = np.full(theta.shape[:-1] + (1,), lo)
    for _ in range(max_iter):
        q = potential.df_conj(shift - mu)
        free = q > eps
        phi = np.where(free, q, eps).sum(axis=-1, keepdims=True) - 1.0
        slope = np.where(free, 1.0 / potential.d2f(np.where(free, q, 1.0)), 0.0).sum(axis=-1, keepdims=True)
        step = np.where(slope > 0, phi / np.maximum(slope, 1e-300), 0.0)
        mu_new = np.minimum(mu + np.maximum(step, 0.0), hi)
        if np.all(np.abs(mu_new - mu) <= 1e-15 * np.maximum(1.0, np.abs(mu))):
            mu = mu_new
            break
        mu = mu_new
    q = potential.df_conj(shift - mu)
    free = q > eps
    q = np.where(free, q, eps)
    # absorb the last rounding error into the free coordinates
    n_fixed = (~free).sum(axis=-1, keepdims=True)
    free_mass = np.where(free, q, 0.0).sum(axis=-1, keepdims=True)
    free_target = 1.0 - n_fixed * eps
    q = np.where(free, q * free_target / free_mass, eps)
    if not np.all(np.isfinite(q)):
        raise InfeasibleStep("projection onto the decision set failed")
    return q


def kkt_residual(potential: Potential, q, theta, eps=0.0):
    """Primal-space optimality residual of ``q`` for ``argmin F(q) - <theta, q>`` on the clipped simplex.

    With ``mu`` estimated from the free coordinates, this is the maximum of
    ``|sum q - 1|``, ``|q_i - grad f*(theta_i - mu)|`` on free coordinates and
    the excess ``grad f*(theta_i - mu) - eps`` on pinned ones.
    """
    q = np.asarray(q, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shift = theta - theta.max(axis=-1, keepdims=True)
    free = q > eps * (1 + 1e-12) + 1e-300
    g = np.where(free, shift - potential.df(np.where(free, q, 1.0)), 0.0)
    mu = g.sum(axis=-1, keepdims=True) / np.maximum(free.sum(axis=-1, keepdims=True), 1)
    target = potential.df_conj(shift - mu)
    res_free = np.where(free, np.abs(q - target), 0.0).max(axis=-1)
    res_fixed = np.where(free, 0.0, np.maximum(target - eps, 0.0)).max(axis=-1)
    return np.maximum(np.abs(q.sum(axis=-1) - 1.0), np.maximum(res_free, res_fixed))


def minimizer(potential: Potential, dset: DecisionSet):
    eps = _simplex_eps(dset)
    return simplex_argmin(potential, np.zeros(dset.d), eps)


def diameter(potential: Potential, dset: DecisionSet) -> float:
    """``max_{x, y in D} F(x) - F(y)``: the maximum sits at a vertex, the minimum at the minimiser."""
    q1 = minimizer(potential, dset)
    top = np.max(potential.value(dset.vertices))
    return float(top - potential.value(q1))


@dataclass
class LearnerState:
    potential: Potential
    dset: DecisionSet
    mode: str
    q: np.ndarray
    cum_loss: np.ndarray
    eta: float
    etas: list = field(default_factory=list)
    t: int = 1

    @property
    def eps(self):
        return _simplex_eps(self.dset)


def init(potential: Potential, dset: DecisionSet, mode=MD, eta=1.0) -> LearnerState:
    if mode not in (MD, FTRL):
        raise ArgumentError(f"mode must be {MD!r} or {FTRL!r}")
    if eta <= 0:
        raise ArgumentError("learning rate must be positive")
    q = minimizer(potential, dset)
    return LearnerState(potential, dset, mode, q, np.zeros(dset.d), float(eta), [float(eta)])


def md_step(state: LearnerState, loss_estimate, eta=None) -> LearnerState:
    """One mirror-descent update ``argmin <q, l> + D(q, q_t)/eta``; the rate may not change."""
    if state.mode != MD:
        raise ArgumentError("md_step needs a learner in mirror-descent mode")
    if eta is not None and eta != state.eta:
        raise ArgumentError("mirror descent is only supported with a constant learning rate")
    loss = np.asarray(loss_estimate, dtype=float)
    theta = state.potential.grad(state.q) - state.eta * loss
    q = simplex_argmin(state.potential, theta, state.eps)
    return dataclasses.replace(
        state, q=q, cum_loss=state.cum_loss + loss, etas=state.etas + [state.eta], t=state.t + 1
    )


def ftrl_solve(state: LearnerState, eta=None):
    """``argmin_{q in D} <q, L> + F(q)/eta`` for the stored cumulative loss ``L``."""
    if state.mode != FTRL:
        raise ArgumentError("ftrl_solve needs a learner in FTRL mode")
    eta = state.eta if eta is None else eta
    return simplex_argmin(state.potential, -eta * state.cum_loss, state.eps)


def ftrl_step(state: LearnerState, loss_estimate, eta_next=None) -> LearnerState:
    """Add an estimate to the history and re-solve with a (nonincreasing) new rate."""
    eta_next = state.eta if eta_next is None else float(eta_next)
    if eta_next <= 0 or eta_next > state.eta * (1 + 1e-12):
        raise ArgumentError("learning rates must be positive and nonincreasing")
    new = dataclasses.replace(
        state, cum_loss=state.cum_loss + np.asarray(loss_estimate, dtype=float),
        eta=eta_next, etas=state.etas + [eta_next], t=state.t + 1,
    )
    new.q = ftrl_solve(new)
    return new


def step(state: LearnerState, loss_estimate, eta_next=None) -> LearnerState:
    if state.mode == MD:
        return md_step(state, loss_estimate, eta_next)
    return ftrl_step(state, loss_estimate, eta_next)


@dataclass
class RegretAudit:
    lhs: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray
    diameter: float
    stability: np.ndarray


def audit_regret_bound(potential: Potential, dset: DecisionSet, qs, etas, losses, tol=1e-8) -> RegretAudit:
    """Check ``max_a sum <q_t - a, l_t> <= diam/eta_n + sum Psi_{q_t}(eta_t l_t)/eta_t``.

    ``qs`` and ``losses`` have shape ``(..., n, d)`` and ``etas`` ``(..., n)``;
    the comparator ranges over the vertices of ``dset``.
    """
    qs = np.asarray(qs, dtype=float)
    losses = np.asarray(losses, dtype=float)
    etas = np.broadcast_to(np.asarray(etas, dtype=float), qs.shape[:-1])
    played = np.sum(qs * losses, axis=(-1, -2))
    comparator = np.min(losses.sum(axis=-2) @ dset.vertices.T, axis=-1)
    lhs = played - comparator
    stab = np.sum(psi(potential, qs, etas[..., None] * losses) / etas, axis=-1)
    diam = diameter(potential, dset)
    rhs = diam / etas[..., -1] + stab
    return RegretAudit(lhs, rhs, lhs <= rhs + tol, diam, stab)


def run_trajectory(potential, dset, mode, etas, losses):
    """Iterates ``q_1..q_n`` for a batch of estimate streams ``losses`` of shape ``(..., n, d)``."""
    losses = np.asarray(losses, dtype=float)
    etas = np.broadcast_to(np.asarray(etas, dtype=float), losses.shape[:-1])
    if mode == MD and not np.all(etas == etas[..., :1]):
        raise ArgumentError("mirror descent is only supported with a constant learning rate")
    if np.any(np.diff(etas, axis=-1) > 0):
        raise ArgumentError("learning rates must be nonincreasing")
    eps = _simplex_eps(dset)
    n = losses.shape[-2]
    q = np.broadcast_to(minimizer(potential, dset), losses.shape[:-2] + (dset.d,)).copy()
    qs = np.empty_like(losses)
    cum = np.zeros_like(q)
    for t in range(n):
        qs[..., t, :] = q
        if t + 1 == n:
            break
        if mode == MD:
            theta = potential.grad(q) - etas[..., t, None] * losses[..., t, :]
        else:
            cum = cum + losses[..., t, :]
            theta = -etas[..., t + 1, None] * cum
        q = simplex_argmin(potential, theta, eps)
    return qs
