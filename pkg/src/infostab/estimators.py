"""Estimation functions, importance weighting and the unbiased bandit estimator.

An estimation function maps an (action, signal) pair to a vector in ``R^d``.
For a finite game it is stored as a ``(k, |Sigma|, d)`` table indexed by signal
id; for bandits with real-valued signals it is a closure taking the signal
value directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError, DomainError, PreconditionError, ZeroProbability
from .games import Game, canonical_token
from .geometry import Potential, psi

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class EstimationFn:
    table: np.ndarray | None = None
    closure: Callable | None = None
    d: int | None = None
    sup_norm: float | None = None

    def __post_init__(self):
        if (self.table is None) == (self.closure is None):
            raise ArgumentError("give exactly one of a table or a closure")
        if self.table is not None:
            t = np.asarray(self.table, dtype=float)
            t.setflags(write=False)
            object.__setattr__(self, "table", t)
            object.__setattr__(self, "d", t.shape[-1])

    @classmethod
    def zeros(cls, game: Game):
        return cls(np.zeros((game.k, len(game.alphabet), game.d)))

    def __call__(self, a, sigma):
        """``g(a, sigma)``; ``sigma`` is a signal id for tables and a raw value for closures."""
        if self.table is not None:
            return self.table[a, sigma]
        return np.asarray(self.closure(a, sigma), dtype=float)

    def contributions(self, game: Game):
        """``(k, m, d)`` array of ``g(a, Phi_a(z))``."""
        if self.table is not None:
            return self.table[np.arange(game.k)[:, None], game.signals]
        return np.array([[self(a, game.signal(a, z)) for z in range(game.m)] for a in range(game.k)])


def importance_weighted(g: EstimationFn, p, a, sigma):
    """``g(a, sigma) / p(a)``."""
    pa = float(np.asarray(p)[a])
    if pa <= 0:
        raise ZeroProbability(f"action {a} has probability {pa}")
    return g(a, sigma) / pa


@dataclass
class UnbiasednessReport:
    residual: float
    witness: tuple | None
    per_outcome: np.ndarray

    @property
    def ok(self):
        return self.residual < 1e-10


def _residual_report(actions, bias):
    """``max_z max_{b, c} <b - c, bias_z>`` with the maximising ``(z, b, c)``."""
    proj = bias @ np.asarray(actions, dtype=float).T  # (m, k)
    hi = proj.argmax(axis=1)
    lo = proj.argmin(axis=1)
    per = proj.max(axis=1) - proj.min(axis=1)
    z = int(per.argmax()) if len(per) else 0
    witness = (z, int(hi[z]), int(lo[z])) if len(per) and per[z] > 0 else None
    return UnbiasednessReport(float(per.max()) if len(per) else 0.0, witness, per)


def unbiasedness_residual(g: EstimationFn, game: Game) -> UnbiasednessReport:
    """Exhaustive check of ``<b - c, l(z) - sum_a g(a, Phi_a(z))> = 0`` over outcomes and action pairs."""
    total = g.contributions(game).sum(axis=0)
    return _residual_report(game.actions, game.losses - total)


def bandit_unbiasedness_residual(g: EstimationFn, zs) -> UnbiasednessReport:
    """Same check for a bandit closure on arbitrary real outcomes ``zs`` of shape ``(m, d)``."""
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    d = zs.shape[1]
    total = np.array([sum(g(a, z[a]) for a in range(d)) for z in zs])
    return _residual_report(np.eye(d), zs - total)


def _check_interior(q):
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise DomainError("estimator needs every q_b > 0")
    return q


def sqrt2dn_matrix(q, eta, z):
    """``G[..., a, b] = g(a, z_a)_b`` for the unbiased bandit estimator, batched over leading axes."""
    q = _check_interior(q)
    z = np.asarray(z, dtype=float)
    eta = np.asarray(eta, dtype=float)[..., None, None]
    h = 1.0 / (q + np.sqrt(q))  # indexed by b
    diag = z - 0.5 + eta[..., 0] / 8.0 * (1.0 + h)
    G = -eta * q[..., :, None] * h[..., None, :] / 8.0
    d = q.shape[-1]
    idx = np.arange(d)
    G[..., idx, idx] += diag
    return G


def sqrt2dn_estimator(q, eta, a, sigma):
    """``g(a, sigma)_b = 1{a=b}(sigma - 1/2 + eta/8 (1 + 1/(q_b + sqrt q_b))) - q_a eta / (8 (q_b + sqrt q_b))``."""
    q = _check_interior(q)
    if eta <= 0:
        raise ArgumentError("learning rate must be positive")
    h = 1.0 / (q + np.sqrt(q))
    out = -q[a] * eta * h / 8.0
    out[a] += sigma - 0.5 + eta / 8.0 * (1.0 + h[a])
    return out


def sqrt2dn_fn(q, eta):
    q = np.array(q, dtype=float)
    return EstimationFn(closure=lambda a, sigma: sqrt2dn_estimator(q, eta, a, sigma), d=len(q))


def bandit_stability(q, z, eta):
    """``(1/eta) sum_a q_a Psi_q(eta g(a, z_a) / q_a)`` under the ``-2 sqrt`` potential; batched."""
    q = _check_interior(q)
    G = sqrt2dn_matrix(q, eta, z)
    eta_b = np.asarray(eta, dtype=float)
    x = eta_b[..., None, None] * G / q[..., :, None]
    vals = psi(Potential.neg_sqrt(), q[..., None, :], x)  # (..., a)
    return np.sum(q * vals, axis=-1) / eta_b


def bandit_stability_terms(q, z, eta):
    """The per-coordinate closed form ``(A)_b``; the stability term equals ``eta sum_b sqrt(q_b) (A)_b``."""
    q = _check_interior(q)
    z = np.asarray(z, dtype=float)
    eta = np.asarray(eta, dtype=float)[..., None]
    r = np.sqrt(q)
    u = 2 * z - 1
    first = (eta + 4 * u * r) ** 2 / (eta**2 + 4 * eta * u * r + 8 * q)
    second = eta**2 * (1 - r) / (8 * (r + 1) - eta**2)
    return (first + second) / 8.0


@dataclass
class StabilityAudit:
    lhs: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray


def bandit_stability_audit(q, z, eta, tol=1e-9) -> StabilityAudit:
    """Check ``(1/eta) sum_a q_a Psi_q(eta g(a, z_a)/q_a) <= eta sqrt(d) / 4`` for ``0 < eta <= sqrt 2``."""
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr <= 0) or np.any(eta_arr > SQRT2):
        raise PreconditionError("the stability bound is only claimed for 0 < eta <= sqrt(2)")
    q = _check_interior(q)
    lhs = bandit_stability(q, z, eta_arr)
    rhs = eta_arr * np.sqrt(q.shape[-1]) / 4.0
    return StabilityAudit(lhs, rhs, lhs <= rhs + tol)


def table_to_dict(g: EstimationFn, game: Game):
    def plain(tok):
        return [plain(t) for t in tok] if isinstance(tok, tuple) else tok

    entries = []
    for a in range(game.k):
        for s in sorted(set(game.signals[a].tolist())):
            entries.append({"action": a, "signal": plain(game.alphabet[s]), "estimate": g.table[a, s].tolist()})
    return {"estimates": entries}


def table_from_dict(doc, game: Game) -> EstimationFn:
    index = {tok: i for i, tok in enumerate(game.alphabet)}
    table = np.zeros((game.k, len(game.alphabet), game.d))
    for e in doc["estimates"]:
        tok = canonical_token(e["signal"])
        if tok not in index:
            raise ArgumentError(f"signal {tok!r} not in the game's alphabet")
        table[int(e["action"]), index[tok]] = e["estimate"]
    return EstimationFn(table)
