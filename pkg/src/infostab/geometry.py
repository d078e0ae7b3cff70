"""Separable Legendre potentials, Bregman divergences and the stability functional.

Every potential here is a sum of a one-dimensional convex function over the
coordinates, ``F(x) = sum_i f(x_i)``, defined on the nonnegative orthant. All
functions broadcast over leading batch dimensions and reduce over the last axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import ArgumentError, DomainError

LIMIT_TOL = 1e-6

NEGENTROPY = "negentropy"
LOG_BARRIER = "logbarrier"
NEG_SQRT = "negsqrt"
TSALLIS = "tsallis"


@dataclass(frozen=True)
class Potential:
    """A separable Legendre potential.

    ``kind`` is one of ``negentropy`` (``x log x - x + 1``), ``logbarrier``
    (``-log x``), ``negsqrt`` (``-2 sqrt x``) or ``tsallis`` with parameter ``s``
    (``(x^s - s x - (1 - s)) / (s (s - 1))``). Use the classmethods rather than
    the constructor: ``Potential.tsallis`` dispatches to the closed-form limits
    when ``s`` is within ``1e-6`` of 0 or 1.
    """

    kind: str
    s: float | None = None

    def __post_init__(self):
        if self.kind not in (NEGENTROPY, LOG_BARRIER, NEG_SQRT, TSALLIS):
            raise ArgumentError(f"unknown potential kind {self.kind!r}")
        if self.kind == TSALLIS and not (0.0 < self.s < 1.0):
            raise ArgumentError("tsallis parameter must lie in (0, 1)")

    @classmethod
    def negentropy(cls):
        return cls(NEGENTROPY)

    @classmethod
    def log_barrier(cls):
        return cls(LOG_BARRIER)

    @classmethod
    def neg_sqrt(cls):
        return cls(NEG_SQRT)

    @classmethod
    def tsallis(cls, s):
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ArgumentError("tsallis parameter must lie in [0, 1]")
        if abs(s - 1.0) < LIMIT_TOL:
            return cls(NEGENTROPY)
        if s < LIMIT_TOL:
            return cls(LOG_BARRIER)
        return cls(TSALLIS, s)

    @classmethod
    def from_name(cls, name, s=None):
        name = name.lower().replace("-", "").replace("_", "")
        if name in ("negentropy", "entropy", "exp"):
            return cls.negentropy()
        if name in ("logbarrier", "log"):
            return cls.log_barrier()
        if name in ("negsqrt", "sqrt", "inf"):
            return cls.neg_sqrt()
        if name == "tsallis":
            return cls.tsallis(0.5 if s is None else s)
        raise ArgumentError(f"unknown potential {name!r}")

    def __str__(self):
        return f"tsallis({self.s:g})" if self.kind == TSALLIS else self.kind

    # -- elementwise pieces -------------------------------------------------

    @property
    def _c(self):
        return 1.0 - self.s

    @property
    def zero_in_domain(self):
        """Whether ``f(0)`` is finite (false only for the log barrier)."""
        return self.kind != LOG_BARRIER

    @property
    def dual_sup(self):
        """Supremum of the dual domain: ``grad f`` maps onto ``(-inf, dual_sup)``."""
        if self.kind == NEGENTROPY:
            return math.inf
        if self.kind == TSALLIS:
            return 1.0 / self._c
        return 0.0

    def f(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == NEGENTROPY:
                out = xlogy(x, x) - x + 1.0
            elif self.kind == LOG_BARRIER:
                out = -np.log(x)
            elif self.kind == NEG_SQRT:
                out = -2.0 * np.sqrt(x)
            else:
                s, c = self.s, self._c
                xp = np.where(x > 0, x, 1.0)
                body = -(xp * np.expm1(-c * np.log(xp)) / c + xp - 1.0) / s
                out = np.where(x > 0, body, 1.0 / s)
        bad = x < 0 if self.zero_in_domain else x <= 0
        return np.where(bad, np.inf, out)

    def df(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == NEGENTROPY:
                return np.log(x)
            if self.kind == LOG_BARRIER:
                return -1.0 / x
            if self.kind == NEG_SQRT:
                return -1.0 / np.sqrt(x)
            c = self._c
            return -np.expm1(-c * np.log(x)) / c

    def d2f(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == NEGENTROPY:
            return 1.0 / x
        if self.kind == LOG_BARRIER:
            return 1.0 / x**2
        if self.kind == NEG_SQRT:
            return 0.5 * x**-1.5
        return x ** (self.s - 2.0)

    def f_conj(self, u):
        """Fenchel conjugate ``f*``; ``+inf`` outside the dual domain."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == NEGENTROPY:
                return np.expm1(u)
            if self.kind == LOG_BARRIER:
                return np.where(u < 0, -1.0 - np.log(-u), np.inf)
            if self.kind == NEG_SQRT:
                return np.where(u < 0, -1.0 / u, np.inf)
            s, c = self.s, self._c
            ok = c * u < 1.0
            val = np.expm1(-(s / c) * np.log1p(-c * np.where(ok, u, 0.0))) / s
            return np.where(ok, val, np.inf)

    def df_conj(self, u):
        """Gradient of ``f*``, the inverse of ``df``."""
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == NEGENTROPY:
                return np.exp(u)
            if self.kind == LOG_BARRIER:
                return -1.0 / u
            if self.kind == NEG_SQRT:
                return 1.0 / u**2
            c = self._c
            return np.exp(-np.log1p(-c * u) / c)

    # -- vector-level API ---------------------------------------------------

    def value(self, x):
        return np.sum(self.f(x), axis=-1)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError(f"gradient of {self} needs strictly positive coordinates")
        return self.df(x)

    def conj(self, u):
        return np.sum(self.f_conj(u), axis=-1)

    def conj_grad(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u >= self.dual_sup):
            raise DomainError(f"{self} dual gradient evaluated outside its domain")
        return self.df_conj(u)


def _require_interior(q):
    q = np.asarray(q, dtype=float)
    if np.any(~np.isfinite(q)) or np.any(q <= 0):
        raise DomainError("point must have strictly positive coordinates")
    return q


def bregman(potential: Potential, p, q):
    """``F(p) - F(q) - <grad F(q), p - q>``; ``inf`` if ``p`` leaves ``dom F``.

    ``q`` must be interior. Closed forms are used for the named potentials so
    the result stays accurate when ``p`` is close to ``q``.
    """
    q = _require_interior(q)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        return np.full(np.broadcast_shapes(p.shape, q.shape)[:-1], np.inf)[()]
    kind = potential.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == NEGENTROPY:
            terms = xlogy(p, p / q) - p + q
        elif kind == LOG_BARRIER:
            r = p / q
            terms = np.where(p > 0, r - 1.0 - np.log(r), np.inf)
        elif kind == NEG_SQRT:
            terms = (np.sqrt(p) - np.sqrt(q)) ** 2 / np.sqrt(q)
        else:
            terms = potential.f(p) - potential.f(q) - potential.df(q) * (p - q)
    return np.sum(terms, axis=-1)


def bregman_dual(potential: Potential, x, y):
    """Divergence ``D*(x, y)`` of the conjugate; ``inf`` if ``x`` leaves the dual domain."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y >= potential.dual_sup):
        raise DomainError("second argument of the dual divergence must be in the dual domain")
    kind = potential.kind
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == NEGENTROPY:
            delta = x - y
            terms = np.exp(y) * (np.expm1(delta) - delta)
        elif kind == LOG_BARRIER:
            r = x / y
            terms = np.where(x < 0, r - 1.0 - np.log(r), np.inf)
        elif kind == NEG_SQRT:
            terms = np.where(x < 0, (x - y) ** 2 / (-x * y**2), np.inf)
        else:
            terms = potential.f_conj(x) - potential.f_conj(y) - potential.df_conj(y) * (x - y)
    return np.sum(terms, axis=-1)


def psi(potential: Potential, q, x):
    """Stability functional ``Psi_q(x) = D*(grad F(q) - x, grad F(q))``.

    Returns ``inf`` when ``grad F(q) - x`` leaves the dual domain.
    """
    q = _require_interior(q)
    x = np.asarray(x, dtype=float)
    kind = potential.kind
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == NEGENTROPY:
            terms = q * (np.expm1(-x) + x)
        elif kind == LOG_BARRIER:
            y = q * x
            terms = np.where(y > -1.0, y - np.log1p(np.maximum(y, -1.0)), np.inf)
        elif kind == NEG_SQRT:
            rq = np.sqrt(q)
            den = 1.0 + rq * x
            terms = np.where(den > 0, q * rq * x**2 / den, np.inf)
        else:
            s, c = potential.s, potential._c
            arg = c * x * q**c
            ok = arg > -1.0
            safe = np.where(ok, arg, 0.0)
            terms = q**s * np.expm1(-(s / c) * np.log1p(safe)) / s + q * x
            terms = np.where(ok, terms, np.inf)
    return np.sum(terms, axis=-1)


def psi_grad(potential: Potential, q, x):
    """Gradient of ``x -> Psi_q(x)``: ``q - grad F*(grad F(q) - x)``."""
    q = _require_interior(q)
    u = potential.df(q) - np.asarray(x, dtype=float)
    return q - potential.df_conj(u)


def duality_residual(potential: Potential, p, q):
    """``|D(p, q) - D*(grad F(q), grad F(p))|`` for interior ``p`` and ``q``."""
    p = _require_interior(p)
    q = _require_interior(q)
    primal = bregman(potential, p, q)
    dual = bregman_dual(potential, potential.df(q), potential.df(p))
    return np.abs(primal - dual)


def bdiff_audit(s, eps, q, r, tol=1e-9):
    """Check ``<q - r, eps> - D(r, q) <= (e/2) <q, eps^2>`` under the ``s``-Tsallis entropy.

    Returns ``(lhs, rhs, holds)``; broadcasts over leading dimensions when
    ``s`` is a scalar.
    """
    pot = Potential.tsallis(s)
    eps = np.asarray(eps, dtype=float)
    q = _require_interior(q)
    r = np.asarray(r, dtype=float)
    if np.any(np.abs(eps) > 1) or np.any((r < 0) | (r > 1)):
        raise ArgumentError("need eps in [-1, 1]^d and r in [0, 1]^d")
    with np.errstate(invalid="ignore"):
        lhs = np.sum((q - r) * eps, axis=-1) - bregman(pot, r, q)
    rhs = 0.5 * math.e * np.sum(q * eps**2, axis=-1)
    return lhs, rhs, lhs <= rhs + tol
