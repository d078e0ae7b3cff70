"""Exploration by optimisation on finite games.

For a learner iterate ``q`` and rate ``eta`` the objective is

    Lambda(z, a*, p, g) = sum_a p(a) <a - a*, l(z)> + <a* - q, sum_a g(a, Phi_a(z))>
                          + (1/eta) sum_a p(a) Psi_q(eta g(a, Phi_a(z)) / p(a)),

and each round picks ``(p, g)`` to make its worst case over outcomes and
vertices of ``D`` small. The default solver writes the min-max as a conic
program (exponential, second-order, power or relative-entropy cones depending
on the potential) and certifies the answer twice: the value is re-evaluated
exactly by enumeration, and the constraint duals give a lower bound. A
projected subgradient method is available as a solver-free alternative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from . import learners
from .adversaries import run_rng, sample_action
from .errors import ArgumentError, BudgetExhausted, DomainError, InfeasibleStep, ZeroProbability
from .estimators import EstimationFn, table_to_dict
from .games import DecisionSet, Game, epsilon_D
from .geometry import LOG_BARRIER, NEG_SQRT, NEGENTROPY, TSALLIS, Potential, bregman, psi, psi_grad

P_FLOOR = 1e-6
CONIC = "conic"
SUBGRADIENT = "subgradient"


@dataclass(frozen=True)
class LambdaInstance:
    game: Game
    dset: DecisionSet
    q: np.ndarray
    eta: float
    potential: Potential

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (self.game.d,):
            raise ArgumentError("q has the wrong dimension")
        if np.any(q <= 0):
            raise DomainError("q must lie in the domain of grad F")
        if self.eta <= 0:
            raise ArgumentError("learning rate must be positive")
        if self.dset.d != self.game.d:
            raise ArgumentError("decision set and game differ in dimension")
        q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "eta", float(self.eta))


@dataclass
class SaddleSolution:
    p: np.ndarray
    g: EstimationFn
    value: float
    lower_bound: float
    iterations: int
    witness: tuple = (0, 0)
    method: str = CONIC

    @property
    def gap(self):
        return max(0.0, self.value - self.lower_bound)


def penalty_coefficient(eta, lam):
    """``(1 - 1/lam) (eta / lam)^(1/(lam - 1))``."""
    if lam <= 1:
        raise ArgumentError("lambda must exceed 1")
    return (1.0 - 1.0 / lam) * (eta / lam) ** (1.0 / (lam - 1.0))


def beta_table(game: Game, beta):
    """Tabulate a signal-measurable ``beta`` as a ``(k, |Sigma|)`` array.

    ``beta`` may be ``None`` (zero), a number (constant), the string
    ``"signal_squared"``, an array of that shape, or a callable ``(sigma, a)``
    taking the raw signal token.
    """
    S = len(game.alphabet)
    if beta is None:
        return np.zeros((game.k, S))
    if isinstance(beta, str):
        if beta != "signal_squared":
            raise ArgumentError(f"unknown beta {beta!r}")
        return np.tile([float(tok) ** 2 for tok in game.alphabet], (game.k, 1))
    if callable(beta):
        return np.array([[float(beta(tok, a)) for tok in game.alphabet] for a in range(game.k)])
    arr = np.asarray(beta, dtype=float)
    if arr.ndim == 0:
        return np.full((game.k, S), float(arr))
    if arr.shape != (game.k, S):
        raise ArgumentError("beta table must have shape (|A|, |Sigma|)")
    return arr


# -- exact evaluation ---------------------------------------------------------

def _stability(inst: LambdaInstance, p, contrib):
    """``(1/eta) sum_a p_a Psi_q(eta g_a / p_a)`` for contributions of shape ``(k, m, d)``; returns ``(m,)``."""
    x = inst.eta * contrib / p[:, None, None]
    vals = psi(inst.potential, inst.q, x)  # (k, m)
    return (p[:, None] * vals).sum(axis=0) / inst.eta


def lambda_table(inst: LambdaInstance, p, g: EstimationFn, vertices=None, penalty=None):
    """``Lambda`` for every outcome (rows) and vertex of ``D`` (columns).

    ``penalty`` is an optional ``(k, m)`` array subtracted as ``sum_a p_a penalty[a, z]``.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ZeroProbability("Lambda needs p(a) > 0 for every action")
    game = inst.game
    V = inst.dset.vertices if vertices is None else np.atleast_2d(np.asarray(vertices, dtype=float))
    contrib = g.contributions(game)  # (k, m, d)
    lin = (p @ game.loss_table)[:, None] - game.losses @ V.T  # (m, nv)
    gsum = contrib.sum(axis=0)  # (m, d)
    bias = gsum @ V.T - (gsum @ inst.q)[:, None]
    stab = _stability(inst, p, contrib)
    with np.errstate(invalid="ignore"):
        out = lin + bias + stab[:, None]
    if penalty is not None:
        out = out - (p @ penalty)[:, None]
    return out


def lambda_value(inst: LambdaInstance, z: int, a_star, p, g: EstimationFn) -> float:
    return float(lambda_table(inst, p, g, vertices=a_star)[z, 0])


def worst_case(inst: LambdaInstance, p, g: EstimationFn, penalty=None):
    """Exact ``max`` over outcomes and vertices; ties go to the lowest outcome, then vertex."""
    tab = lambda_table(inst, p, g, penalty=penalty)
    flat = np.where(np.isnan(tab), -np.inf, tab).ravel()
    if np.any(np.isposinf(flat)):
        i = int(np.argmax(np.isposinf(flat)))
    else:
        i = int(np.argmax(flat))
    z, v = divmod(i, tab.shape[1])
    return float(flat[i]), z, v


def lower_bound_constant(inst: LambdaInstance) -> float:
    """A constant ``C`` with ``Lambda >= C`` for all arguments, worst case over vertices of ``D``."""
    pot = inst.potential
    theta = pot.grad(inst.q)
    V = inst.dset.vertices
    spread = np.linalg.norm(V, axis=1) * np.linalg.norm(theta) + pot.value(V) + pot.conj(theta)
    return float(-np.max(spread) / inst.eta - 1.0)


def penalized_worst_case(inst, p, g, beta=None, lam=2.0):
    pen = None
    if beta is not None:
        pen = penalty_coefficient(inst.eta, lam) * beta_table(inst.game, beta)[
            np.arange(inst.game.k)[:, None], inst.game.signals
        ]
    return worst_case(inst, p, g, penalty=pen)


# -- certificates -------------------------------------------------------------

def dual_bound(inst: LambdaInstance, nu, penalty=None, fixed_p=None, floor=P_FLOOR):
    """Lower bound on the min-max value from weights ``nu`` over (outcome, vertex) pairs.

    For fixed weights the inner minimum over ``g`` is explicit: each signal
    contributes ``-(w / eta) D(mean of a* given the signal, q)``. What remains
    is linear in ``p`` and is minimised over the floored simplex (or evaluated
    at ``fixed_p``).
    """
    game = inst.game
    V = inst.dset.vertices
    nu = np.maximum(np.asarray(nu, dtype=float), 0.0)
    total = nu.sum()
    if total <= 0:
        return -math.inf
    nu = nu / total
    nz = nu.sum(axis=1)  # (m,)
    nv = nu @ V  # (m, d)
    # sum_i nu_i <a - v_i, l(z_i)> for every action
    c = game.loss_table @ nz - np.sum(nv * game.losses)
    if penalty is not None:
        c = c - penalty @ nz
    S = len(game.alphabet)
    for a in range(game.k):
        w = np.zeros(S)
        mean = np.zeros((S, game.d))
        np.add.at(w, game.signals[a], nz)
        np.add.at(mean, game.signals[a], nv)
        seen = w > 1e-300
        vbar = mean[seen] / w[seen, None]
        div = bregman(inst.potential, np.clip(vbar, 0.0, None), inst.q)
        c[a] -= np.sum(w[seen] * div) / inst.eta
    if fixed_p is not None:
        return float(np.dot(fixed_p, c))
    k = game.k
    return float(floor * c.sum() + (1 - k * floor) * c.min())


def g_box(inst: LambdaInstance, floor=P_FLOOR):
    """Per-coordinate bound on ``|g(a, sigma)_b|``: ``(1/eta) max over D_floor of |grad F(q) - grad F(q')|``."""
    V = inst.dset.vertices
    y = V.mean(axis=0)
    shrunk = (1 - floor) * V + floor * y
    lo, hi = shrunk.min(axis=0), shrunk.max(axis=0)
    gq = inst.potential.grad(inst.q)
    return np.maximum(np.abs(gq - inst.potential.grad(lo)), np.abs(inst.potential.grad(hi) - gq)) / inst.eta


# -- conic solver -------------------------------------------------------------

def _pairs(game: Game):
    """Observed (action, signal id) pairs and the ``(k, m)`` map from (a, z) to pair index."""
    pairs = []
    index = np.zeros((game.k, game.m), dtype=np.int64)
    for a in range(game.k):
        ids = np.unique(game.signals[a])
        base = len(pairs)
        pairs.extend((a, int(s)) for s in ids)
        index[a] = base + np.searchsorted(ids, game.signals[a])
    return pairs, index


def _conic_scale(potential: Potential, q):
    """``(scale, weight)`` with ``w = scale * h`` the cone variable and ``weight`` the stability weights."""
    if potential.kind == NEGENTROPY:
        return np.ones_like(q), q
    if potential.kind == NEG_SQRT:
        return np.sqrt(q), np.sqrt(q)
    if potential.kind == TSALLIS and abs(potential.s - 0.5) < 1e-12:
        # Psi of the 1/2-Tsallis entropy is 2 Psi_negsqrt(x / 2)
        return np.sqrt(q) / 2, 2 * np.sqrt(q)
    if potential.kind == LOG_BARRIER:
        return q, np.ones_like(q)
    # general s: w = c q^c h with c = 1 - s, weight q^s
    c = potential._c
    return c * q**c, q**potential.s


class ConicProgram:
    """A parametrised conic form of the min-max problem for one game, decision set and potential.

    The problem is built once; each call to :meth:`solve` only updates
    parameter values, so repeated rounds reuse the compiled program.
    All objective terms are multiplied by ``eta``.
    """

    def __init__(self, game: Game, dset: DecisionSet, potential: Potential, fixed_p=False, floor=P_FLOOR):
        self.game, self.dset, self.potential, self.floor = game, dset, potential, floor
        self.fixed_p = fixed_p
        k, m, d = game.k, game.m, game.d
        V = dset.vertices
        nv = len(V)
        self.pairs, self.index = _pairs(game)
        P = len(self.pairs)
        rep = np.zeros((P, k))
        rep[np.arange(P), [a for a, _ in self.pairs]] = 1.0
        agg = np.zeros((m, P))
        for a in range(k):
            agg[np.arange(m), self.index[a]] += 1.0

        self.M = cp.Parameter((m * nv, k))
        self.bias = cp.Parameter((d, nv))
        self.weight = cp.Parameter(d, nonneg=True)
        self.box = cp.Parameter((P, d), nonneg=True)
        self.p = cp.Variable(k)
        self.w = cp.Variable((P, d))
        self.t = cp.Variable()
        prow = rep @ self.p  # (P,)
        pmat = cp.reshape(prow, (P, 1), order="C") @ np.ones((1, d))
        cons = [cp.sum(self.p) == 1, cp.abs(self.w) <= self.box]
        if fixed_p:
            self.p_value = cp.Parameter(k, nonneg=True)
            cons.append(self.p == self.p_value)
        else:
            cons.append(self.p >= floor)
        kind = potential.kind
        if kind == NEGENTROPY:
            s = cp.Variable((P, d))
            cons.append(cp.constraints.ExpCone(-self.w, pmat, s))
            stab = (s - pmat + self.w) @ self.weight
        elif kind == LOG_BARRIER:
            stab = cp.sum(self.w + cp.rel_entr(pmat, pmat + self.w), axis=1)
        elif kind == TSALLIS and abs(potential.s - 0.5) > 1e-12:
            # p Psi(h / p) per coordinate is q^s ((r - p)/s + w/c) with r >= p^(1/c) (p + w)^(1 - 1/c)
            c = potential._c
            r = cp.Variable((P, d))
            cons.append(cp.constraints.PowCone3D(cp.vec(r, order="C"), cp.vec(pmat + self.w, order="C"),
                                                 cp.vec(pmat, order="C"), c))
            stab = ((r - pmat) / potential.s + self.w / c) @ self.weight
        else:
            u = cp.Variable((P, d))
            y = pmat + self.w
            cons.append(cp.SOC(cp.vec(u + y, order="C"),
                               cp.vstack([cp.vec(2 * self.w, order="C"), cp.vec(u - y, order="C")]), axis=0))
            stab = u @ self.weight
        lin = cp.reshape(self.M @ self.p, (m, nv), order="C")
        bias = (agg @ self.w) @ self.bias
        st = cp.reshape(agg @ stab, (m, 1), order="C") @ np.ones((1, nv))
        self.main = lin + bias + st <= self.t
        cons.append(self.main)
        self.problem = cp.Problem(cp.Minimize(self.t), cons)

    def matches(self, game, dset, potential, fixed_p):
        return game is self.game and dset is self.dset and potential == self.potential and fixed_p == self.fixed_p

    def solve(self, inst: LambdaInstance, penalty=None, p=None, max_iter=200):
        """Solve for ``inst``; returns ``(p, g, nu, iterations)``. ``penalty`` is ``(k, m)``."""
        game, q, eta = self.game, inst.q, inst.eta
        V = self.dset.vertices
        scale, weight = _conic_scale(self.potential, q)
        # M[(z, v), a] = eta (<a - v, l(z)> - penalty[a, z])
        lt = game.loss_table.T  # (m, k)
        base = lt[:, None, :] - (game.losses @ V.T)[:, :, None]
        if penalty is not None:
            base = base - penalty.T[:, None, :]
        self.M.value = eta * base.reshape(-1, game.k)
        self.bias.value = ((V - q) / scale).T
        self.weight.value = weight
        self.box.value = np.tile(eta * g_box(inst, self.floor) * scale, (len(self.pairs), 1))
        if self.fixed_p:
            self.p_value.value = np.asarray(p, dtype=float)
        try:
            self.problem.solve(solver=cp.CLARABEL, max_iter=max_iter)
        except cp.error.SolverError as exc:
            raise InfeasibleStep(f"conic solver failed: {exc}") from exc
        if self.p.value is None or self.w.value is None:
            raise InfeasibleStep(f"conic solver returned status {self.problem.status}")
        stats = self.problem.solver_stats
        iters = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
        p_out = np.asarray(self.p.value, dtype=float)
        if not self.fixed_p:
            p_out = np.maximum(p_out, self.floor)
            p_out = p_out / p_out.sum()
        else:
            p_out = np.asarray(p, dtype=float)
        h = np.asarray(self.w.value) / scale
        table = np.zeros((game.k, len(game.alphabet), game.d))
        for r, (a, s) in enumerate(self.pairs):
            table[a, s] = h[r] / eta
        nu = np.asarray(self.main.dual_value, dtype=float)
        return p_out, EstimationFn(table), nu, iters


_PROGRAMS: list = []


def _program(game, dset, potential, fixed_p):
    for prog in _PROGRAMS:
        if prog.matches(game, dset, potential, fixed_p):
            return prog
    prog = ConicProgram(game, dset, potential, fixed_p)
    _PROGRAMS.append(prog)
    del _PROGRAMS[:-8]
    return prog


# -- subgradient solver -------------------------------------------------------

def _subgradient(inst: LambdaInstance, penalty, fixed_p, budget, precision, p0=None, g0=None, floor=P_FLOOR):
    """Projected subgradient descent on the max-function with Polyak-type steps.

    Weights ``nu`` averaged over the active (outcome, vertex) witnesses give
    the lower bound used both for the step target and for the certificate.
    """
    game = inst.game
    k, m, d = game.k, game.m, game.d
    V = inst.dset.vertices
    pairs, index = _pairs(game)
    box = g_box(inst, floor)
    p = np.full(k, 1.0 / k) if fixed_p is None and p0 is None else np.asarray(fixed_p if fixed_p is not None else p0, float).copy()
    G = np.zeros((len(pairs), d))
    if g0 is not None:
        for r, (a, s) in enumerate(pairs):
            G[r] = g0(a, s)

    def table(Gm):
        t = np.zeros((k, len(game.alphabet), d))
        for r, (a, s) in enumerate(pairs):
            t[a, s] = Gm[r]
        return EstimationFn(t)

    def value(pv, Gm):
        return worst_case(inst, pv, table(Gm), penalty=penalty)

    f, z, v = value(p, G)
    if not np.isfinite(f):
        G[:] = 0.0
        f, z, v = value(p, G)
    best = (f, p.copy(), G.copy(), z, v)
    nu_acc = np.zeros((m, len(V)))
    lb = -math.inf
    it = 0
    for it in range(1, budget + 1):
        acts = np.arange(k)
        rows = index[:, z]
        x = inst.eta * G[rows] / p[:, None]
        grad_psi = psi_grad(inst.potential, inst.q, x)
        sg_G = np.zeros_like(G)
        np.add.at(sg_G, rows, (V[v] - inst.q)[None, :] + grad_psi)
        sg_p = game.loss_table[acts, z] - V[v] @ game.losses[z]
        sg_p = sg_p + (psi(inst.potential, inst.q, x) - np.sum(grad_psi * x, axis=-1)) / inst.eta
        if penalty is not None:
            sg_p = sg_p - penalty[acts, z]
        if fixed_p is not None:
            sg_p = np.zeros(k)
        else:
            sg_p = sg_p - sg_p.mean()
        norm2 = float(np.sum(sg_G**2) + np.sum(sg_p**2))
        if norm2 <= 1e-300:
            break
        target = lb + 0.5 * (best[0] - lb) if np.isfinite(lb) else best[0] - 1.0 / math.sqrt(it)
        step = max(f - target, 1e-12) / norm2
        nu_acc[z, v] += step
        for _ in range(40):
            G_new = np.clip(G - step * sg_G, -box, box)
            if fixed_p is None:
                p_new = np.maximum(p - step * sg_p, floor)
                p_new /= p_new.sum()
            else:
                p_new = p
            f_new, z_new, v_new = value(p_new, G_new)
            if np.isfinite(f_new):
                break
            step /= 2
        else:
            break
        p, G, f, z, v = p_new, G_new, f_new, z_new, v_new
        if f < best[0]:
            best = (f, p.copy(), G.copy(), z, v)
        if it % 25 == 0 or it == budget:
            lb = max(lb, dual_bound(inst, nu_acc, penalty, fixed_p, floor))
            if best[0] - lb <= precision:
                break
    lb = max(lb, dual_bound(inst, nu_acc, penalty, fixed_p, floor))
    f, p, G, z, v = best
    return SaddleSolution(p, table(G), f, lb, it, (z, v), SUBGRADIENT)


# -- public solvers -----------------------------------------------------------

def _finish(sol: SaddleSolution, precision):
    if not np.isfinite(sol.value) or sol.gap > precision:
        raise BudgetExhausted(
            f"certified value {sol.value:.6g} is {sol.gap:.3g} above the lower bound (precision {precision:g})",
            solution=sol,
        )
    return sol


def _penalty_matrix(inst, beta, lam):
    if beta is None:
        return None
    tab = beta_table(inst.game, beta)
    if np.any(tab < 0) or not np.all(np.isfinite(tab)):
        raise ArgumentError("beta must be finite and nonnegative")
    return penalty_coefficient(inst.eta, lam) * tab[np.arange(inst.game.k)[:, None], inst.game.signals]


def _solve(inst, penalty, fixed_p, precision, budget, method, g0=None):
    if budget < 1:
        raise ArgumentError("iteration budget must be at least 1")
    if method is None or method == CONIC:
        prog = _program(inst.game, inst.dset, inst.potential, fixed_p is not None)
        p, g, nu, iters = prog.solve(inst, penalty, fixed_p, max_iter=min(budget, 500))
        value, z, v = worst_case(inst, p, g, penalty=penalty)
        if not np.isfinite(value):
            # the interior-point iterate sits on the boundary of the dual domain; pull g in slightly
            for shrink in (1 - 1e-9, 1 - 1e-6, 1 - 1e-3):
                g2 = EstimationFn(g.table * shrink)
                value, z, v = worst_case(inst, p, g2, penalty=penalty)
                if np.isfinite(value):
                    g = g2
                    break
        lb = dual_bound(inst, nu, penalty, fixed_p)
        sol = SaddleSolution(p, g, value, lb, iters, (z, v), CONIC)
    elif method == SUBGRADIENT:
        sol = _subgradient(inst, penalty, fixed_p, budget, precision, g0=g0)
    else:
        raise ArgumentError(f"unknown method {method!r}")
    if g0 is not None:
        p0 = sol.p if fixed_p is None else fixed_p
        v0, z0, a0 = worst_case(inst, p0, g0, penalty=penalty)
        if v0 < sol.value:
            sol = SaddleSolution(np.asarray(p0, float), g0, v0, sol.lower_bound, sol.iterations, (z0, a0), sol.method)
    return sol


def solve_exploration(inst: LambdaInstance, precision=1e-3, budget=10_000, method=None) -> SaddleSolution:
    """Approximately minimise ``max_{z, a*} Lambda`` over ``p >= floor`` and bounded ``g``.

    Raises :class:`BudgetExhausted` (carrying the best solution) when the
    certified value is more than ``precision`` above the lower bound.
    """
    return _finish(_solve(inst, None, None, precision, budget, method), precision)


def solve_exploration_adaptive(inst: LambdaInstance, beta, lam=2.0, precision=1e-3, budget=10_000,
                               method=None) -> SaddleSolution:
    """As :func:`solve_exploration` for ``Lambda - (1 - 1/lam)(eta/lam)^(1/(lam-1)) sum_a p_a beta(Phi_a(z), a)``."""
    pen = _penalty_matrix(inst, beta, lam)
    return _finish(_solve(inst, pen, None, precision, budget, method), precision)


def solve_estimation_fixed_p(inst: LambdaInstance, p, precision=1e-3, budget=10_000, method=None, g0=None):
    """Minimise the worst case over ``g`` alone; returns ``(g, value)``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
        raise ZeroProbability("p must be a full-support distribution")
    sol = _finish(_solve(inst, None, p, precision, budget, method, g0=g0), precision)
    return sol.g, sol.value


def solution_to_dict(sol: SaddleSolution, game: Game):
    doc = {"p": sol.p.tolist(), "value": sol.value, "lower_bound": sol.lower_bound,
           "iterations": sol.iterations, "method": sol.method}
    doc.update(table_to_dict(sol.g, game))
    return doc


# -- the full loop ------------------------------------------------------------

@dataclass
class ExpOptRun:
    qs: np.ndarray
    ps: np.ndarray
    actions: np.ndarray
    signals: np.ndarray
    outcomes: np.ndarray
    estimates: np.ndarray
    certified: np.ndarray
    lower: np.ndarray
    regret: float
    bound: float
    diameter: float
    eps_d: float
    md_audit: learners.RegretAudit
    tables: list = field(default_factory=list, repr=False)


def realized_regret(game: Game, actions, outcomes, dset=None):
    """``max_a sum_t <A_t - a, l(z_t)>`` over the actions of the game."""
    played = game.loss_table[actions, outcomes].sum()
    totals = game.loss_table[:, outcomes].sum(axis=1)
    return float(played - totals.min())


def run_exp_opt(game: Game, dset: DecisionSet, potential: Potential, eta, precision, n, adversary, seed=0,
                mode=learners.MD, run=0, method=None, budget=10_000) -> ExpOptRun:
    """Mirror descent or FTRL with ``(P_t, G_t)`` from :func:`solve_exploration` every round."""
    if n < 1:
        raise ArgumentError("need at least one round")
    if not game.is_simplex_game():
        raise ArgumentError("the learner only supports games whose actions are the standard basis")
    rng = run_rng(seed, run)
    outcomes = adversary.outcomes_for(game, n, rng)
    u = rng.random(n)
    state = learners.init(potential, dset, mode, eta)
    d = game.d
    qs, ps, est = np.zeros((n, d)), np.zeros((n, game.k)), np.zeros((n, d))
    acts = np.zeros(n, dtype=np.int64)
    sigs = np.zeros(n, dtype=np.int64)
    cert, low = np.zeros(n), np.zeros(n)
    tables = []
    for t in range(n):
        inst = LambdaInstance(game, dset, state.q, eta, potential)
        sol = solve_exploration(inst, precision, budget, method)
        a = int(sample_action(sol.p, u[t]))
        s = int(game.signals[a, outcomes[t]])
        qs[t], ps[t], acts[t], sigs[t] = state.q, sol.p, a, s
        est[t] = sol.g(a, s) / sol.p[a]
        cert[t], low[t] = sol.value, sol.lower_bound
        tables.append(sol.g.table)
        state = learners.step(state, est[t])
    diam = learners.diameter(potential, dset)
    eps_d = max(epsilon_D(game, dset), 0.0)
    regret = realized_regret(game, acts, outcomes)
    bound = diam / eta + n * (eps_d + precision + float(cert.max()))
    audit = learners.audit_regret_bound(potential, dset, qs, np.full(n, eta), est)
    return ExpOptRun(qs, ps, acts, sigs, outcomes, est, cert, low, regret, bound, diam, eps_d, audit, tables)
