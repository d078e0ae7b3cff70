"""Episodes, Monte Carlo summaries, the batched sqrt(2dn) bandit experiment, export and audits.

The environment owns the interaction protocol: each round it asks the policy
for a distribution, samples the action itself, and only then hands the
signal back. Randomness per run comes from :func:`adversaries.run_rng`; the
adversary draws its whole sequence first, then ``n`` uniforms drive the
inverse-CDF action draws.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import learners
from .adaptive import ledger_audit, tech1_audit
from .adversaries import run_rng, sample_action
from .bayes_ids import ratio_lemma_audit
from .errors import ArgumentError, InfostabError
from .estimators import EstimationFn, bandit_stability_audit, bandit_unbiasedness_residual, sqrt2dn_estimator
from .expopt import LambdaInstance, solve_exploration
from .games import DecisionSet, Game, build_standard
from .geometry import Potential, bdiff_audit, duality_residual

CSV_COLUMNS = ("run", "round", "action", "signal", "instant_loss", "cum_regret")
SQRT2 = math.sqrt(2.0)


# -- records --------------------------------------------------------------------

@dataclass
class RegretRecord:
    """One episode. ``losses[t, a]`` is the loss action ``a`` would have suffered in round ``t``."""

    run: int
    actions: np.ndarray
    signals: list
    instant_loss: np.ndarray
    losses: np.ndarray

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.instant_loss = np.asarray(self.instant_loss, dtype=float)
        self.losses = np.asarray(self.losses, dtype=float).reshape(len(self.actions), -1)
        self.signals = list(self.signals)

    @property
    def n(self):
        return len(self.actions)

    @property
    def cum_regret(self):
        """``max_a sum_{s<=t} <A_s - a, l(z_s)>`` for every prefix."""
        if self.n == 0:
            return np.zeros(0)
        return np.cumsum(self.instant_loss) - np.cumsum(self.losses, axis=0).min(axis=1)

    @property
    def regret(self):
        return float(self.cum_regret[-1]) if self.n else 0.0

    @property
    def best_loss(self):
        return float(self.losses.sum(axis=0).min()) if self.n else 0.0


def _plain(tok):
    if isinstance(tok, tuple):
        return [_plain(t) for t in tok]
    if isinstance(tok, (np.floating, np.integer)):
        return tok.item()
    return tok


def _unplain(tok):
    return tuple(_unplain(t) for t in tok) if isinstance(tok, list) else tok


def record_to_dict(rec: RegretRecord):
    return {
        "run": rec.run,
        "actions": rec.actions.tolist(),
        "signals": [_plain(s) for s in rec.signals],
        "instant_loss": rec.instant_loss.tolist(),
        "losses": rec.losses.tolist(),
        "cum_regret": rec.cum_regret.tolist(),
    }


def record_from_dict(doc) -> RegretRecord:
    k = len(doc["losses"][0]) if doc["losses"] else 0
    losses = np.asarray(doc["losses"], dtype=float).reshape(len(doc["actions"]), k)
    return RegretRecord(int(doc["run"]), doc["actions"], [_unplain(s) for s in doc["signals"]],
                        doc["instant_loss"], losses)


# -- policies -------------------------------------------------------------------

class Policy:
    """Base class. ``distribution`` is called before the action is drawn, ``observe`` after."""

    name = "policy"

    def reset(self, game: Game, n: int):
        self.game = game
        self.n = n

    def distribution(self) -> np.ndarray:
        raise NotImplementedError

    def observe(self, a: int, signal_id: int, signal):
        pass


class FixedAction(Policy):
    name = "fixed"

    def __init__(self, action=0):
        self.action = int(action)

    def distribution(self):
        if not 0 <= self.action < self.game.k:
            raise ArgumentError(f"action {self.action} not in the game")
        p = np.zeros(self.game.k)
        p[self.action] = 1.0
        return p


class Uniform(Policy):
    name = "uniform"

    def distribution(self):
        return np.full(self.game.k, 1.0 / self.game.k)


def _require_bandit(game: Game):
    if not game.is_simplex_game():
        raise ArgumentError("policy needs a game whose actions are the standard basis")
    for a in range(game.k):
        for z in range(game.m):
            if not np.isscalar(game.signal(a, z)) or abs(float(game.signal(a, z)) - game.losses[z, a]) > 1e-12:
                raise ArgumentError("policy needs bandit feedback (the signal is the loss of the action)")


class MirrorDescentIW(Policy):
    """Mirror descent with ``P_t = Q_t`` and the importance-weighted estimate ``sigma e_a / q_a``."""

    name = "md_iw"

    def __init__(self, potential: Potential | None = None, eta=None, eps=0.0):
        self.potential = Potential.negentropy() if potential is None else potential
        self.eta = eta
        self.eps = eps

    def reset(self, game, n):
        super().reset(game, n)
        _require_bandit(game)
        d = game.d
        self.rate = math.sqrt(2 * math.log(d) / (n * d)) if self.eta is None else float(self.eta)
        dset = DecisionSet.clipped_simplex(d, self.eps) if self.eps > 0 else DecisionSet.simplex(d)
        self.state = learners.init(self.potential, dset, learners.MD, self.rate)

    def distribution(self):
        return self.state.q

    def observe(self, a, signal_id, signal):
        est = np.zeros(self.game.d)
        est[a] = float(signal) / self.state.q[a]
        self.state = learners.md_step(self.state, est)


class Sqrt2dnPolicy(Policy):
    """``-2 sqrt`` mirror descent on the simplex with the shifted unbiased estimator and ``eta = sqrt(8/n)``."""

    name = "sqrt2dn"

    def __init__(self, eta=None):
        self.eta = eta

    def reset(self, game, n):
        super().reset(game, n)
        _require_bandit(game)
        self.rate = math.sqrt(8.0 / n) if self.eta is None else float(self.eta)
        self.state = learners.init(Potential.neg_sqrt(), DecisionSet.simplex(game.d), learners.MD, self.rate)

    def distribution(self):
        return self.state.q

    def observe(self, a, signal_id, signal):
        q = self.state.q
        est = sqrt2dn_estimator(q, self.rate, a, float(signal)) / q[a]
        self.state = learners.md_step(self.state, est)


class ExpOptPolicy(Policy):
    """Solves the exploration problem every round and updates with ``G_t(A_t, sigma_t) / P_t(A_t)``."""

    name = "expopt"

    def __init__(self, potential: Potential, eta, precision=1e-3, mode=learners.MD, dset=None, method=None):
        self.potential = potential
        self.eta = float(eta)
        self.precision = precision
        self.mode = mode
        self.dset = dset
        self.method = method
        self.certified = []

    def reset(self, game, n):
        super().reset(game, n)
        if not game.is_simplex_game():
            raise ArgumentError("the learner only supports games whose actions are the standard basis")
        dset = DecisionSet.conv_hull(game) if self.dset is None else self.dset
        self.state = learners.init(self.potential, dset, self.mode, self.eta)
        self.certified = []
        self._sol = None

    def distribution(self):
        inst = LambdaInstance(self.game, self.state.dset, self.state.q, self.eta, self.potential)
        self._sol = solve_exploration(inst, self.precision, method=self.method)
        self.certified.append(self._sol.value)
        return self._sol.p

    def observe(self, a, signal_id, signal):
        sol = self._sol
        self.state = learners.step(self.state, sol.g(a, signal_id) / sol.p[a])


POLICIES = {"fixed": FixedAction, "uniform": Uniform, "md_iw": MirrorDescentIW, "exp3": MirrorDescentIW,
            "sqrt2dn": Sqrt2dnPolicy, "expopt": ExpOptPolicy}


def policy_from_dict(doc) -> Policy:
    doc = dict(doc or {})
    kind = doc.pop("kind", "sqrt2dn")
    if kind not in POLICIES:
        raise ArgumentError(f"unknown policy {kind!r}")
    if "potential" in doc:
        doc["potential"] = Potential.from_name(doc["potential"], doc.pop("s", None))
    if kind == "expopt":
        doc.setdefault("potential", Potential.neg_sqrt())
        doc.setdefault("eta", 0.1)
    return POLICIES[kind](**doc)


# -- episodes and Monte Carlo ---------------------------------------------------

def run_episode(policy: Policy, game: Game, adversary, n, seed=0, run=0) -> RegretRecord:
    if n < 1:
        raise ArgumentError("need at least one round")
    rng = run_rng(seed, run)
    outcomes = adversary.outcomes_for(game, n, rng)
    u = rng.random(n)
    policy.reset(game, n)
    table = game.loss_table
    acts = np.zeros(n, dtype=np.int64)
    signals = []
    for t in range(n):
        p = np.asarray(policy.distribution(), dtype=float)
        if p.shape != (game.k,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-8:
            raise ArgumentError(f"policy returned an invalid distribution in round {t}")
        a = int(sample_action(p, u[t]))
        # the signal only exists once the action is committed
        sid = int(game.signals[a, outcomes[t]])
        acts[t] = a
        signals.append(game.alphabet[sid])
        policy.observe(a, sid, game.alphabet[sid])
    losses = table[:, outcomes].T
    return RegretRecord(run, acts, signals, losses[np.arange(n), acts], losses)


@dataclass
class MonteCarloSummary:
    regrets: np.ndarray
    per_round: np.ndarray
    records: list | None = None

    @property
    def runs(self):
        return len(self.regrets)

    @property
    def mean(self):
        return float(self.regrets.mean())

    @property
    def se(self):
        return float(self.regrets.std(ddof=1) / math.sqrt(self.runs)) if self.runs > 1 else 0.0

    @property
    def ci(self):
        h = 1.96 * self.se
        return self.mean - h, self.mean + h

    def to_dict(self):
        lo, hi = self.ci
        return {"runs": self.runs, "mean_regret": self.mean, "se": self.se, "ci95": [lo, hi],
                "per_round_mean": self.per_round.tolist()}


def summary_from_records(records) -> MonteCarloSummary:
    if not records:
        raise ArgumentError("no records to summarise")
    return MonteCarloSummary(np.array([r.regret for r in records]),
                             np.mean([r.cum_regret for r in records], axis=0), list(records))


def monte_carlo(policy: Policy, game: Game, adversary, n, runs, seed=0, keep_records=False) -> MonteCarloSummary:
    if runs < 1:
        raise ArgumentError("need at least one run")
    records = [run_episode(policy, game, adversary, n, seed, r) for r in range(runs)]
    out = summary_from_records(records)
    if not keep_records:
        out.records = None
    return out


# -- batched sqrt(2dn) experiment -----------------------------------------------

@dataclass
class Sqrt2dnReport:
    d: int
    n: int
    eta: float
    regrets: np.ndarray
    per_round: np.ndarray
    records: list | None = None

    @property
    def bound(self):
        return math.sqrt(2 * self.d * self.n)

    @property
    def mean(self):
        return float(self.regrets.mean())

    @property
    def se(self):
        k = len(self.regrets)
        return float(self.regrets.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0

    @property
    def holds(self):
        """``None`` when ``n <= 4``: the stability bound behind the guarantee needs ``eta < sqrt 2``."""
        if self.n <= 4:
            return None
        return bool(self.mean <= self.bound + 3 * self.se)

    def to_dict(self):
        return {"d": self.d, "n": self.n, "eta": self.eta, "seeds": len(self.regrets), "mean_regret": self.mean,
                "se": self.se, "bound": self.bound, "holds": self.holds}


def run_sqrt2dn_bandit(d, n, adversary, seeds, seed=0, keep_records=True) -> Sqrt2dnReport:
    """All seeds as one batch; each seed reproduces :func:`run_episode` with :class:`Sqrt2dnPolicy`."""
    if n < 1 or d < 2 or seeds < 1:
        raise ArgumentError("need n >= 1, d >= 2 and at least one seed")
    rngs = [run_rng(seed, r) for r in range(seeds)]
    losses = np.stack([adversary.losses(n, d, g) for g in rngs])
    u = np.stack([g.random(n) for g in rngs])
    if np.any((losses < 0) | (losses > 1)):
        raise ArgumentError("bandit losses must lie in [0, 1]")
    pot = Potential.neg_sqrt()
    eta = math.sqrt(8.0 / n)
    rows = np.arange(seeds)
    q = np.broadcast_to(learners.minimizer(pot, DecisionSet.simplex(d)), (seeds, d)).copy()
    acts = np.zeros((seeds, n), dtype=np.int64)
    for t in range(n):
        a = sample_action(q, u[:, t])
        acts[:, t] = a
        sigma = losses[rows, t, a]
        qa = q[rows, a]
        h = 1.0 / (q + np.sqrt(q))
        est = -qa[:, None] * eta * h / 8.0
        est[rows, a] += sigma - 0.5 + eta / 8.0 * (1.0 + h[rows, a])
        est /= qa[:, None]
        q = learners.simplex_argmin(pot, pot.grad(q) - eta * est)
    inst = np.take_along_axis(losses, acts[..., None], axis=-1)[..., 0]
    cum = np.cumsum(inst, axis=1) - np.cumsum(losses, axis=1).min(axis=2)
    records = None
    if keep_records:
        records = [RegretRecord(r, acts[r], inst[r].tolist(), inst[r], losses[r]) for r in range(seeds)]
    return Sqrt2dnReport(d, n, eta, cum[:, -1].copy(), cum.mean(axis=0), records)


# -- export ---------------------------------------------------------------------

def _csv_signal(sig):
    return sig if np.isscalar(sig) else json.dumps(_plain(sig))


def export(records, fmt, path):
    path = Path(path)
    fmt = fmt.lower()
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in records:
                cr = rec.cum_regret
                for t in range(rec.n):
                    w.writerow([rec.run, t + 1, int(rec.actions[t]), _csv_signal(rec.signals[t]),
                                repr(float(rec.instant_loss[t])), repr(float(cr[t]))])
    elif fmt == "json":
        path.write_text(json.dumps({"records": [record_to_dict(r) for r in records]}))
    else:
        raise ArgumentError(f"unknown export format {fmt!r}")


def load_records(path):
    return [record_from_dict(r) for r in json.loads(Path(path).read_text())["records"]]


def read_csv(path):
    """Rows of an exported CSV with numeric columns parsed."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["run"], r["round"], r["action"] = int(r["run"]), int(r["round"]), int(r["action"])
        r["instant_loss"], r["cum_regret"] = float(r["instant_loss"]), float(r["cum_regret"])
    return rows


# -- audit battery --------------------------------------------------------------

@dataclass
class AuditEntry:
    name: str
    passed: bool
    samples: int
    worst: float | None = None
    witness: dict | None = None
    error: str | None = None

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "samples": self.samples, "worst": self.worst,
                "witness": self.witness, "error": self.error}


@dataclass
class AuditReport:
    entries: list = field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def to_dict(self):
        return {"passed": self.passed, "audits": [e.to_dict() for e in self.entries]}


def _first_fail(holds, **arrays):
    i = int(np.flatnonzero(~np.asarray(holds))[0])
    return {k: np.asarray(v)[i].tolist() for k, v in arrays.items()}


def _audit_bandit_stability(rng, cfg):
    k = cfg["samples"]
    d = rng.integers(2, 9, size=k)
    out = []
    for dd in np.unique(d):
        m = int((d == dd).sum())
        q = rng.dirichlet(np.ones(dd), size=m)
        z = rng.uniform(0, 1, size=(m, dd))
        eta = rng.uniform(1e-3, SQRT2, size=m) if cfg.get("inject_eta") is None else np.full(m, cfg["inject_eta"])
        res = bandit_stability_audit(q, z, eta)
        out.append((res, q, z, eta))
    worst = max(float(np.max(r.lhs - r.rhs)) for r, *_ in out)
    for res, q, z, eta in out:
        if not np.all(res.holds):
            return AuditEntry("bandit_stability", False, k, worst, _first_fail(res.holds, q=q, z=z, eta=eta))
    return AuditEntry("bandit_stability", True, k, worst)


def _audit_unbiasedness(rng, cfg):
    k = cfg["samples"]
    bias = float(cfg.get("inject_bias", 0.0))
    worst, wit = 0.0, None
    for _ in range(k):
        d = int(rng.integers(2, 9))
        q = rng.dirichlet(np.ones(d))
        eta = float(rng.uniform(1e-3, SQRT2))
        z = rng.uniform(0, 1, size=(1, d))

        def g(a, sigma, q=q, eta=eta, d=d):
            out = sqrt2dn_estimator(q, eta, a, sigma)
            if a == 0:
                out[0] += bias
            return out

        rep = bandit_unbiasedness_residual(EstimationFn(closure=g, d=d), z)
        if rep.residual > worst:
            worst = rep.residual
            if not rep.ok:
                wit = {"q": q.tolist(), "eta": eta, "z": z[0].tolist(), "pair": list(rep.witness[1:])}
    return AuditEntry("unbiasedness", wit is None, k, worst, wit)


def _audit_duality(rng, cfg):
    k = cfg["samples"]
    worst, wit = 0.0, None
    for pot in (Potential.negentropy(), Potential.log_barrier(), Potential.neg_sqrt(), Potential.tsallis(0.5)):
        p = rng.dirichlet(np.ones(4), size=k) + 1e-9
        q = rng.dirichlet(np.ones(4), size=k) + 1e-9
        res = duality_residual(pot, p, q)
        i = int(np.argmax(res))
        if res[i] > worst:
            worst = float(res[i])
        if res[i] >= 1e-8 and wit is None:
            wit = {"potential": str(pot), "p": p[i].tolist(), "q": q[i].tolist(), "residual": float(res[i])}
    return AuditEntry("bregman_duality", wit is None, 4 * k, worst, wit)


def _audit_md(rng, cfg):
    runs, n, d = max(cfg["samples"] // 100, 1), 100, 3
    worst, wit = -np.inf, None
    for pot in (Potential.negentropy(), Potential.log_barrier(), Potential.neg_sqrt(), Potential.tsallis(0.5)):
        dset = DecisionSet.clipped_simplex(d, 0.01) if pot.kind == "logbarrier" else DecisionSet.simplex(d)
        arms = rng.integers(0, d, size=(runs, n))
        vals = rng.uniform(0, 1, size=(runs, n)) / rng.uniform(0.05, 1, size=(runs, n))
        losses = np.zeros((runs, n, d))
        np.put_along_axis(losses, arms[..., None], vals[..., None], axis=-1)
        for mode, etas in ((learners.MD, np.full((runs, n), 0.1)),
                           (learners.FTRL, np.broadcast_to(0.5 / np.sqrt(np.arange(1, n + 1)), (runs, n)))):
            qs = learners.run_trajectory(pot, dset, mode, etas, losses)
            res = learners.audit_regret_bound(pot, dset, qs, etas, losses)
            worst = max(worst, float(np.max(res.lhs - res.rhs)))
            if not np.all(res.holds) and wit is None:
                i = int(np.flatnonzero(~res.holds)[0])
                wit = {"potential": str(pot), "mode": mode, "run": i, "lhs": float(res.lhs[i]),
                       "rhs": float(res.rhs[i])}
    return AuditEntry("md_regret_bound", wit is None, runs * 8, worst, wit)


def _audit_ratio(rng, cfg):
    k = max(cfg["samples"] // 100, 1)
    lams = [2.0, 2.5, 3.0, 4.0]
    for i in range(k):
        delta = rng.uniform(-0.3, 1, size=3)
        info = rng.uniform(0, 1, size=3)
        for lam, res in zip(lams, ratio_lemma_audit(delta, info, lams, grid_res=cfg.get("grid_res", 200), rng=rng)):
            if not (res.convexity_ok and res.part_b_ok):
                return AuditEntry("ids_ratio", False, k, None,
                                  {"delta": delta.tolist(), "info": info.tolist(), "lam": lam})
    return AuditEntry("ids_ratio", True, k)


def _audit_tech1(rng, cfg):
    k = cfg["samples"]
    worst, wit = -np.inf, None
    for lam in (1.5, 2.0, 3.0):
        for _ in range(max(k // 3, 1)):
            b = rng.uniform(0, 1, size=int(rng.integers(2, 100))) ** rng.uniform(0.2, 5)
            b[0] = max(b[0], b[1:].max(), 1e-12)
            lhs, rhs, holds = tech1_audit(b, lam)
            worst = max(worst, float(lhs - rhs))
            if not holds and wit is None:
                wit = {"lam": lam, "betas": b.tolist()}
    return AuditEntry("tech1", wit is None, k, worst, wit)


def _audit_ledger(rng, cfg):
    k = cfg["samples"]
    worst, wit = -np.inf, None
    for lam in (1.5, 2.0, 3.0):
        betas = rng.uniform(0, 1, size=(k, 50)) * (rng.uniform(size=(k, 50)) < 0.5)
        diam = float(rng.uniform(0.1, 5))
        res = ledger_audit(betas, 1.0, diam, lam)
        worst = max(worst, float(np.max(res.lhs - res.rhs)))
        if not np.all(res.holds) and wit is None:
            wit = {"lam": lam, "diam": diam, **_first_fail(res.holds, betas=betas)}
    return AuditEntry("adaptive_ledger", wit is None, 3 * k, worst, wit)


def _audit_bdiff(rng, cfg):
    k = cfg["samples"]
    d = 4
    s = rng.uniform(0, 1, size=k)
    q = rng.dirichlet(np.ones(d), size=k)
    eps = rng.uniform(-1, 1, size=(k, d))
    r = rng.uniform(0, 1, size=(k, d))
    worst, wit = -np.inf, None
    for sv in np.unique(np.round(s, 2)):
        m = np.round(s, 2) == sv
        lhs, rhs, holds = bdiff_audit(float(sv), eps[m], q[m], r[m])
        worst = max(worst, float(np.max(lhs - rhs)))
        if not np.all(holds) and wit is None:
            wit = {"s": float(sv), **_first_fail(holds, q=q[m], eps=eps[m], r=r[m])}
    return AuditEntry("bdiff", wit is None, k, worst, wit)


def _audit_solver(rng, cfg):
    eps = cfg.get("precision", 1e-3)
    worst, wit, count = -np.inf, None, 0
    for d in cfg.get("solver_dims", (2, 3)):
        game = build_standard("armed_bandit", d=d)
        for eta in cfg.get("solver_etas", (0.1,)):
            inst = LambdaInstance(game, DecisionSet.simplex(d), np.full(d, 1.0 / d), eta, Potential.neg_sqrt())
            sol = solve_exploration(inst, eps)
            excess = sol.value - (eta * math.sqrt(d) / 4 + eps)
            worst = max(worst, excess)
            count += 1
            if excess > 0 and wit is None:
                wit = {"d": d, "eta": eta, "value": sol.value}
    return AuditEntry("solver_oracle", wit is None, count, worst, wit)


AUDITS = {
    "adaptive_ledger": _audit_ledger,
    "bandit_stability": _audit_bandit_stability,
    "bdiff": _audit_bdiff,
    "bregman_duality": _audit_duality,
    "ids_ratio": _audit_ratio,
    "md_regret_bound": _audit_md,
    "solver_oracle": _audit_solver,
    "tech1": _audit_tech1,
    "unbiasedness": _audit_unbiasedness,
}


def audit_all(config=None) -> AuditReport:
    """Run every audit (or ``config['only']``) with per-audit generators; entries sorted by name.

    Config keys: ``seed``, ``samples``, ``only``, and the fault injections
    ``inject_bias`` (added to the first coordinate of ``g(0, .)``) and
    ``inject_eta`` (forces the learning rate of the stability audit).
    A raised precondition or domain error is reported as a failed entry.
    """
    cfg = {"seed": 0, "samples": 1000}
    cfg.update(config or {})
    names = sorted(cfg.get("only") or AUDITS)
    report = AuditReport()
    for name in names:
        if name not in AUDITS:
            raise ArgumentError(f"unknown audit {name!r}")
        rng = run_rng(cfg["seed"], sorted(AUDITS).index(name))
        try:
            entry = AUDITS[name](rng, cfg)
        except InfostabError as exc:
            entry = AuditEntry(name, False, 0, None, {"error_type": type(exc).__name__}, str(exc))
        report.entries.append(entry)
    return report
