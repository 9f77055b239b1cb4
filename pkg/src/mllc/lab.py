"""Conditional-regret oracles and an empirical checker for consistency bounds.

Everything here works at a single input point: a conditional distribution
``p`` over the ``2**l`` labelings and a score vector ``h``.  With unrestricted
scores the bound to check reads

    target_regret(p, h) <= Gamma(surrogate_regret(p, h))

where each regret is the conditional error at ``h`` minus its infimum over all
score vectors.  Target costs are enumerated exactly.  Surrogate infima come
from closed forms or linear programs where the family allows it, and from
multi-start damped Newton descent otherwise.

An inexact surrogate minimizer can only overestimate the infimum, shrinking
the measured surrogate regret.  Failed minimizations therefore produce false
violations, never false passes; such trials are reported as flagged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import xlogy

from .errors import CapacityError, DimensionError, DomainError
from .labels import (
    Hamming,
    LabelVector,
    TargetLoss,
    admissible_mask,
    decode_scores,
    l_max,
    loss_column,
    loss_matrix,
    sign_matrix,
)
from .surrogates import (
    GCE,
    MAE,
    BinaryLogistic,
    BinaryRelevance,
    CompSum,
    Constrained,
    Exp,
    Hinge,
    Log,
    MLLogistic,
    RhoMargin,
    SqHinge,
    SumExp,
    SurrogateSpec,
    family_param,
)

MAX_COST_LABELS = 16
MAX_MINIMIZE_LABELS = 10
TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConditionalDistribution:
    l: int
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (1 << self.l,):
            raise DimensionError(f"need {1 << self.l} probabilities for l={self.l}, got {probs.shape}")
        if (probs < 0).any() or not np.isfinite(probs).all():
            raise DomainError("probabilities must be finite and non-negative")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, y: LabelVector):
        probs = np.zeros(1 << y.l)
        probs[y.bits] = 1.0
        return cls(y.l, probs)

    @classmethod
    def uniform(cls, l):
        return cls(l, np.full(1 << l, 1.0 / (1 << l)))

    def label_marginals(self) -> np.ndarray:
        """``P(y_i = +1)`` for each label."""
        return (sign_matrix(self.l) > 0).T.astype(float) @ self.probs


def _as_dist(p) -> ConditionalDistribution:
    if isinstance(p, ConditionalDistribution):
        return p
    probs = np.asarray(p, dtype=float)
    l = int(round(math.log2(probs.size))) if probs.size else 0
    return ConditionalDistribution(l, probs)


def random_distribution(l: int, seed: int, concentration: float = 1.0, trial: int = 0) -> ConditionalDistribution:
    """Symmetric Dirichlet draw over the ``2**l`` labelings.

    Normalized Gamma variates from a Philox stream keyed by
    ``(seed, l, trial)``; identical on every platform.
    """
    if not 1 <= l <= MAX_COST_LABELS:
        raise CapacityError(f"random distributions need 1 <= l <= {MAX_COST_LABELS}, got {l}")
    if not concentration > 0:
        raise DomainError(f"concentration must be positive, got {concentration}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, l, trial, 0])))
    g = rng.standard_gamma(concentration, size=1 << l)
    total = g.sum()
    if total == 0.0:  # every variate underflowed; keep the draw deterministic
        g[np.argmax(g)] = 1.0
        total = 1.0
    probs = g / total
    probs[np.argmax(probs)] += 1.0 - math.fsum(probs)
    return ConditionalDistribution(l, probs)


def random_scores(l: int, seed: int, trial: int = 0, scale: float = 2.0) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, l, trial, 1])))
    return scale * rng.standard_normal(l)


# ---------------------------------------------------------------------------
# target side


def expected_losses(p, target: TargetLoss, extend: bool = False) -> np.ndarray:
    """``c[y'] = E_y L(y', y)`` for every prediction bitmask ``y'``."""
    p = _as_dist(p)
    l = p.l
    if l > MAX_COST_LABELS:
        raise CapacityError(f"expected losses need l <= {MAX_COST_LABELS}, got {l}")
    if l <= 12:
        return loss_matrix(target, l, extend=extend) @ p.probs
    c = np.zeros(1 << l)
    for m in np.flatnonzero(p.probs):
        c += p.probs[m] * loss_column(target, LabelVector(l, int(m)), extend=extend)
    return c


def bayes_costs(p, target: TargetLoss):
    """Expected loss of every prediction and the Bayes prediction.

    Inadmissible predictions cost ``inf``.  The argmin is the smallest bitmask
    among exact minimizers.
    """
    p = _as_dist(p)
    c = expected_losses(p, target)
    if target.kappa is not None:
        c = np.where(admissible_mask(target, p.l), c, np.inf)
    return c, LabelVector(p.l, int(np.argmin(c)))


def target_conditional_regret(p, target: TargetLoss, scores) -> float:
    """``c[prediction(h)] - min c``."""
    p = _as_dist(p)
    s = np.asarray(scores, dtype=float)
    if s.shape != (p.l,):
        raise DimensionError(f"{s.shape} scores for l={p.l}")
    c, y_star = bayes_costs(p, target)
    return float(c[decode_scores(s, target).bits] - c[y_star.bits])


# ---------------------------------------------------------------------------
# surrogate side


def _lse(z):
    m = z.max()
    return m + math.log(np.exp(z - m).sum())


def _surrogate_weights(p, spec):
    if isinstance(spec, CompSum):
        return 1.0 - expected_losses(p, spec.target, extend=True)
    return expected_losses(p, spec.target, extend=True)


def conditional_objective(p, spec: SurrogateSpec):
    """``h -> (conditional error, gradient)`` for one distribution, vectorized.

    The returned function also carries ``.hessian(h)``; at kinks the
    right-derivative convention of the margin losses applies.
    """
    p = _as_dist(p)
    l = p.l
    if isinstance(spec, BinaryRelevance):
        eta = p.label_marginals()
        phi = spec.phi

        def f(h):
            h = np.asarray(h, dtype=float)
            val = eta * phi.value(h) + (1 - eta) * phi.value(-h)
            grad = eta * phi.dvalue(h) - (1 - eta) * phi.dvalue(-h)
            return float(val.sum()), grad

        return f
    if l > MAX_MINIMIZE_LABELS:
        raise CapacityError(f"conditional objectives need l <= {MAX_MINIMIZE_LABELS}, got {l}")
    S = sign_matrix(l)
    weights = _surrogate_weights(p, spec)
    keep = weights != 0
    w, Sk = weights[keep], S[keep]

    if isinstance(spec, CompSum):
        psi = spec.psi
        d2 = _PSI_SECOND[type(psi)]

        def f(h):
            z = S @ h
            lse = _lse(z)
            t = lse - Sk @ h
            coef = w * psi.dvalue(t)
            q = np.exp(z - lse) @ S
            return float(w @ psi.value(t)), coef.sum() * q - coef @ Sk

        def hessian(h):
            # log u_k has gradient q - y'_k and Hessian Cov(y') under the
            # chain softmax
            z = S @ h
            lse = _lse(z)
            pi = np.exp(z - lse)
            q = pi @ S
            cov = (S * pi[:, None]).T @ S - np.outer(q, q)
            t = lse - Sk @ h
            diff = q - Sk
            return (w * psi.dvalue(t)).sum() * cov + (diff * (w * d2(psi, t))[:, None]).T @ diff

    else:
        phi = spec.phi
        d2 = _PHI_SECOND.get(type(phi))

        def f(h):
            z = Sk @ h
            return float(w @ phi.value(-z)), -(w * phi.dvalue(-z)) @ Sk

        def hessian(h):
            if d2 is None:
                return np.zeros((l, l))
            return (Sk * (w * d2(phi, -(Sk @ h)))[:, None]).T @ Sk

    f.hessian = hessian
    return f


_PSI_SECOND = {
    Log: lambda psi, t: np.zeros_like(t),
    SumExp: lambda psi, t: np.exp(t),
    GCE: lambda psi, t: -psi.q * np.exp(-psi.q * t),
    MAE: lambda psi, t: -np.exp(-t),
}
_PHI_SECOND = {
    Exp: lambda phi, u: np.exp(-u),
    SqHinge: lambda phi, u: np.where(u < 1.0, 2.0, 0.0),
}


@dataclass(frozen=True)
class MinimizerOptions:
    restarts: int = 8
    max_iters: int = 10000
    grad_tol: float = 1e-8
    seed: int = 0
    start_scale: float = 2.0


@dataclass(frozen=True, eq=False)
class MinimizerResult:
    scores: np.ndarray
    value: float
    converged: bool
    restarts_used: int
    method: str


def _log_minimizer(p, spec):
    # The objective separates into W log(2 cosh h_i) - D_i h_i per label,
    # minimized at tanh(h_i) = D_i / W with value W times a binary entropy.
    S = sign_matrix(p.l)
    w = _surrogate_weights(p, spec)
    W = math.fsum(w)
    D = w @ S
    if W <= 0:
        return np.zeros(p.l), 0.0
    r = np.clip(D / W, -1.0, 1.0)
    a, b = (1 + r) / 2, (1 - r) / 2
    value = W * float(-(xlogy(a, a) + xlogy(b, b)).sum())
    with np.errstate(divide="ignore"):
        h = np.clip(np.arctanh(r), -40.0, 40.0)
    return h, value


def _mae_minimizer(p, spec):
    # W - sum_y' w_y' s_y' is multilinear in the per-label probabilities, so
    # its infimum sits at a vertex: all mass on the heaviest labeling.
    S = sign_matrix(p.l)
    w = _surrogate_weights(p, spec)
    top = int(np.argmax(w))
    return 40.0 * S[top], math.fsum(w) - float(w[top])


def _hinge_minimizer(p, spec):
    # min sum c t  s.t.  t >= 0, t >= 1 + y' . h
    S = sign_matrix(p.l)
    c = _surrogate_weights(p, spec)
    keep = c > 0
    if not keep.any():
        return np.zeros(p.l), 0.0
    Sk, ck = S[keep], c[keep]
    k, l = Sk.shape
    res = linprog(
        np.concatenate([np.zeros(l), ck]),
        A_ub=np.hstack([Sk, -np.eye(k)]),
        b_ub=-np.ones(k),
        bounds=[(None, None)] * l + [(0, None)] * k,
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"hinge linear program failed: {res.message}")
    h = res.x[:l]
    return h, float(ck @ np.maximum(0.0, 1.0 + Sk @ h))


@lru_cache(maxsize=None)
def sign_cells(l: int):
    """Open cells of the arrangement ``{h : y' . h = 0}`` over all labelings.

    Returns ``(positive, witness)``: ``positive[k, m]`` says ``y'_m . h > 0`` on
    cell ``k`` and ``witness[k]`` is a point of the cell with every
    ``|y' . h| >= 1``.  Built by splitting cells one hyperplane at a time and
    keeping the feasible halves.
    """
    if l > 6:
        raise CapacityError(f"cell enumeration is limited to l <= 6, got {l}")
    S = sign_matrix(l)
    reps = [m for m in range(1 << l) if not (m >> (l - 1)) & 1]
    cells = [((), None)]
    for m in reps:
        nxt = []
        for signs, _ in cells:
            for sigma in (1.0, -1.0):
                rows = [sg * S[r] for sg, r in zip(signs + (sigma,), reps)]
                res = linprog(
                    np.zeros(l),
                    A_ub=-np.array(rows),
                    b_ub=-np.ones(len(rows)),
                    bounds=[(None, None)] * l,
                    method="highs",
                )
                if res.status == 0:
                    nxt.append((signs + (sigma,), res.x))
        cells = nxt
    witness = np.array([h for _, h in cells])
    positive = (witness @ S.T) > 0
    positive.setflags(write=False)
    witness.setflags(write=False)
    return positive, witness


def _rho_margin_minimizer(p, spec):
    # Scaling h up sends every term with y' . h < 0 to 0 and leaves the rest
    # at 1, so the infimum is the lightest positive set over the cells.  The
    # witness scaled by rho already reaches it.
    c = _surrogate_weights(p, spec)
    positive, witness = sign_cells(p.l)
    totals = positive.astype(float) @ c
    k = int(np.argmin(totals))
    return spec.phi.rho * witness[k], float(totals[k])


def _binary_relevance_minimizer(p, spec):
    eta = p.label_marginals()
    phi = spec.phi
    with np.errstate(divide="ignore"):
        if isinstance(phi, BinaryLogistic):
            vals = -(xlogy(eta, eta) + xlogy(1 - eta, 1 - eta))
            h = np.log(eta) - np.log1p(-eta)
        elif isinstance(phi, Exp):
            vals = 2.0 * np.sqrt(eta * (1 - eta))
            h = 0.5 * (np.log(eta) - np.log1p(-eta))
        elif isinstance(phi, SqHinge):
            vals = 4.0 * eta * (1 - eta)
            h = 2 * eta - 1
        elif isinstance(phi, Hinge):
            vals = 2.0 * np.minimum(eta, 1 - eta)
            h = np.where(eta >= 0.5, 1.0, -1.0)
        else:
            raise DomainError(f"no binary minimizer for {phi!r}")
    return np.clip(h, -40.0, 40.0), float(vals.sum())


def _exact_minimizer(spec):
    if isinstance(spec, BinaryRelevance):
        return _binary_relevance_minimizer
    if isinstance(spec, CompSum):
        if isinstance(spec.psi, Log):
            return _log_minimizer
        if isinstance(spec.psi, MAE):
            return _mae_minimizer
    if isinstance(spec, Constrained):
        if isinstance(spec.phi, Hinge):
            return _hinge_minimizer
        if isinstance(spec.phi, RhoMargin):
            return _rho_margin_minimizer
    return None


def _descend(f, h0, opts):
    """Backtracking descent along damped Newton directions.

    Hessian eigenvalues are replaced by their absolute values, floored at a
    small multiple of the largest, so on non-convex stretches the direction
    still descends and flat directions fall back to gradient steps.  Near the optimum, where values stop
    changing at double precision, a step is still taken if it shrinks the
    gradient.
    """
    h = np.array(h0, dtype=float)
    val, grad = f(h)
    gnorm = float(np.linalg.norm(grad))
    for _ in range(opts.max_iters):
        if gnorm <= opts.grad_tol:
            break
        lam, V = np.linalg.eigh(f.hessian(h))
        lam = np.maximum(np.abs(lam), 1e-8 * (1.0 + np.abs(lam).max()))
        d = -V @ ((V.T @ grad) / lam)
        slope = float(grad @ d)
        step = 1.0
        for _ in range(60):
            h_new = h + step * d
            v_new, g_new = f(h_new)
            gn_new = float(np.linalg.norm(g_new))
            if v_new <= val + 1e-4 * step * slope or (
                v_new <= val + 1e-15 * abs(val) and gn_new < gnorm
            ):
                break
            step *= 0.5
        else:
            break
        h, val, grad, gnorm = h_new, v_new, g_new, gn_new
    return h, val, gnorm


def minimize_conditional_surrogate(p, spec: SurrogateSpec, opts: MinimizerOptions | None = None) -> MinimizerResult:
    """Infimum over score vectors of the surrogate's conditional error.

    Uses an exact solver when the family has one.  Otherwise runs damped
    Newton descent from the origin and from ``restarts - 1`` Gaussian starts
    and keeps the best value.  ``converged`` means that run ended with gradient norm at most
    ``grad_tol``.  Convex families stop after the first converged run.
    """
    opts = opts or MinimizerOptions()
    p = _as_dist(p)
    if p.l > MAX_MINIMIZE_LABELS:
        raise CapacityError(f"conditional minimization needs l <= {MAX_MINIMIZE_LABELS}, got {p.l}")
    exact = _exact_minimizer(spec)
    if exact is not None:
        h, value = exact(p, spec)
        return MinimizerResult(np.asarray(h, dtype=float), value, True, 0, "exact")
    f = conditional_objective(p, spec)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([opts.seed, p.l, 2])))
    best = None
    used = 0
    for r in range(max(1, opts.restarts)):
        h0 = np.zeros(p.l) if r == 0 else opts.start_scale * rng.standard_normal(p.l)
        h, val, gnorm = _descend(f, h0, opts)
        used += 1
        ok = gnorm <= opts.grad_tol
        if best is None or val < best[1]:
            best = (h, val, ok)
        if spec.convex and ok:
            break
    h, val, ok = best
    return MinimizerResult(h, val, ok, used, "descent")


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class GammaTag:
    """Bound function: ``sqrt2x`` 2 sqrt(t), ``sqrt-l`` sqrt(l t), ``sqrt-nq``
    2 sqrt(n^q t), ``linear-n`` n t, ``sqrt-lmax`` 2 sqrt(Lmax t), ``linear`` t."""

    kind: str
    q: float | None = None

    KINDS = ("sqrt2x", "sqrt-l", "sqrt-nq", "linear-n", "sqrt-lmax", "linear")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown gamma {self.kind!r}")
        if (self.kind == "sqrt-nq") != (self.q is not None):
            raise DomainError("q goes with sqrt-nq only")

    def __str__(self):
        return f"{self.kind}:{self.q:g}" if self.q is not None else self.kind


def gamma_for(spec: SurrogateSpec) -> GammaTag:
    """The bound function established for each surrogate family."""
    if isinstance(spec, BinaryRelevance):
        if isinstance(spec.phi, BinaryLogistic):
            return GammaTag("sqrt-l")
    elif isinstance(spec, CompSum):
        psi = spec.psi
        if isinstance(psi, (Log, SumExp)):
            return GammaTag("sqrt2x")
        if isinstance(psi, GCE):
            return GammaTag("sqrt-nq", psi.q)
        if isinstance(psi, MAE):
            return GammaTag("linear-n")
    elif isinstance(spec, Constrained):
        phi = spec.phi
        if isinstance(phi, Exp):
            return GammaTag("sqrt-lmax")
        if isinstance(phi, SqHinge):
            return GammaTag("sqrt2x")
        if isinstance(phi, (Hinge, RhoMargin)):
            return GammaTag("linear")
    raise DomainError(f"no consistency bound is available for {spec.tag}")


@dataclass(frozen=True)
class BoundSpec:
    surrogate: SurrogateSpec
    gamma: GammaTag | None = None
    gamma_scale: float = 1.0

    def __post_init__(self):
        expected = gamma_for(self.surrogate)
        if self.gamma is None:
            object.__setattr__(self, "gamma", expected)
        elif self.gamma != expected:
            raise DomainError(f"{self.surrogate.tag} pairs with gamma {expected}, not {self.gamma}")
        if not self.gamma_scale > 0:
            raise DomainError("gamma_scale must be positive")

    @property
    def target(self) -> TargetLoss:
        return self.surrogate.target


def gamma_apply(bound: BoundSpec, t: float, l: int) -> float:
    if t < 0 or math.isnan(t):
        raise DomainError(f"gamma needs t >= 0, got {t}")
    g = bound.gamma
    n = 2.0**l
    if g.kind == "sqrt2x":
        v = 2.0 * math.sqrt(t)
    elif g.kind == "sqrt-l":
        v = math.sqrt(l * t)
    elif g.kind == "sqrt-nq":
        v = 2.0 * math.sqrt(n**g.q * t)
    elif g.kind == "linear-n":
        v = n * t
    elif g.kind == "sqrt-lmax":
        v = 2.0 * math.sqrt(l_max(bound.target, l) * t)
    else:
        v = t
    return bound.gamma_scale * v


@dataclass(frozen=True)
class RegretReport:
    target_regret: float
    surrogate_regret: float
    gamma_value: float
    margin: float
    minimizer_converged: bool
    restarts_used: int
    tol: float = 1e-6

    @property
    def holds(self) -> bool:
        return self.margin >= -self.tol

    @property
    def violation(self) -> bool:
        return not self.holds and self.minimizer_converged

    @property
    def flagged(self) -> bool:
        return not self.holds and not self.minimizer_converged


def verify_bound(p, scores, bound: BoundSpec, opts: MinimizerOptions | None = None, tol: float = 1e-6,
                 minimum: MinimizerResult | None = None) -> RegretReport:
    """One sampled instance of ``target_regret <= Gamma(surrogate_regret)``.

    The surrogate infimum is the minimizer's value, or the conditional error
    at ``scores`` if that is lower.
    """
    p = _as_dist(p)
    s = np.asarray(scores, dtype=float)
    if s.shape != (p.l,):
        raise DimensionError(f"{s.shape} scores for l={p.l}")
    if minimum is None:
        minimum = minimize_conditional_surrogate(p, bound.surrogate, opts)
    err, _ = conditional_objective(p, bound.surrogate)(s)
    surrogate_regret = err - min(minimum.value, err)
    target_regret = target_conditional_regret(p, bound.target, s)
    g = gamma_apply(bound, surrogate_regret, p.l)
    return RegretReport(target_regret, surrogate_regret, g, g - target_regret,
                        minimum.converged, minimum.restarts_used, tol)


def bayes_consistency_gap(p, spec: SurrogateSpec, opts: MinimizerOptions | None = None) -> float:
    """Excess target cost of the prediction at the surrogate's conditional minimizer."""
    p = _as_dist(p)
    res = minimize_conditional_surrogate(p, spec, opts)
    c, y_star = bayes_costs(p, spec.target)
    return float(c[decode_scores(res.scores, spec.target).bits] - c[y_star.bits])


# ---------------------------------------------------------------------------
# sweeps

CSV_HEADER = (
    "trial", "seed", "l", "target", "surrogate", "psi_or_phi", "param",
    "target_regret", "surrogate_regret", "gamma_value", "margin", "converged", "restarts",
)


@dataclass
class SweepConfig:
    bounds: Sequence[BoundSpec]
    l_list: Sequence[int] = (1, 2, 3)
    trials: int = 1000
    seed: int = 0
    tol: float = 1e-6
    score_scale: float = 2.0
    concentration: float = 1.0
    minimizer: MinimizerOptions = field(default_factory=MinimizerOptions)
    out: str | None = None


@dataclass(frozen=True)
class SweepRow:
    trial: int
    seed: int
    l: int
    bound: BoundSpec
    report: RegretReport

    def csv_fields(self):
        r = self.report
        name, param = family_param(self.bound.surrogate)
        family = self.bound.surrogate.tag.split(":", 1)[0]
        return [
            self.trial, self.seed, self.l, self.bound.target.name, family, name, param,
            _fmt(r.target_regret), _fmt(r.surrogate_regret), _fmt(r.gamma_value), _fmt(r.margin),
            int(r.minimizer_converged), r.restarts_used,
        ]


@dataclass
class SweepSummary:
    pairs: int = 0
    violations: int = 0
    flagged: int = 0
    nonconverged: int = 0
    nonconverged_convex: int = 0
    convex_pairs: int = 0
    rows: list = field(default_factory=list)

    @property
    def convex_nonconvergence_rate(self) -> float:
        return self.nonconverged_convex / self.convex_pairs if self.convex_pairs else 0.0


def _fmt(x: float) -> str:
    return "%.17g" % x


def sweep(cfg: SweepConfig) -> SweepSummary:
    """Check every bound on ``trials`` random ``(p, h)`` draws per label count.

    Draws depend only on ``(seed, l, trial)``, so all bounds see the same
    distributions and scores.  Rows are written in (bound, l, trial) order.
    """
    summary = SweepSummary()
    handle = open(cfg.out, "w", newline="") if cfg.out else None
    try:
        writer = csv.writer(handle, lineterminator="\n") if handle else None
        if writer:
            writer.writerow(CSV_HEADER)
        for bound in cfg.bounds:
            for l in cfg.l_list:
                for trial in range(cfg.trials):
                    p = random_distribution(l, cfg.seed, cfg.concentration, trial)
                    h = random_scores(l, cfg.seed, trial, cfg.score_scale)
                    rep = verify_bound(p, h, bound, cfg.minimizer, cfg.tol)
                    row = SweepRow(trial, cfg.seed, l, bound, rep)
                    summary.rows.append(row)
                    summary.pairs += 1
                    summary.violations += rep.violation
                    summary.flagged += rep.flagged
                    summary.nonconverged += not rep.minimizer_converged
                    if bound.surrogate.convex:
                        summary.convex_pairs += 1
                        summary.nonconverged_convex += not rep.minimizer_converged
                    if writer:
                        writer.writerow(row.csv_fields())
    finally:
        if handle:
            handle.close()
    return summary
