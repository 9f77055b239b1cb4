"""Surrogate losses over per-label scores ``h = (h_1, ..., h_l)``.

Four families:

* multi-label logistic: ``sum_y' (1 - L(y', y)) log sum_y'' exp((y'' - y') . h)``
* comp-sum: the same with ``log`` replaced by a transfer function ``psi``
* constrained: ``sum_y' L(y', y) phi(-y' . h)``
* binary relevance: ``sum_i phi(y_i h_i)``

The first three sum over all ``2**l`` labelings and are reference
implementations, exponential in ``l``.  The ``O(l)`` logistic gradient lives
in :mod:`mllc.fastgrad`.

Inner sums are carried as ``log u = logsumexp(z) - z_y'`` with
``z_y = y . h``, so ``u >= 1`` never has to be formed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit, logsumexp

from . import kernels
from .errors import CapacityError, DimensionError, DomainError, NumericOverflowError, ParseError
from .labels import Hamming, LabelVector, TargetLoss, loss_column, loss_matrix, parse_target, sign_matrix

NAIVE_GRAD_MAX_LABELS = 16


# ---------------------------------------------------------------------------
# transfer functions of the comp-sum family, as functions of t = log u >= 0


@dataclass(frozen=True)
class Log:
    convex = True
    tag = "log"

    def value(self, t):
        return t

    def dvalue(self, t):
        return np.ones_like(t)


@dataclass(frozen=True)
class SumExp:
    convex = True
    tag = "sum-exp"

    def value(self, t):
        return np.expm1(t)

    def dvalue(self, t):
        return np.exp(t)


@dataclass(frozen=True)
class GCE:
    q: float = 0.5
    convex = False

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise DomainError(f"GCE needs 0 < q < 1, got {self.q}")

    @property
    def tag(self):
        return f"gce:{self.q:g}"

    def value(self, t):
        return -np.expm1(-self.q * t) / self.q

    def dvalue(self, t):
        return np.exp(-self.q * t)


@dataclass(frozen=True)
class MAE:
    convex = False
    tag = "mae"

    def value(self, t):
        return -np.expm1(-t)

    def dvalue(self, t):
        return np.exp(-t)


PsiFamily = Union[Log, SumExp, GCE, MAE]


# ---------------------------------------------------------------------------
# margin losses phi(u); derivatives are right-derivatives at kinks


@dataclass(frozen=True)
class Exp:
    convex = True
    tag = "exp"

    def value(self, u):
        return np.exp(-u)

    def dvalue(self, u):
        return -np.exp(-u)


@dataclass(frozen=True)
class SqHinge:
    convex = True
    tag = "sq-hinge"

    def value(self, u):
        return np.maximum(0.0, 1.0 - u) ** 2

    def dvalue(self, u):
        return -2.0 * np.maximum(0.0, 1.0 - u)


@dataclass(frozen=True)
class Hinge:
    convex = True
    tag = "hinge"

    def value(self, u):
        return np.maximum(0.0, 1.0 - u)

    def dvalue(self, u):
        return np.where(np.asarray(u) < 1.0, -1.0, 0.0)


@dataclass(frozen=True)
class RhoMargin:
    rho: float = 1.0
    convex = False

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError(f"rho-margin needs rho > 0, got {self.rho}")

    @property
    def tag(self):
        return f"rho-margin:{self.rho:g}"

    def value(self, u):
        return np.minimum(np.maximum(0.0, 1.0 - np.asarray(u) / self.rho), 1.0)

    def dvalue(self, u):
        u = np.asarray(u)
        return np.where((u >= 0.0) & (u < self.rho), -1.0 / self.rho, 0.0)


@dataclass(frozen=True)
class BinaryLogistic:
    convex = True
    tag = "logistic"

    def value(self, u):
        return np.logaddexp(0.0, -np.asarray(u, dtype=float))

    def dvalue(self, u):
        return -expit(-np.asarray(u, dtype=float))


PhiFamily = Union[Exp, SqHinge, Hinge, RhoMargin, BinaryLogistic]


# ---------------------------------------------------------------------------
# surrogate specs


@dataclass(frozen=True)
class CompSum:
    target: TargetLoss
    psi: PsiFamily = Log()

    def __post_init__(self):
        _require_unit_range(self.target)
        if not isinstance(self.psi, (Log, SumExp, GCE, MAE)):
            raise DomainError(f"{self.psi!r} is not a comp-sum transfer function")

    @property
    def tag(self):
        return f"comp-sum:{self.psi.tag}"

    @property
    def convex(self):
        return self.psi.convex


@dataclass(frozen=True)
class MLLogistic(CompSum):
    """Multi-label logistic loss: the comp-sum loss with ``psi = log``."""

    psi: PsiFamily = Log()

    def __post_init__(self):
        if not isinstance(self.psi, Log):
            raise DomainError("the multi-label logistic loss uses psi = log")
        super().__post_init__()

    @property
    def tag(self):
        return "ml-logistic"


@dataclass(frozen=True)
class Constrained:
    target: TargetLoss
    phi: PhiFamily = Exp()

    def __post_init__(self):
        _require_unit_range(self.target)
        if not isinstance(self.phi, (Exp, SqHinge, Hinge, RhoMargin)):
            raise DomainError(f"{self.phi!r} is not a constrained-loss margin function")

    @property
    def tag(self):
        return f"constrained:{self.phi.tag}"

    @property
    def convex(self):
        return self.phi.convex


@dataclass(frozen=True)
class BinaryRelevance:
    phi: PhiFamily = BinaryLogistic()

    @property
    def target(self):
        return Hamming(normalized=False)

    @property
    def tag(self):
        return f"binary-relevance:{self.phi.tag}"

    @property
    def convex(self):
        return self.phi.convex


SurrogateSpec = Union[CompSum, MLLogistic, Constrained, BinaryRelevance]


def _require_unit_range(target):
    if isinstance(target, Hamming) and not target.normalized:
        raise DomainError("surrogate weights need a loss in [0, 1]; use normalized Hamming")


def _unit_losses(target, y):
    losses = loss_column(target, y)
    if losses.min() < 0.0 or losses.max() > 1.0 + 1e-12:
        raise DomainError(f"{target.name} takes values outside [0, 1] at l={y.l}")
    return losses


# ---------------------------------------------------------------------------
# evaluation


def _scores(scores) -> np.ndarray:
    h = np.ascontiguousarray(scores, dtype=float)
    if h.ndim != 1 or h.size == 0:
        raise DimensionError("scores must be a non-empty vector")
    if not np.isfinite(h).all():
        raise DomainError("scores must be finite")
    return h


def _check_enum(l, bound=24):
    if l > bound:
        raise CapacityError(f"this evaluation enumerates 2**l labelings; needs l <= {bound}, got {l}")


def labeling_scores(scores) -> np.ndarray:
    """``z[m] = sum_i y_i h_i`` for every labeling bitmask ``m``."""
    h = _scores(scores)
    _check_enum(h.size)
    return kernels.labeling_scores(h)


def chain_softmax(scores) -> np.ndarray:
    """Softmax of ``y . h`` over all labelings, indexed by bitmask."""
    z = labeling_scores(scores)
    return np.exp(z - logsumexp(z))


def _finite(value, what):
    if not math.isfinite(value):
        raise NumericOverflowError(f"{what} is not finite")
    return float(value)


def surrogate_eval(spec: SurrogateSpec, scores, y: LabelVector) -> float:
    """Surrogate loss of scores ``h`` at true labeling ``y`` (exact enumeration)."""
    h = _scores(scores)
    if h.size != y.l:
        raise DimensionError(f"{h.size} scores for {y.l} labels")
    if isinstance(spec, BinaryRelevance):
        with np.errstate(over="ignore"):
            return _finite(spec.phi.value(y.signs() * h).sum(), "binary relevance loss")
    _check_enum(y.l)
    z = kernels.labeling_scores(h)
    losses = _unit_losses(spec.target, y)
    with np.errstate(over="ignore"):
        if isinstance(spec, CompSum):
            w = 1.0 - losses
            keep = w != 0
            t = logsumexp(z) - z[keep]
            val = (w[keep] * spec.psi.value(t)).sum()
        else:
            keep = losses != 0
            val = (losses[keep] * spec.phi.value(-z[keep])).sum()
    return _finite(val, f"{spec.tag} loss")


def conditional_error(spec: SurrogateSpec, p, scores) -> float:
    """Expected surrogate loss when the true labeling is drawn from ``p``."""
    h = _scores(scores)
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    if probs.size != 1 << h.size:
        raise DimensionError(f"distribution over {probs.size} labelings, scores for l={h.size}")
    total = 0.0
    for m in np.flatnonzero(probs):
        total += probs[m] * surrogate_eval(spec, h, LabelVector(h.size, int(m)))
    return float(total)


def conditional_error_log_identity(target: TargetLoss, p, scores) -> float:
    """Logistic conditional error as ``-sum_y' (1 - c_y') log s_y'``.

    ``c_y'`` is the expected loss of prediction ``y'`` under ``p`` and ``s`` the
    chain softmax, evaluated as a product of per-label sigmoids.
    """
    h = _scores(scores)
    l = h.size
    probs = np.asarray(getattr(p, "probs", p), dtype=float)
    c = loss_matrix(target, l, extend=True) @ probs
    signs = np.where((np.arange(1 << l)[:, None] >> np.arange(l)) & 1, 1.0, -1.0)
    log_s = -np.logaddexp(0.0, -2.0 * signs * h).sum(axis=1)
    return float(-((1.0 - c) * log_s).sum())


def constraint_residual(scores) -> float:
    """``sum_y sum_i y_i h_i`` over all labelings; zero by sign symmetry."""
    z = labeling_scores(scores)
    return math.fsum(z)


def naive_gradient(spec: SurrogateSpec, scores, y: LabelVector) -> np.ndarray:
    """Gradient of :func:`surrogate_eval` in the scores, by enumeration."""
    h = _scores(scores)
    if h.size != y.l:
        raise DimensionError(f"{h.size} scores for {y.l} labels")
    if isinstance(spec, BinaryRelevance):
        ys = y.signs()
        return ys * spec.phi.dvalue(ys * h)
    if y.l > NAIVE_GRAD_MAX_LABELS:
        raise CapacityError(f"naive gradients need l <= {NAIVE_GRAD_MAX_LABELS}, got {y.l}")
    z = kernels.labeling_scores(h)
    losses = _unit_losses(spec.target, y)

    signs = sign_matrix(y.l)
    if isinstance(spec, CompSum):
        w = 1.0 - losses
        keep = w != 0
        lse = logsumexp(z)
        q = np.exp(z - lse) @ signs
        coef = w[keep] * spec.psi.dvalue(lse - z[keep])
        # d log u_y' / dh = q - y'
        return coef.sum() * q - coef @ signs[keep]
    keep = losses != 0
    coef = losses[keep] * spec.phi.dvalue(-z[keep])
    return -(coef @ signs[keep])


# ---------------------------------------------------------------------------
# tags


def parse_psi(tag: str) -> PsiFamily:
    if tag == "log":
        return Log()
    if tag == "sum-exp":
        return SumExp()
    if tag == "mae":
        return MAE()
    if tag.startswith("gce:"):
        return GCE(float(tag[4:]))
    raise ParseError(f"unknown psi {tag!r}")


def parse_phi(tag: str) -> PhiFamily:
    if tag == "exp":
        return Exp()
    if tag == "sq-hinge":
        return SqHinge()
    if tag == "hinge":
        return Hinge()
    if tag == "logistic":
        return BinaryLogistic()
    if tag.startswith("rho-margin:"):
        return RhoMargin(float(tag[11:]))
    raise ParseError(f"unknown phi {tag!r}")


def parse_surrogate(tag: str, target: TargetLoss | str | None = None) -> SurrogateSpec:
    """Build a surrogate from a tag like ``comp-sum:gce:0.5`` or ``constrained:hinge``."""
    if isinstance(target, str):
        target = parse_target(target)
    family, _, rest = tag.partition(":")
    try:
        if family == "binary-relevance":
            return BinaryRelevance(parse_phi(rest or "logistic"))
        if target is None:
            raise ParseError(f"surrogate {tag!r} needs a target loss")
        if family == "ml-logistic":
            if rest:
                raise ParseError("ml-logistic takes no parameters")
            return MLLogistic(target)
        if family == "comp-sum":
            return CompSum(target, parse_psi(rest or "log"))
        if family == "constrained":
            return Constrained(target, parse_phi(rest or "exp"))
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad surrogate tag {tag!r}: {exc}") from None
    raise ParseError(f"unknown surrogate tag {tag!r}")


def family_param(spec: SurrogateSpec) -> tuple[str, str]:
    """``(psi_or_phi, param)`` columns for reports."""
    fn = spec.phi if isinstance(spec, (Constrained, BinaryRelevance)) else spec.psi
    name, _, param = fn.tag.partition(":")
    return name, param
