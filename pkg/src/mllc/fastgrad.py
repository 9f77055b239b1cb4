"""Linear-time gradient of the multi-label logistic loss.

For a linear model with block feature map (``s_i = w_i . x``) the loss at an
example with labeling ``y`` is

    sum_y' (1 - L(y', y)) (logZ - y' . s)  =  L1 * logZ - L2 . s

where ``L1 = sum_y' (1 - L(y', y))`` and ``L2_i = sum_y' (1 - L(y', y)) y'_i``
depend only on the target loss and ``y``.  Its gradient in ``s`` is
``L1 * q - L2`` with ``q_i`` the Gibbs mean of ``y'_i``, read off a chain
automaton by forward-backward (or directly as ``tanh(s_i)``: the chain
factorizes over coordinates).  The weight gradient of row ``i`` is that
coefficient times ``x``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import CapacityError, DimensionError, DomainError, NumericOverflowError, UnsupportedModeError
from .labels import MAX_ENUM_LABELS, MAX_LABELS, Hamming, LabelVector, SubsetZeroOne, TargetLoss, loss_column

_FSUM_MAX_LABELS = 16


@dataclass(frozen=True, eq=False)
class PrecomputedLossSums:
    l1: float
    l2: np.ndarray
    target: TargetLoss
    anchor: LabelVector | None
    signs: np.ndarray
    mode: str = "brute"

    @property
    def l(self):
        return self.signs.shape[0]


def _anchor(anchor):
    """``(LabelVector or None, int8 signs)``.

    Anchors wider than a bitmask labeling can hold are passed as sign vectors.
    """
    if isinstance(anchor, LabelVector):
        return anchor, anchor.signs()
    signs = np.asarray(anchor)
    if signs.ndim != 1 or signs.size == 0 or not np.isin(signs, (-1, 1)).all():
        raise DomainError("anchor signs must be a non-empty vector of +1/-1")
    signs = signs.astype(np.int8)
    if signs.size <= MAX_LABELS:
        return LabelVector.from_signs(signs.tolist()), signs
    return None, signs


def closed_form_supported(target: TargetLoss) -> bool:
    return (isinstance(target, Hamming) and target.normalized) or isinstance(target, SubsetZeroOne)


def _closed_form(target, ys):
    l = ys.size
    if isinstance(target, SubsetZeroOne):
        return 1.0, ys.astype(float)
    # Summing (1 - d/l) over all labelings at Hamming distance d from the
    # anchor gives 2**l / 2.  Flipping coordinate i pairs up every labeling
    # with one whose weight differs by 1/l, leaving 2**(l-1) / l times y_i.
    try:
        half = math.ldexp(1.0, l - 1)
    except OverflowError:
        raise NumericOverflowError(f"2**{l - 1} overflows double precision") from None
    return half, ys * (half / l)


def _brute(target, anchor):
    l = anchor.l
    if l > MAX_ENUM_LABELS:
        raise CapacityError(f"brute-force loss sums need l <= {MAX_ENUM_LABELS}, got {l}")
    w = 1.0 - loss_column(target, anchor, extend=True)
    if w.min() < -1e-12 or w.max() > 1.0 + 1e-12:
        raise DomainError(f"{target.name} takes values outside [0, 1] at l={l}")
    m = np.arange(1 << l, dtype=np.int64)
    if l <= _FSUM_MAX_LABELS:
        l1 = math.fsum(w)
        l2 = np.array([math.fsum(np.where((m >> i) & 1, w, -w)) for i in range(l)])
    else:
        l1 = float(w.sum())
        l2 = np.array([2.0 * w[((m >> i) & 1).astype(bool)].sum() - l1 for i in range(l)])
    return l1, l2


_cache: dict = {}
_cache_lock = threading.Lock()


def precompute_sums(target: TargetLoss, anchor, mode: str = "auto", cache: bool = True) -> PrecomputedLossSums:
    """Loss sums ``L1`` and ``L2`` for one anchor labeling.

    ``mode`` is ``closed_form``, ``brute`` (enumerates ``2**l`` labelings) or
    ``auto`` (closed form when available).  ``anchor`` is a
    :class:`LabelVector` or a vector of +1/-1.  Results are cached per
    (target, mode, anchor).
    """
    anchor, signs = _anchor(anchor)
    if mode == "auto":
        mode = "closed_form" if closed_form_supported(target) else "brute"
    if mode not in ("closed_form", "brute"):
        raise UnsupportedModeError(f"unknown precompute mode {mode!r}")
    if mode == "closed_form" and not closed_form_supported(target):
        raise UnsupportedModeError(f"no closed-form loss sums for {target.name}")
    key = (target, mode, signs.tobytes())
    if cache:
        hit = _cache.get(key)
        if hit is not None:
            return hit
    if mode == "closed_form":
        l1, l2 = _closed_form(target, signs)
    else:
        if anchor is None:
            raise CapacityError(f"brute-force loss sums need l <= {MAX_ENUM_LABELS}, got {signs.size}")
        target.check(anchor.l)
        l1, l2 = _brute(target, anchor)
    l2 = np.asarray(l2, dtype=float)
    l2.setflags(write=False)
    signs.setflags(write=False)
    out = PrecomputedLossSums(float(l1), l2, target, anchor, signs, mode)
    if cache:
        with _cache_lock:
            out = _cache.setdefault(key, out)
    return out


def clear_cache():
    with _cache_lock:
        _cache.clear()


# ---------------------------------------------------------------------------
# chain automaton


@dataclass(frozen=True, eq=False)
class ChainWFA:
    """States ``0..l``; position ``i`` has a ``+1`` arc of log-weight ``s_i``
    and a ``-1`` arc of log-weight ``-s_i`` from state ``i`` to ``i + 1``."""

    log_plus: np.ndarray
    log_minus: np.ndarray

    @property
    def l(self):
        return self.log_plus.shape[0]

    @property
    def n_states(self):
        return self.l + 1

    @property
    def initial(self):
        return 0

    @property
    def final(self):
        return self.l

    def transitions(self):
        """``(src, dst, label, log_weight)`` in topological order."""
        out = []
        for i in range(self.l):
            out.append((i, i + 1, +1, float(self.log_plus[i])))
            out.append((i, i + 1, -1, float(self.log_minus[i])))
        return out

    def path_log_weight(self, y: LabelVector) -> float:
        if y.l != self.l:
            raise DimensionError(f"labeling of length {y.l} on a chain of length {self.l}")
        pos = y.signs() > 0
        return float(np.where(pos, self.log_plus, self.log_minus).sum())


def build_chain_wfa(scores) -> ChainWFA:
    s = np.array(scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DimensionError("chain scores must be a non-empty vector")
    if not np.isfinite(s).all():
        raise DomainError("chain scores must be finite")
    minus = -s
    s.setflags(write=False)
    minus.setflags(write=False)
    return ChainWFA(s, minus)


@dataclass(frozen=True, eq=False)
class GibbsMarginals:
    q: np.ndarray
    logZ: float


def forward_backward(wfa: ChainWFA, backend=None) -> GibbsMarginals:
    """Gibbs means ``q_i = E[y_i]`` and ``log Z`` by log-space forward-backward."""
    kern = kernels.get_backend(backend or "auto")
    q, logz = kern.chain_forward_backward(
        np.ascontiguousarray(wfa.log_plus), np.ascontiguousarray(wfa.log_minus)
    )
    return GibbsMarginals(np.asarray(q), float(logz))


def log_partition(scores) -> float:
    """``log Z = sum_i log(2 cosh s_i)``, stable for large ``|s_i|``."""
    s = np.abs(np.asarray(scores, dtype=float))
    return float((s + np.log1p(np.exp(-2.0 * s))).sum())


# ---------------------------------------------------------------------------
# gradients


def as_sparse(features):
    """``(indices int64, values float)`` from a dict, pair of arrays or dense vector."""
    if isinstance(features, dict):
        idx = np.fromiter(features.keys(), dtype=np.int64, count=len(features))
        vals = np.fromiter(features.values(), dtype=float, count=len(features))
    elif isinstance(features, tuple) and len(features) == 2:
        idx = np.ascontiguousarray(features[0], dtype=np.int64)
        vals = np.ascontiguousarray(features[1], dtype=float)
    else:
        dense = np.asarray(features, dtype=float)
        idx = np.flatnonzero(dense).astype(np.int64)
        vals = np.ascontiguousarray(dense[idx])
    if idx.shape != vals.shape or idx.ndim != 1:
        raise DimensionError("feature indices and values must be matching vectors")
    if idx.size and idx.min() < 0:
        raise DimensionError("negative feature index")
    return idx, vals


def _weight_matrix(weights, l):
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        if w.size % l:
            raise DimensionError(f"{w.size} weights do not split into {l} rows")
        w = w.reshape(l, -1)
    if w.ndim != 2 or w.shape[0] != l:
        raise DimensionError(f"weights of shape {w.shape} for l={l}")
    return np.ascontiguousarray(w)


def _check_pre(pre, anchor):
    _, signs = _anchor(anchor)
    if not np.array_equal(pre.signs, signs):
        raise DimensionError("precomputed sums were built for a different anchor labeling")


def score_coefficients(scores, pre: PrecomputedLossSums, use_wfa: bool = False) -> np.ndarray:
    """Gradient of the loss in the scores: ``L1 * q - L2``."""
    s = np.ascontiguousarray(scores, dtype=float)
    if s.shape != (pre.l,):
        raise DimensionError(f"{s.shape} scores for l={pre.l}")
    return np.asarray(kernels.mllog_coefs(s, pre.l1, pre.l2, use_wfa))


def fast_gradient(weights, features, anchor, pre: PrecomputedLossSums, use_wfa: bool = False) -> np.ndarray:
    """Flat weight gradient of the logistic loss at one example, in ``O(l * nnz)``."""
    _check_pre(pre, anchor)
    W = _weight_matrix(weights, pre.l)
    idx, vals = as_sparse(features)
    if idx.size and idx.max() >= W.shape[1]:
        raise DimensionError(f"feature index {int(idx.max())} outside dimension {W.shape[1]}")
    g, block = kernels.mllog_sparse_grad(W, idx, vals, pre.l1, pre.l2, use_wfa)
    out = np.zeros_like(W)
    np.add.at(out, (slice(None), idx), np.asarray(block))
    return out.ravel()


def fast_gradient_sparse(W: np.ndarray, idx, vals, pre: PrecomputedLossSums, use_wfa: bool = False):
    """Score coefficients ``g`` and the ``l x nnz`` block ``outer(g, vals)``.

    The dense gradient is zero outside the columns in ``idx``.
    """
    return kernels.mllog_sparse_grad(W, idx, vals, pre.l1, pre.l2, use_wfa)


def fast_loss(scores, pre: PrecomputedLossSums) -> float:
    """Logistic loss from the sums: ``L1 * logZ - L2 . s``."""
    s = np.asarray(scores, dtype=float)
    return pre.l1 * log_partition(s) - float(pre.l2 @ s)
