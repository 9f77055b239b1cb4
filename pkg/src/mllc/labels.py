"""Label vectors, confusion counts and the target multi-label losses.

A labeling of ``l`` tags is stored as an integer bitmask: bit ``i`` set means
tag ``i`` is relevant (``y_i = +1``), clear means ``y_i = -1``.  The bitmask is
also the 0/1 projection of the labeling, so confusion quantities reduce to
popcounts.

Every loss is normalized to ``[0, 1]``.  Losses that only make sense on a
subset of predictions (precision@k, recall@k) raise
:class:`AdmissibilityError` outside it; :func:`loss_matrix` can extend them to
the full label space with the maximal value 1 for enumeration code.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AdmissibilityError,
    CapacityError,
    DimensionError,
    DomainError,
    ParseError,
)

MAX_LABELS = 63
MAX_ENUM_LABELS = 24


def popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass(frozen=True)
class LabelVector:
    """A point of ``{+1, -1}^l`` stored as ``(l, bits)``."""

    l: int
    bits: int

    def __post_init__(self):
        if not 1 <= self.l <= MAX_LABELS:
            raise CapacityError(f"label count must be in [1, {MAX_LABELS}], got {self.l}")
        if self.bits < 0 or self.bits >> self.l:
            raise DimensionError(f"bitmask {self.bits:#x} has bits above position {self.l - 1}")

    @classmethod
    def from_signs(cls, signs: Iterable[int]) -> "LabelVector":
        signs = list(signs)
        bits = 0
        for i, s in enumerate(signs):
            if s not in (1, -1):
                raise DomainError(f"label entries must be +1 or -1, got {s!r}")
            if s == 1:
                bits |= 1 << i
        return cls(len(signs), bits)

    @classmethod
    def from_indices(cls, l: int, relevant: Iterable[int]) -> "LabelVector":
        bits = 0
        for i in relevant:
            if not 0 <= i < l:
                raise DimensionError(f"label index {i} out of range [0, {l})")
            bits |= 1 << i
        return cls(l, bits)

    def signs(self) -> np.ndarray:
        return np.where((self.bits >> np.arange(self.l)) & 1, 1, -1).astype(np.int8)

    def indices(self) -> list[int]:
        return [i for i in range(self.l) if (self.bits >> i) & 1]

    @property
    def n_positive(self) -> int:
        return popcount(self.bits)

    def complement(self) -> "LabelVector":
        return LabelVector(self.l, ~self.bits & ((1 << self.l) - 1))

    def __str__(self):
        return "(" + ",".join("+" if (self.bits >> i) & 1 else "-" for i in range(self.l)) + ")"


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _check_pair(y_pred: LabelVector, y_true: LabelVector) -> None:
    if y_pred.l != y_true.l:
        raise DimensionError(f"label length mismatch: {y_pred.l} != {y_true.l}")


def confusion(y_pred: LabelVector, y_true: LabelVector) -> ConfusionCounts:
    """Standard confusion counts of a prediction against the truth."""
    _check_pair(y_pred, y_true)
    tp = popcount(y_pred.bits & y_true.bits)
    fp = y_pred.n_positive - tp
    fn = y_true.n_positive - tp
    return ConfusionCounts(tp, fp, fn, y_pred.l - tp - fp - fn)


# ---------------------------------------------------------------------------
# label trees


@dataclass(frozen=True, eq=False)
class LabelTree:
    """A weighted spanning tree over all ``2**l`` labelings.

    Nodes are labeling bitmasks.  Construction checks the tree is connected and
    acyclic and precomputes root depths, parents and the diameter, so path
    lengths are ``O(depth)`` lookups.
    """

    l: int
    edges: tuple[tuple[int, int, float], ...]
    root: int = 0
    _parent: np.ndarray = field(init=False, repr=False)
    _depth: np.ndarray = field(init=False, repr=False)
    _level: np.ndarray = field(init=False, repr=False)
    diameter: float = field(init=False)

    def __post_init__(self):
        if not 1 <= self.l <= MAX_ENUM_LABELS:
            raise CapacityError(f"label trees need 1 <= l <= {MAX_ENUM_LABELS}, got {self.l}")
        n = 1 << self.l
        if not 0 <= self.root < n:
            raise DomainError(f"root {self.root} is not a labeling of {self.l} tags")
        if len(self.edges) != n - 1:
            raise DomainError(f"a tree over {n} labelings needs {n - 1} edges, got {len(self.edges)}")
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for a, b, w in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise DomainError(f"edge ({a}, {b}) leaves the label space")
            if not (math.isfinite(w) and w > 0):
                raise DomainError(f"edge ({a}, {b}) has non-positive or non-finite weight {w}")
            adj[a].append((b, w))
            adj[b].append((a, w))
        parent = np.full(n, -1, dtype=np.int64)
        depth = np.zeros(n)
        level = np.full(n, -1, dtype=np.int64)
        level[self.root] = 0
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v, w in adj[u]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    parent[v] = u
                    depth[v] = depth[u] + w
                    queue.append(v)
        if (level < 0).any():
            # n - 1 edges and not connected implies a cycle somewhere
            raise DomainError("edges do not form a tree over the label space")
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_depth", depth)
        object.__setattr__(self, "_level", level)
        far = int(np.argmax(depth))
        object.__setattr__(self, "diameter", float(self._distances_from(far, adj).max()))

    @staticmethod
    def _bfs(src, adj):
        dist = {src: 0.0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v, w in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + w
                    queue.append(v)
        return dist

    def _distances_from(self, src, adj=None):
        if adj is None:
            adj = [[] for _ in range(1 << self.l)]
            for a, b, w in self.edges:
                adj[a].append((b, w))
                adj[b].append((a, w))
        dist = self._bfs(src, adj)
        out = np.empty(1 << self.l)
        for k, v in dist.items():
            out[k] = v
        return out

    def distance(self, a: int, b: int) -> float:
        n = 1 << self.l
        for node in (a, b):
            if not 0 <= node < n:
                raise LookupError(f"labeling {node} is not a node of the tree")
        total = 0.0
        la, lb = self._level[a], self._level[b]
        while la > lb:
            total += self._depth[a] - self._depth[self._parent[a]]
            a = self._parent[a]
            la -= 1
        while lb > la:
            total += self._depth[b] - self._depth[self._parent[b]]
            b = self._parent[b]
            lb -= 1
        while a != b:
            total += self._depth[a] - self._depth[self._parent[a]]
            total += self._depth[b] - self._depth[self._parent[b]]
            a, b = self._parent[a], self._parent[b]
        return float(total)

    def distance_matrix(self) -> np.ndarray:
        n = 1 << self.l
        if self.l > 12:
            raise CapacityError("all-pairs tree distances are limited to l <= 12")
        adj = [[] for _ in range(n)]
        for a, b, w in self.edges:
            adj[a].append((b, w))
            adj[b].append((a, w))
        return np.stack([self._distances_from(s, adj) for s in range(n)])

    # text format -----------------------------------------------------------

    def dumps(self) -> str:
        lines = [f"ltree l={self.l} root={self.root}"]
        lines += [f"{a} {b} {w!r}" for a, b, w in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "LabelTree":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ParseError("empty label tree file")
        head = lines[0].split()
        try:
            if head[0] != "ltree" or len(head) != 3:
                raise ValueError
            l = int(head[1].removeprefix("l="))
            root = int(head[2].removeprefix("root="))
            if not (head[1].startswith("l=") and head[2].startswith("root=")):
                raise ValueError
        except (ValueError, IndexError):
            raise ParseError(f"line 1: bad label tree header {lines[0]!r}") from None
        edges = []
        for k, ln in enumerate(lines[1:], start=2):
            parts = ln.split()
            try:
                a, b, w = int(parts[0]), int(parts[1]), float(parts[2])
                if len(parts) != 3:
                    raise ValueError
            except (ValueError, IndexError):
                raise ParseError(f"line {k}: bad edge {ln!r}") from None
            edges.append((a, b, w))
        return cls(l, tuple(edges), root)


def tree_shortest_path(tree: LabelTree, a: LabelVector, b: LabelVector) -> float:
    if a.l != tree.l or b.l != tree.l:
        raise LookupError("labeling length does not match the tree")
    return tree.distance(a.bits, b.bits)


# ---------------------------------------------------------------------------
# target losses


class TargetLoss:
    """Base for target loss specs; subclasses are frozen dataclasses."""

    kappa: int | None = None

    @property
    def name(self) -> str:
        raise NotImplementedError

    def check(self, l: int) -> None:
        """Raise if the loss is not well defined for ``l`` tags."""

    def admissible(self, bits: int, l: int) -> bool:
        return True

    def _value(self, pred: int, true: int, l: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Hamming(TargetLoss):
    normalized: bool = True

    @property
    def name(self):
        return "hamming" if self.normalized else "hamming-raw"

    def _value(self, pred, true, l):
        k = popcount(pred ^ true)
        return k / l if self.normalized else float(k)


@dataclass(frozen=True)
class FBeta(TargetLoss):
    beta: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be positive, got {self.beta}")

    @property
    def name(self):
        return "f1" if self.beta == 1 else f"fbeta:{self.beta:g}"

    def _value(self, pred, true, l):
        b2 = self.beta**2
        den = b2 * popcount(true) + popcount(pred)
        if den == 0:
            return 0.0
        return 1.0 - (1 + b2) * popcount(pred & true) / den


@dataclass(frozen=True)
class SubsetZeroOne(TargetLoss):
    @property
    def name(self):
        return "subset01"

    def _value(self, pred, true, l):
        return 0.0 if pred == true else 1.0


@dataclass(frozen=True)
class Jaccard(TargetLoss):
    @property
    def name(self):
        return "jaccard"

    def _value(self, pred, true, l):
        tp = popcount(pred & true)
        den = popcount(true) + popcount(pred) - tp
        return 0.0 if den == 0 else 1.0 - tp / den


@dataclass(frozen=True)
class PrecisionAtK(TargetLoss):
    kappa: int = 1

    @property
    def name(self):
        return f"precision@{self.kappa}"

    def check(self, l):
        if not 1 <= self.kappa <= l:
            raise DomainError(f"kappa={self.kappa} outside [1, {l}]")

    def admissible(self, bits, l):
        return popcount(bits) == self.kappa

    def _value(self, pred, true, l):
        return 1.0 - popcount(pred & true) / self.kappa


@dataclass(frozen=True)
class RecallAtK(TargetLoss):
    kappa: int = 1

    @property
    def name(self):
        return f"recall@{self.kappa}"

    def check(self, l):
        if not 1 <= self.kappa <= l:
            raise DomainError(f"kappa={self.kappa} outside [1, {l}]")

    def admissible(self, bits, l):
        return popcount(bits) == self.kappa

    def _value(self, pred, true, l):
        k = popcount(true)
        return 0.0 if k == 0 else 1.0 - popcount(pred & true) / k


@dataclass(frozen=True)
class LinearFractional(TargetLoss):
    """Ratio of two affine functions of (TP, FP, FN, TN).

    Counts follow the standard convention (see :func:`confusion`).  When both
    numerator and denominator vanish the loss takes ``zero_over_zero``; if
    that is ``None`` such coefficient sets are rejected.
    """

    a0: float = 0.0
    a11: float = 0.0
    a10: float = 0.0
    a01: float = 0.0
    a00: float = 0.0
    b0: float = 1.0
    b11: float = 0.0
    b10: float = 0.0
    b01: float = 0.0
    b00: float = 0.0
    zero_over_zero: float | None = None

    @property
    def name(self):
        coefs = (self.a0, self.a11, self.a10, self.a01, self.a00,
                 self.b0, self.b11, self.b10, self.b01, self.b00)
        return "lf:" + ",".join(f"{c:g}" for c in coefs)

    def _num_den(self, tp, fp, fn, tn):
        num = self.a0 + self.a11 * tp + self.a10 * fp + self.a01 * fn + self.a00 * tn
        den = self.b0 + self.b11 * tp + self.b10 * fp + self.b01 * fn + self.b00 * tn
        return num, den

    def check(self, l):
        _check_linear_fractional(self, l)

    def _value(self, pred, true, l):
        tp = popcount(pred & true)
        fp = popcount(pred) - tp
        fn = popcount(true) - tp
        num, den = self._num_den(tp, fp, fn, l - tp - fp - fn)
        if den == 0:
            if num == 0 and self.zero_over_zero is not None:
                return float(self.zero_over_zero)
            raise DomainError("linear-fractional denominator vanishes")
        return num / den


_RANGE_SLACK = 1e-12


@lru_cache(maxsize=256)
def _check_linear_fractional(spec: LinearFractional, l: int) -> None:
    # every quadruple summing to l is realized by some (y', y) pair
    for tp in range(l + 1):
        for fp in range(l + 1 - tp):
            for fn in range(l + 1 - tp - fp):
                tn = l - tp - fp - fn
                num, den = spec._num_den(tp, fp, fn, tn)
                if den == 0:
                    if num == 0 and spec.zero_over_zero is not None:
                        v = spec.zero_over_zero
                    else:
                        raise DomainError(
                            f"denominator vanishes at TP={tp} FP={fp} FN={fn} TN={tn}")
                else:
                    v = num / den
                if not -_RANGE_SLACK <= v <= 1 + _RANGE_SLACK:
                    raise DomainError(
                        f"loss {v} outside [0, 1] at TP={tp} FP={fp} FN={fn} TN={tn}")


@dataclass(frozen=True)
class TreeDistance(TargetLoss):
    tree: LabelTree
    normalizer: float | None = None

    @property
    def name(self):
        return "tree"

    @property
    def scale(self) -> float:
        return self.tree.diameter if self.normalizer is None else self.normalizer

    def check(self, l):
        if l != self.tree.l:
            raise DimensionError(f"tree is over {self.tree.l} tags, not {l}")
        if not self.scale > 0:
            raise DomainError("tree distance normalizer must be positive")
        if self.scale < self.tree.diameter * (1 - 1e-12):
            raise DomainError("normalizer smaller than the tree diameter leaves [0, 1]")

    def _value(self, pred, true, l):
        return self.tree.distance(pred, true) / self.scale


def loss_eval(spec: TargetLoss, y_pred: LabelVector, y_true: LabelVector) -> float:
    """Value of the target loss for prediction ``y_pred`` against ``y_true``."""
    _check_pair(y_pred, y_true)
    spec.check(y_pred.l)
    if not spec.admissible(y_pred.bits, y_pred.l):
        raise AdmissibilityError(f"{spec.name}: prediction {y_pred} is not admissible")
    return spec._value(y_pred.bits, y_true.bits, y_pred.l)


def l_max(spec: TargetLoss, l: int) -> float:
    """Largest loss value over admissible (prediction, truth) pairs."""
    m = loss_matrix(spec, l)
    rows = admissible_mask(spec, l)
    return float(m[rows].max())


# ---------------------------------------------------------------------------
# enumeration helpers


def _check_enum(l: int, bound: int = MAX_ENUM_LABELS) -> None:
    if not 1 <= l <= bound:
        raise CapacityError(f"enumeration over 2**l labelings needs 1 <= l <= {bound}, got {l}")


def iter_labelings(l: int) -> Iterator[LabelVector]:
    _check_enum(l)
    for m in range(1 << l):
        yield LabelVector(l, m)


@lru_cache(maxsize=32)
def _sign_matrix(l: int) -> np.ndarray:
    m = np.arange(1 << l)[:, None]
    s = np.where((m >> np.arange(l)) & 1, 1.0, -1.0)
    s.setflags(write=False)
    return s


def sign_matrix(l: int) -> np.ndarray:
    """``(2**l, l)`` array whose row ``m`` is the +/-1 labeling with bitmask ``m``."""
    _check_enum(l, 20)
    return _sign_matrix(l)


def admissible_predictions(spec: TargetLoss, l: int) -> list[LabelVector]:
    _check_enum(l)
    spec.check(l)
    if spec.kappa is not None:
        out = []
        for idx in combinations(range(l), spec.kappa):
            out.append(LabelVector.from_indices(l, idx))
        return sorted(out, key=lambda v: v.bits)
    return list(iter_labelings(l))


def admissible_mask(spec: TargetLoss, l: int) -> np.ndarray:
    """Boolean mask over bitmasks ``0 .. 2**l - 1`` of admissible predictions."""
    _check_enum(l, 16)
    spec.check(l)
    if spec.kappa is None:
        return np.ones(1 << l, dtype=bool)
    counts = _popcounts(l)
    return counts == spec.kappa


@lru_cache(maxsize=32)
def _popcounts(l: int) -> np.ndarray:
    m = np.arange(1 << l)
    c = ((m[:, None] >> np.arange(l)) & 1).sum(1)
    c.setflags(write=False)
    return c


@lru_cache(maxsize=64)
def _loss_matrix(spec: TargetLoss, l: int) -> np.ndarray:
    n = 1 << l
    if isinstance(spec, TreeDistance):
        mat = spec.tree.distance_matrix() / spec.scale
    else:
        m = np.arange(n)
        pred, true = m[:, None], m[None, :]
        pc = _popcounts(l)
        tp = pc[pred & true]
        npred = np.broadcast_to(pc[:, None], (n, n))
        ntrue = np.broadcast_to(pc[None, :], (n, n))
        with np.errstate(divide="ignore", invalid="ignore"):
            if isinstance(spec, Hamming):
                mat = pc[pred ^ true].astype(float)
                if spec.normalized:
                    mat = mat / l
            elif isinstance(spec, SubsetZeroOne):
                mat = (pred != true).astype(float)
            elif isinstance(spec, FBeta):
                b2 = spec.beta**2
                den = b2 * ntrue + npred
                mat = np.where(den == 0, 0.0, 1 - (1 + b2) * tp / np.where(den == 0, 1, den))
            elif isinstance(spec, Jaccard):
                den = ntrue + npred - tp
                mat = np.where(den == 0, 0.0, 1 - tp / np.where(den == 0, 1, den))
            elif isinstance(spec, PrecisionAtK):
                mat = 1 - tp / spec.kappa
            elif isinstance(spec, RecallAtK):
                mat = np.where(ntrue == 0, 0.0, 1 - tp / np.where(ntrue == 0, 1, ntrue))
            else:
                mat = np.array([[spec._value(a, b, l) for b in range(n)] for a in range(n)])
    mat = np.asarray(mat, dtype=float)
    mat.setflags(write=False)
    return mat


def loss_matrix(spec: TargetLoss, l: int, extend: bool = False) -> np.ndarray:
    """Dense ``L[pred, true]`` over all bitmasks (``l <= 12``).

    Rows of inadmissible predictions hold the formula's raw value, or the
    maximal loss 1 when ``extend`` is set.
    """
    if not 1 <= l <= 12:
        raise CapacityError(f"dense loss matrices are limited to 1 <= l <= 12, got {l}")
    spec.check(l)
    mat = _loss_matrix(spec, l)
    if extend and spec.kappa is not None:
        mat = np.where(admissible_mask(spec, l)[:, None], mat, 1.0)
    return mat


def loss_column(spec: TargetLoss, y_true: LabelVector, extend: bool = True) -> np.ndarray:
    """Loss of every prediction bitmask against a fixed truth (``l <= 24``)."""
    l = y_true.l
    _check_enum(l)
    spec.check(l)
    if l <= 12:
        return np.array(loss_matrix(spec, l, extend=extend)[:, y_true.bits])
    m = np.arange(1 << l, dtype=np.int64)
    pc = np.zeros(m.shape, dtype=np.int64)
    for i in range(l):
        pc += (m >> i) & 1
    tp = np.zeros_like(pc)
    t = y_true.bits
    for i in range(l):
        if (t >> i) & 1:
            tp += (m >> i) & 1
    ntrue = popcount(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(spec, Hamming):
            ham = pc + ntrue - 2 * tp
            col = ham / l if spec.normalized else ham.astype(float)
        elif isinstance(spec, SubsetZeroOne):
            col = (m != t).astype(float)
        elif isinstance(spec, FBeta):
            b2 = spec.beta**2
            den = b2 * ntrue + pc
            col = np.where(den == 0, 0.0, 1 - (1 + b2) * tp / np.where(den == 0, 1, den))
        elif isinstance(spec, Jaccard):
            den = ntrue + pc - tp
            col = np.where(den == 0, 0.0, 1 - tp / np.where(den == 0, 1, den))
        elif isinstance(spec, PrecisionAtK):
            col = 1 - tp / spec.kappa
        elif isinstance(spec, RecallAtK):
            col = np.zeros(m.shape) if ntrue == 0 else 1 - tp / ntrue
        else:
            col = np.array([spec._value(int(a), t, l) for a in m])
    col = np.asarray(col, dtype=float)
    if extend and spec.kappa is not None:
        col = np.where(pc == spec.kappa, col, 1.0)
    return col


def as_linear_fractional(spec: TargetLoss, l: int) -> LinearFractional:
    """Linear-fractional coefficients reproducing ``spec`` on admissible pairs."""
    if isinstance(spec, Hamming) and spec.normalized:
        return LinearFractional(a10=1 / l, a01=1 / l, b0=1.0)
    if isinstance(spec, FBeta):
        b2 = spec.beta**2
        return LinearFractional(a10=1.0, a01=b2, b0=0.0, b11=1 + b2, b10=1.0, b01=b2,
                                zero_over_zero=0.0)
    if isinstance(spec, Jaccard):
        return LinearFractional(a10=1.0, a01=1.0, b0=0.0, b11=1.0, b10=1.0, b01=1.0,
                                zero_over_zero=0.0)
    if isinstance(spec, PrecisionAtK):
        # TP + FP = kappa on admissible predictions
        return LinearFractional(a10=1.0, b0=0.0, b11=1.0, b10=1.0, zero_over_zero=1.0)
    if isinstance(spec, RecallAtK):
        return LinearFractional(a01=1.0, b0=0.0, b11=1.0, b01=1.0, zero_over_zero=0.0)
    raise DomainError(f"{spec.name} has no linear-fractional encoding")


# ---------------------------------------------------------------------------
# textual tags


def parse_target(tag: str) -> TargetLoss:
    """Parse a CLI target tag such as ``hamming``, ``fbeta:2`` or ``precision@3``."""
    tag = tag.strip()
    try:
        if tag == "hamming":
            return Hamming()
        if tag == "hamming-raw":
            return Hamming(normalized=False)
        if tag == "f1":
            return FBeta(1.0)
        if tag.startswith("fbeta:"):
            return FBeta(float(tag[6:]))
        if tag in ("subset01", "subset-0-1"):
            return SubsetZeroOne()
        if tag == "jaccard":
            return Jaccard()
        if tag.startswith("precision@"):
            return PrecisionAtK(int(tag[10:]))
        if tag.startswith("recall@"):
            return RecallAtK(int(tag[7:]))
        if tag.startswith("lf:"):
            vals = [float(v) for v in tag[3:].split(",")]
            if len(vals) not in (10, 11):
                raise ValueError
            return LinearFractional(*vals)
        if tag.startswith("tree:"):
            with open(tag[5:]) as fh:
                return TreeDistance(LabelTree.loads(fh.read()))
    except (ValueError, TypeError):
        raise ParseError(f"bad target tag {tag!r}") from None
    raise ParseError(f"unknown target tag {tag!r}")


def parse_targets(tags: Sequence[str] | str) -> list[TargetLoss]:
    if isinstance(tags, str):
        tags = [t for t in tags.split(";") if t]
    return [parse_target(t) for t in tags]


def decode_scores(scores, spec: TargetLoss | None = None) -> LabelVector:
    """Prediction from per-label scores.

    Thresholds at zero with ``sign(0) = +1``; for top-k targets the ``k``
    largest scores are positive, ties going to the lower index.
    """
    s = np.asarray(scores, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DimensionError("scores must be a non-empty vector")
    l = s.size
    kappa = getattr(spec, "kappa", None)
    if kappa is None:
        bits = sum(1 << i for i in np.flatnonzero(s >= 0).tolist())
        return LabelVector(l, bits)
    spec.check(l)
    top = np.argsort(-s, kind="stable")[:kappa]
    return LabelVector.from_indices(l, top.tolist())
