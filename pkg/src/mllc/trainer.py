"""Linear multi-label models: data loading, SGD training, evaluation, persistence.

Label ``i`` is scored by its own weight row, ``h(x, i) = W[i] . x``, which is
the block feature map of the fast gradient.  Training is single-example SGD
from zero weights with a seeded per-epoch shuffle, so runs are reproducible.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from . import kernels
from .errors import (
    CapacityError,
    DimensionError,
    DivergedError,
    DomainError,
    LabelRangeError,
    NumericOverflowError,
    ParseError,
    UnsupportedModeError,
)
from .fastgrad import closed_form_supported, fast_loss, precompute_sums
from .labels import MAX_ENUM_LABELS, MAX_LABELS, LabelVector, TargetLoss, decode_scores, loss_eval
from .surrogates import (
    NAIVE_GRAD_MAX_LABELS,
    BinaryRelevance,
    MLLogistic,
    SurrogateSpec,
    naive_gradient,
    surrogate_eval,
)

DIVERGENCE_SCORE = 1e8
NAIVE_EVAL_MAX_LABELS = 16


@dataclass(frozen=True, eq=False)
class Example:
    idx: np.ndarray
    vals: np.ndarray
    y: LabelVector


@dataclass(frozen=True, eq=False)
class Dataset:
    l: int
    d: int
    examples: tuple

    def __post_init__(self):
        if not self.examples:
            raise DomainError("a dataset needs at least one example")

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


def parse_dataset(source: TextIO | str, l: int, d: int | None = None) -> Dataset:
    """Read ``<labels>\\t<idx>:<val> ...`` lines.

    ``<labels>`` is a comma-separated list of relevant label indices (possibly
    empty).  Blank lines and lines starting with ``#`` are skipped.  The
    feature dimension is one past the largest index unless ``d`` is given.
    ``source`` is a text stream or the file contents as a string.
    """
    if not 1 <= l <= MAX_LABELS:
        raise CapacityError(f"label count must be in [1, {MAX_LABELS}], got {l}")
    stream = io.StringIO(source) if isinstance(source, str) else source
    examples = []
    max_idx = -1
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError(f"line {lineno}: expected <labels><TAB><features>")
        lab, feats = line.split("\t", 1)
        try:
            rel = [int(t) for t in lab.split(",")] if lab.strip() else []
        except ValueError:
            raise ParseError(f"line {lineno}: bad label list {lab!r}") from None
        for r in rel:
            if not 0 <= r < l:
                raise LabelRangeError(f"line {lineno}: label {r} outside [0, {l})")
        idx, vals = [], []
        for tok in feats.split():
            k, sep, v = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                k, v = int(k), float(v)
            except ValueError:
                raise ParseError(f"line {lineno}: bad feature {tok!r}") from None
            if k < 0:
                raise ParseError(f"line {lineno}: negative feature index {k}")
            if not math.isfinite(v):
                raise ParseError(f"line {lineno}: non-finite feature value {tok!r}")
            idx.append(k)
            vals.append(v)
        if len(set(idx)) != len(idx):
            raise ParseError(f"line {lineno}: duplicate feature index")
        order = np.argsort(idx, kind="stable")
        ia = np.asarray(idx, dtype=np.int64)[order]
        va = np.asarray(vals, dtype=float)[order]
        if ia.size:
            max_idx = max(max_idx, int(ia[-1]))
        examples.append(Example(ia, va, LabelVector.from_indices(l, rel)))
    if not examples:
        raise ParseError("no examples in dataset")
    dim = max_idx + 1
    if d is not None:
        if dim > d:
            raise DimensionError(f"feature index {max_idx} outside dimension {d}")
        dim = d
    return Dataset(l, max(dim, 1), tuple(examples))


def load_dataset(path, l: int, d: int | None = None) -> Dataset:
    with open(path) as fh:
        return parse_dataset(fh, l, d)


@dataclass(eq=False)
class LinearModel:
    l: int
    d: int
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=float)
        if self.weights.shape != (self.l, self.d):
            raise DimensionError(f"weights of shape {self.weights.shape} for l={self.l}, d={self.d}")
        if not np.isfinite(self.weights).all():
            raise DomainError("model weights must be finite")

    @classmethod
    def zeros(cls, l, d):
        return cls(l, d, np.zeros((l, d)))

    def __eq__(self, other):
        if not isinstance(other, LinearModel):
            return NotImplemented
        return (self.l, self.d) == (other.l, other.d) and np.array_equal(self.weights, other.weights)

    def scores(self, features) -> np.ndarray:
        idx, vals = _features(features)
        if idx.size and idx.max() >= self.d:
            raise DimensionError(f"feature index {int(idx.max())} outside model dimension {self.d}")
        return self.weights[:, idx] @ vals


def _features(features):
    if isinstance(features, Example):
        return features.idx, features.vals
    from .fastgrad import as_sparse

    return as_sparse(features)


@dataclass(frozen=True)
class TrainConfig:
    surrogate: SurrogateSpec
    lr: float = 0.1
    schedule: str = "constant"
    decay: float = 0.0
    epochs: int = 1
    seed: int = 0
    grad: str = "auto"
    cache: bool = True
    use_wfa: bool = False

    def __post_init__(self):
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            raise DomainError(f"learning rate must be finite and non-negative, got {self.lr}")
        if self.schedule not in ("constant", "inverse"):
            raise DomainError(f"unknown schedule {self.schedule!r}")
        if self.decay < 0:
            raise DomainError("decay must be non-negative")
        if self.epochs < 1:
            raise DomainError("epochs must be at least 1")
        if self.grad not in ("auto", "fast", "naive"):
            raise UnsupportedModeError(f"unknown gradient mode {self.grad!r}")

    def rate(self, step: int) -> float:
        if self.schedule == "constant":
            return self.lr
        return self.lr / (1.0 + self.decay * step)


def fast_path_available(spec: SurrogateSpec, l: int) -> bool:
    return isinstance(spec, MLLogistic) and (closed_form_supported(spec.target) or l <= MAX_ENUM_LABELS)


def resolve_grad_mode(cfg: TrainConfig, l: int) -> str:
    """Pick and validate the gradient mode for ``l`` labels."""
    spec = cfg.surrogate
    mode = cfg.grad
    if mode == "auto":
        mode = "fast" if fast_path_available(spec, l) else "naive"
    if mode == "fast":
        if not isinstance(spec, MLLogistic):
            raise UnsupportedModeError(f"the fast gradient covers ml-logistic only, not {spec.tag}")
        if not fast_path_available(spec, l):
            raise CapacityError(f"no loss sums for {spec.target.name} at l={l}")
    elif not isinstance(spec, BinaryRelevance) and l > NAIVE_GRAD_MAX_LABELS:
        raise CapacityError(f"naive gradients need l <= {NAIVE_GRAD_MAX_LABELS}, got {l}")
    return mode


def epoch_loss(model: LinearModel, data: Dataset, spec: SurrogateSpec) -> float:
    """Mean surrogate loss over the dataset."""
    total = []
    enumerate_ok = isinstance(spec, BinaryRelevance) or data.l <= NAIVE_EVAL_MAX_LABELS
    for ex in data:
        s = model.weights[:, ex.idx] @ ex.vals
        if enumerate_ok:
            total.append(surrogate_eval(spec, s, ex.y))
        else:
            total.append(fast_loss(s, precompute_sums(spec.target, ex.y)))
    return math.fsum(total) / len(total)


def train(data: Dataset, cfg: TrainConfig, callback=None):
    """SGD on the surrogate; returns ``(model, per-epoch mean training loss)``.

    ``callback(epoch, step, W)`` runs after every step when given.
    """
    spec = cfg.surrogate
    l, d = data.l, data.d
    mode = resolve_grad_mode(cfg, l)
    if mode == "fast":
        kern = kernels.active
        sums = [precompute_sums(spec.target, ex.y, cache=cfg.cache) for ex in data]
    W = np.zeros((l, d))
    history = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, epoch])))
        for j in rng.permutation(len(data)):
            ex = data.examples[j]
            lr = cfg.rate(step)
            if mode == "fast":
                pre = sums[j]
                smax = kern.mllog_sgd_step(W, ex.idx, ex.vals, pre.l1, pre.l2, lr, cfg.use_wfa)
            else:
                s = W[:, ex.idx] @ ex.vals
                smax = float(np.abs(s).max()) if s.size else 0.0
                if smax <= DIVERGENCE_SCORE:
                    g = naive_gradient(spec, s, ex.y)
                    W[:, ex.idx] -= lr * np.outer(g, ex.vals)
            if not smax <= DIVERGENCE_SCORE:
                raise DivergedError(epoch, lr, f": score magnitude {smax:.3g}")
            step += 1
            if callback is not None:
                callback(epoch, step, W)
        if not np.isfinite(W).all():
            raise DivergedError(epoch, cfg.rate(step), ": non-finite weights")
        model = LinearModel(l, d, W.copy())
        try:
            loss = epoch_loss(model, data, spec)
        except NumericOverflowError as exc:
            raise DivergedError(epoch, cfg.rate(step), f": {exc}") from None
        if not math.isfinite(loss):
            raise DivergedError(epoch, cfg.rate(step), ": non-finite loss")
        history.append(loss)
    return LinearModel(l, d, W), history


def predict(model: LinearModel, features, target: TargetLoss | None = None) -> LabelVector:
    """Sign of each score (``sign(0) = +1``), or the top-k labels for @k targets."""
    return decode_scores(model.scores(features), target)


@dataclass(frozen=True)
class EvalReport:
    means: dict
    n: int


def evaluate(model: LinearModel, data: Dataset, targets: Sequence[TargetLoss]) -> EvalReport:
    if data.l != model.l:
        raise DimensionError(f"data has l={data.l}, model has l={model.l}")
    preds = [predict(model, ex, None) for ex in data]
    means = {}
    for t in targets:
        if t.kappa is not None:
            losses = [loss_eval(t, predict(model, ex, t), ex.y) for ex in data]
        else:
            losses = [loss_eval(t, p, ex.y) for p, ex in zip(preds, data)]
        means[t.name] = math.fsum(losses) / len(losses)
    return EvalReport(means, len(data))


# ---------------------------------------------------------------------------
# persistence

MODEL_MAGIC = "MLLC v1"


def dumps_model(model: LinearModel) -> str:
    lines = [MODEL_MAGIC, f"l={model.l} d={model.d}"]
    lines += [" ".join("%.17g" % v for v in row) for row in model.weights]
    return "\n".join(lines) + "\n"


def save_model(model: LinearModel, path) -> None:
    text = dumps_model(model)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def loads_model(text: str) -> LinearModel:
    """Parse a model file.

    A file cut short (missing final newline or short rows) is a parse error;
    a well-formed file whose row count disagrees with its header is a
    dimension error.
    """
    lines = text.split("\n")
    if not lines or lines[0].strip() != MODEL_MAGIC:
        head = lines[0].strip() if lines else ""
        raise ParseError(f"expected {MODEL_MAGIC!r} header, got {head!r}")
    if len(lines) < 3 or not text.endswith("\n"):
        raise ParseError("model file is truncated")
    try:
        fields = dict(tok.split("=", 1) for tok in lines[1].split())
        l, d = int(fields["l"]), int(fields["d"])
    except (ValueError, KeyError):
        raise ParseError(f"bad model dimensions line {lines[1]!r}") from None
    if l < 1 or d < 1:
        raise ParseError(f"bad model dimensions l={l} d={d}")
    rows = []
    for k, line in enumerate(lines[2:-1], 3):
        toks = line.split()
        if len(toks) != d:
            raise ParseError(f"line {k}: expected {d} weights, got {len(toks)}")
        try:
            rows.append([float(t) for t in toks])
        except ValueError:
            raise ParseError(f"line {k}: bad weight") from None
    if len(rows) != l:
        raise DimensionError(f"header says l={l} but the file has {len(rows)} weight rows")
    return LinearModel(l, d, np.array(rows))


def load_model(path) -> LinearModel:
    with open(path) as fh:
        return loads_model(fh.read())
