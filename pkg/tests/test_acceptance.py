"""Acceptance criteria, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` (or ``python tests/test_acceptance.py``);
a PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import sys
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from conftest import _DETAILS as DETAILS
from synth import separable_dataset

from mllc import kernels
from mllc.cli import bench_fast_gradient, loglog_slope
from mllc.fastgrad import build_chain_wfa, fast_gradient, forward_backward, precompute_sums
from mllc.lab import (
    BoundSpec,
    SweepConfig,
    bayes_costs,
    minimize_conditional_surrogate,
    random_distribution,
    random_scores,
    sweep,
    verify_bound,
)
from mllc.labels import FBeta, Hamming, Jaccard, LabelVector, PrecisionAtK, RecallAtK, SubsetZeroOne, decode_scores
from mllc.surrogates import (
    GCE,
    MAE,
    BinaryRelevance,
    CompSum,
    Constrained,
    Exp,
    Hinge,
    MLLogistic,
    RhoMargin,
    SqHinge,
    SumExp,
    naive_gradient,
    surrogate_eval,
)
from mllc.trainer import LinearModel, TrainConfig, evaluate, load_model, save_model, train

pytestmark = pytest.mark.acceptance

SIX_TARGETS = [Hamming(), FBeta(1.0), SubsetZeroOne(), Jaccard(), PrecisionAtK(1), RecallAtK(1)]
TRIALS = 1000
L_LIST = (1, 2, 3)


def note(num, text):
    DETAILS[num] = text
    print(f"criterion {num}: {text}")


def sweep_report(specs, trials=TRIALS, l_list=L_LIST):
    """Per-family counts over the six targets."""
    rows = []
    for label, make in specs:
        s = sweep(SweepConfig([BoundSpec(make(t)) for t in SIX_TARGETS], l_list=l_list, trials=trials))
        worst = min(r.report.margin for r in s.rows) if s.rows else 0.0
        rows.append((label, s, worst))
    return rows


def describe(rows):
    return "; ".join(
        f"{label}: {s.violations} violations, {s.flagged} flagged, {s.nonconverged} nonconverged / {s.pairs}, "
        f"worst margin {worst:.3g}"
        for label, s, worst in rows
    )


# ---------------------------------------------------------------------------


def test_criterion_01_gradient_correctness():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(1))
    targets = [Hamming(), SubsetZeroOne(), FBeta(1.0), Jaccard()]
    d = 4
    worst_naive = worst_fd = 0.0
    for l in range(1, 11):
        for k in range(100):
            target = targets[k % len(targets)]
            W = rng.normal(scale=0.5, size=(l, d))
            x = rng.normal(size=d)
            y = LabelVector(l, int(rng.integers(1 << l)))
            pre = precompute_sums(target, y)
            g = fast_gradient(W, x, y, pre)
            spec = MLLogistic(target)
            naive = np.outer(naive_gradient(spec, W @ x, y), x).ravel()
            worst_naive = max(worst_naive, np.abs(g - naive).max() / np.abs(naive).max())
            step = 1e-5
            fd = np.empty(l * d)
            flat = W.ravel()
            for j in range(l * d):
                e = np.zeros(l * d)
                e[j] = step
                fd[j] = (surrogate_eval(spec, (flat + e).reshape(l, d) @ x, y)
                         - surrogate_eval(spec, (flat - e).reshape(l, d) @ x, y)) / (2 * step)
            worst_fd = max(worst_fd, np.abs(g - fd).max() / np.abs(fd).max())
    elapsed = time.perf_counter() - t0
    note(1, f"max rel err vs naive {worst_naive:.2e} (<=1e-6), vs finite differences {worst_fd:.2e} (<=1e-5), "
            f"{elapsed:.1f}s")
    assert worst_naive <= 1e-6
    assert worst_fd <= 1e-5
    assert elapsed < 60


def test_criterion_02_linear_scaling():
    backend = "compiled" if kernels.compiled is not None else "python"
    rows = bench_fast_gradient([64, 128, 256, 512, 1024], nnz=256, trials=100, seed=0, backend=backend)
    slope = loglog_slope(rows)
    note(2, f"{backend} backend, log-log slope {slope:.3f} (target [0.8, 1.3]); medians ns "
            + ", ".join(f"{l}:{med:.0f}" for l, med, _ in rows))
    assert kernels.compiled is not None, "compiled kernels not built"
    assert 0.8 <= slope <= 1.3


def test_criterion_03_forward_backward():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(3))
    worst_enum = worst_tanh = 0.0
    for l in range(1, 13):
        for _ in range(5):
            s = rng.normal(scale=2, size=l)
            g = forward_backward(build_chain_wfa(s))
            signs = np.array(list(product((-1.0, 1.0), repeat=l)))
            logw = signs @ s
            top = logw.max()
            logz = top + math.log(np.exp(logw - top).sum())
            q = np.exp(logw - logz) @ signs
            worst_enum = max(worst_enum, abs(g.logZ - logz), np.abs(g.q - q).max())
    for l in (16, 64, 256, 1024):
        for _ in range(5):
            s = rng.normal(scale=3, size=l)
            g = forward_backward(build_chain_wfa(s))
            worst_tanh = max(worst_tanh, np.abs(g.q - np.tanh(s)).max())
    elapsed = time.perf_counter() - t0
    note(3, f"enumeration err {worst_enum:.2e}, tanh err {worst_tanh:.2e} (<=1e-10), {elapsed:.1f}s")
    assert worst_enum <= 1e-10 and worst_tanh <= 1e-10 and elapsed < 30


def exact_hamming_sums(l, anchor_bits):
    """``l * L1`` and ``l * L2`` as integers by enumeration."""
    ys = [1 if (anchor_bits >> i) & 1 else -1 for i in range(l)]
    l1 = 0
    l2 = [0] * l
    for m in range(1 << l):
        yp = [1 if (m >> i) & 1 else -1 for i in range(l)]
        w = l - sum(a != b for a, b in zip(yp, ys))
        l1 += w
        for i in range(l):
            l2[i] += w * yp[i]
    return l1, l2


def test_criterion_04_closed_form_sums():
    rng = np.random.Generator(np.random.Philox(4))
    checked = 0
    mismatches = []
    for l in range(1, 13):
        anchors = range(1 << l) if l <= 5 else {0, (1 << l) - 1, *(int(v) for v in rng.integers(0, 1 << l, 4))}
        for bits in anchors:
            pre = precompute_sums(Hamming(), LabelVector(l, bits), "closed_form", cache=False)
            n1, n2 = exact_hamming_sums(l, bits)
            exact_l1 = Fraction(n1, l)
            exact_l2 = [Fraction(v, l) for v in n2]
            ok = (exact_l1 == 2 ** (l - 1) and pre.l1 == float(exact_l1)
                  and all(float(e) == v for e, v in zip(exact_l2, pre.l2))
                  and all(e == Fraction(2 ** (l - 1), l) * y for e, y in zip(exact_l2, LabelVector(l, bits).signs())))
            if not ok:
                mismatches.append((l, bits))
            checked += 1
    note(4, f"{checked} anchors over l=1..12, {len(mismatches)} mismatches against exact rationals")
    assert not mismatches


def test_criterion_05_logistic_bounds():
    rows = sweep_report([("ml-logistic", MLLogistic)])
    note(5, describe(rows))
    assert all(s.violations == 0 and s.pairs == 6 * 3 * TRIALS for _, s, _ in rows)


def test_criterion_06_comp_sum_bounds():
    rows = sweep_report([
        ("log", lambda t: CompSum(t)),
        ("sum-exp", lambda t: CompSum(t, SumExp())),
        ("gce:0.5", lambda t: CompSum(t, GCE(0.5))),
        ("mae", lambda t: CompSum(t, MAE())),
    ])
    note(6, describe(rows))
    for label, s, _ in rows:
        assert s.violations == 0, label
        if not s.rows[0].bound.surrogate.convex:
            assert s.nonconverged <= 0.01 * s.pairs, label


def test_criterion_07_constrained_bounds():
    rows = sweep_report([
        ("exp", lambda t: Constrained(t, Exp())),
        ("sq-hinge", lambda t: Constrained(t, SqHinge())),
        ("hinge", lambda t: Constrained(t, Hinge())),
        ("rho-margin:0.5", lambda t: Constrained(t, RhoMargin(0.5))),
        ("rho-margin:1", lambda t: Constrained(t, RhoMargin(1.0))),
        ("rho-margin:2", lambda t: Constrained(t, RhoMargin(2.0))),
    ])
    note(7, describe(rows))
    failing = [label for label, s, _ in rows if s.violations]
    assert not failing, f"violations for {failing}"


def test_criterion_08_binary_relevance_bound():
    bound = BoundSpec(BinaryRelevance())
    trials = 10_000
    violations = {}
    max_ratio = {}
    for l in (1, 2, 3, 4):
        violations[l] = 0
        max_ratio[l] = 0.0
        for trial in range(trials):
            p = random_distribution(l, 0, 1.0, trial)
            h = random_scores(l, 0, trial)
            rep = verify_bound(p, h, bound)
            violations[l] += rep.violation
            if rep.surrogate_regret > 0:
                max_ratio[l] = max(max_ratio[l], rep.target_regret / math.sqrt(rep.surrogate_regret))
    note(8, "violations per l " + str(violations) + "; max ratio per l "
            + ", ".join(f"{l}:{r:.3f}" for l, r in max_ratio.items()))
    assert max_ratio[4] > max_ratio[1]
    assert sum(violations.values()) == 0


def test_criterion_09_bayes_consistency():
    gaps = {}
    for target in (Hamming(), FBeta(1.0), SubsetZeroOne(), Jaccard()):
        spec = MLLogistic(target)
        worst, bad = 0.0, 0
        for l in (2, 3):
            for trial in range(500):
                p = random_distribution(l, 9, 1.0, trial)
                res = minimize_conditional_surrogate(p, spec)
                c, y_star = bayes_costs(p, target)
                gap = float(c[decode_scores(res.scores, target).bits] - c[y_star.bits])
                worst = max(worst, gap)
                bad += gap > 2e-5
        gaps[target.name] = (worst, bad)
    note(9, "; ".join(f"{k}: worst gap {w:.3g}, {b}/1000 above 2e-5" for k, (w, b) in gaps.items()))
    assert all(b == 0 for _, b in gaps.values())


def test_criterion_10_negative_control():
    bound = BoundSpec(MLLogistic(Hamming()), gamma_scale=0.1)
    s = sweep(SweepConfig([bound], l_list=L_LIST, trials=TRIALS))
    note(10, f"{s.violations} violations / {s.pairs} with gamma scaled by 0.1")
    assert s.violations >= 1


def test_criterion_11_end_to_end_training(tmp_path):
    data = separable_dataset(n=200, l=6, d=20, seed=0)
    spec = MLLogistic(Hamming())
    trajectories = {}
    models = {}
    for grad in ("fast", "naive"):
        steps = []
        cfg = TrainConfig(spec, lr=3e-4, epochs=100, seed=0, grad=grad)
        models[grad], _ = train(data, cfg, callback=lambda e, k, W: steps.append(W.copy()))
        trajectories[grad] = steps
    drift = max(np.abs(a - b).max() for a, b in zip(trajectories["fast"], trajectories["naive"]))
    hamming = evaluate(models["fast"], data, [Hamming()]).means["hamming"]
    path = tmp_path / "model.txt"
    save_model(models["fast"], path)
    again = load_model(path)
    exact = isinstance(again, LinearModel) and again.weights.tobytes() == models["fast"].weights.tobytes()
    note(11, f"training Hamming {hamming:.4g} (<=0.01), fast/naive max drift {drift:.2e} (<=1e-9) over "
             f"{len(trajectories['fast'])} steps, save/load bit-exact {exact}")
    assert len(trajectories["fast"]) == len(trajectories["naive"]) == 200 * 100
    assert hamming <= 0.01
    assert drift <= 1e-9
    assert exact


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider", *sys.argv[1:]]))
