import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from mllc.errors import CapacityError, DimensionError, DomainError
from mllc.lab import (
    CSV_HEADER,
    BoundSpec,
    ConditionalDistribution,
    GammaTag,
    MinimizerOptions,
    SweepConfig,
    bayes_consistency_gap,
    bayes_costs,
    expected_losses,
    gamma_apply,
    gamma_for,
    minimize_conditional_surrogate,
    random_distribution,
    random_scores,
    sweep,
    target_conditional_regret,
    verify_bound,
)
from mllc.labels import FBeta, Hamming, Jaccard, LabelVector, PrecisionAtK, RecallAtK, SubsetZeroOne, loss_matrix
from mllc.surrogates import (
    GCE,
    MAE,
    BinaryLogistic,
    BinaryRelevance,
    CompSum,
    Constrained,
    Exp,
    Hinge,
    MLLogistic,
    RhoMargin,
    SqHinge,
    SumExp,
    conditional_error,
)


def two_point(p_plus):
    return ConditionalDistribution(1, [1 - p_plus, p_plus])


# ---------------------------------------------------------------------------
# distributions


def test_distribution_validation():
    with pytest.raises(DomainError):
        ConditionalDistribution(1, [0.5, 0.6])
    with pytest.raises(DomainError):
        ConditionalDistribution(1, [1.5, -0.5])
    with pytest.raises(DimensionError):
        ConditionalDistribution(2, [0.5, 0.5])
    assert ConditionalDistribution.point_mass(LabelVector(2, 3)).probs.tolist() == [0, 0, 0, 1]
    p = ConditionalDistribution(2, [0.1, 0.2, 0.3, 0.4])
    assert np.allclose(p.label_marginals(), [0.2 + 0.4, 0.3 + 0.4])


def test_random_distribution_reproducible():
    a = random_distribution(3, seed=7)
    b = random_distribution(3, seed=7)
    assert a.probs.tobytes() == b.probs.tobytes()
    assert random_distribution(3, seed=8).probs.tobytes() != a.probs.tobytes()
    assert random_distribution(3, seed=7, trial=1).probs.tobytes() != a.probs.tobytes()
    assert abs(math.fsum(a.probs) - 1) <= 1e-12


def test_random_distribution_concentration_limit():
    for trial in range(100):
        p = random_distribution(3, seed=0, concentration=1e6, trial=trial)
        assert np.abs(p.probs - 1 / 8).max() <= 1e-2


def test_random_distribution_tiny_concentration_stays_valid():
    for trial in range(20):
        p = random_distribution(4, seed=1, concentration=1e-3, trial=trial)
        assert abs(math.fsum(p.probs) - 1) <= 1e-12


def test_random_distribution_errors():
    with pytest.raises(CapacityError):
        random_distribution(17, 0)
    with pytest.raises(DomainError):
        random_distribution(2, 0, concentration=0.0)


def test_random_scores_reproducible():
    assert np.array_equal(random_scores(4, 3, 2), random_scores(4, 3, 2))
    assert np.array_equal(random_scores(4, 3, 2, scale=4.0), 2 * random_scores(4, 3, 2))


# ---------------------------------------------------------------------------
# target side


def test_bayes_costs_examples():
    c, y = bayes_costs(ConditionalDistribution.point_mass(LabelVector(3, 5)), FBeta(1.0))
    assert y.bits == 5 and c[5] == 0
    c, y = bayes_costs(two_point(0.7), Hamming())
    assert c[1] == pytest.approx(0.3) and c[0] == pytest.approx(0.7) and y.bits == 1
    c, y = bayes_costs(ConditionalDistribution.uniform(2), SubsetZeroOne())
    assert np.allclose(c, 0.75) and y.bits == 0


def test_bayes_costs_at_k_restricts_argmin():
    p = random_distribution(3, seed=2)
    c, y = bayes_costs(p, PrecisionAtK(1))
    assert bin(y.bits).count("1") == 1
    assert np.isinf(c[0]) and np.isinf(c[7])


def test_target_regret_examples():
    assert target_conditional_regret(two_point(0.7), Hamming(), [-1.0]) == pytest.approx(0.4)
    assert target_conditional_regret(two_point(0.7), Hamming(), [0.0]) == 0.0  # sign(0) = +1
    p = random_distribution(3, seed=3)
    c, _ = bayes_costs(p, PrecisionAtK(1))
    expect = c[0b001] - min(c[0b001], c[0b010], c[0b100])
    assert target_conditional_regret(p, PrecisionAtK(1), [3.0, 2.0, 1.0]) == pytest.approx(expect, abs=1e-15)


@pytest.mark.parametrize("target", [Hamming(), FBeta(1.0), SubsetZeroOne(), Jaccard()])
def test_target_regret_is_cost_difference_exhaustive(target):
    for l in range(1, 9):
        p = random_distribution(l, seed=4)
        c = loss_matrix(target, l) @ p.probs
        for m in range(1 << l):
            h = np.where((m >> np.arange(l)) & 1, 1.0, -1.0)
            assert target_conditional_regret(p, target, h) == c[m] - c.min()


def test_expected_losses_large_l_path():
    p = random_distribution(13, seed=5, concentration=0.05)
    c = expected_losses(p, Hamming())
    marg = p.label_marginals()
    m = 4321
    bits = (m >> np.arange(13)) & 1
    assert c[m] == pytest.approx(np.where(bits, 1 - marg, marg).mean(), abs=1e-12)


# ---------------------------------------------------------------------------
# conditional minimizers


def test_point_mass_minimizer_is_realizable():
    # only the true labeling carries weight under subset 0/1, so the infimum is 0
    y = LabelVector(3, 0b101)
    p = ConditionalDistribution.point_mass(y)
    spec = MLLogistic(SubsetZeroOne())
    res = minimize_conditional_surrogate(p, spec)
    assert res.value <= 1e-6
    assert np.array_equal(np.sign(res.scores), y.signs())
    probe = np.where(y.signs() > 0, 20.0, -20.0)
    assert conditional_error(spec, p.probs, probe) <= 1e-6


def test_point_mass_hamming_minimizer_is_finite():
    # Hamming keeps weight on neighbours of y, so scores stop at tanh(h_i) = y_i / l
    y = LabelVector(3, 0b101)
    p = ConditionalDistribution.point_mass(y)
    res = minimize_conditional_surrogate(p, MLLogistic(Hamming()))
    assert np.allclose(np.tanh(res.scores), y.signs() / 3, atol=1e-12)
    assert res.value > 0


def test_minimizer_matches_grid_l1():
    p = two_point(0.7)
    spec = MLLogistic(Hamming())
    res = minimize_conditional_surrogate(p, spec)
    grid = np.arange(-10, 10 + 1e-9, 1e-3)
    best = min(conditional_error(spec, p.probs, [h]) for h in grid)
    assert res.converged
    assert res.value == pytest.approx(best, abs=1e-4)
    assert res.value <= best + 1e-12


def test_symmetric_distribution_minimizer_is_origin():
    rng = np.random.default_rng(0)
    for l in (1, 2, 3):
        half = rng.random(1 << (l - 1))
        probs = np.concatenate([half, half[::-1]])  # p(y) = p(-y)
        p = ConditionalDistribution(l, probs / probs.sum())
        res = minimize_conditional_surrogate(p, MLLogistic(Hamming()))
        assert res.value == pytest.approx(conditional_error(MLLogistic(Hamming()), p.probs, np.zeros(l)), abs=1e-10)


EXACT = [
    MLLogistic(Hamming()),
    MLLogistic(Jaccard()),
    CompSum(SubsetZeroOne(), MAE()),
    Constrained(Hamming(), Hinge()),
    Constrained(FBeta(1.0), RhoMargin(1.0)),
]


@pytest.mark.parametrize("spec", EXACT, ids=lambda s: f"{s.tag}-{s.target.name}")
def test_exact_minimizers_beat_independent_search(spec):
    from scipy.optimize import minimize

    rng = np.random.default_rng(1)
    for l in (1, 2, 3):
        for _ in range(5):
            p = ConditionalDistribution(l, rng.dirichlet(np.ones(1 << l)))
            res = minimize_conditional_surrogate(p, spec)
            assert res.method == "exact" and res.converged
            at = conditional_error(spec, p.probs, res.scores)
            assert at == pytest.approx(res.value, abs=1e-9) or at >= res.value
            f = lambda h: conditional_error(spec, p.probs, h)  # noqa: E731
            for _ in range(3):
                h0 = rng.normal(scale=3, size=l)
                alt = minimize(f, h0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 4000})
                assert res.value <= alt.fun + 1e-7


@pytest.mark.parametrize("spec", [CompSum(Hamming(), SumExp()), CompSum(FBeta(1.0), GCE(0.5)),
                                  Constrained(Jaccard(), Exp()), Constrained(Hamming(), SqHinge())],
                         ids=lambda s: s.tag)
def test_descent_minimizers_are_stationary(spec):
    from scipy.optimize import minimize

    rng = np.random.default_rng(2)
    for l in (1, 2, 3):
        p = ConditionalDistribution(l, rng.dirichlet(np.ones(1 << l)))
        res = minimize_conditional_surrogate(p, spec)
        assert res.converged
        alt = minimize(lambda h: conditional_error(spec, p.probs, h), np.zeros(l), method="BFGS", options={"gtol": 1e-10})
        assert res.value <= alt.fun + 1e-8


@pytest.mark.parametrize("phi", [BinaryLogistic(), Exp(), SqHinge(), Hinge()], ids=lambda f: f.tag)
def test_binary_relevance_minimizer_per_label(phi):
    spec = BinaryRelevance(phi)
    p = random_distribution(3, seed=9)
    res = minimize_conditional_surrogate(p, spec)
    eta = p.label_marginals()
    expect = 0.0
    for e in eta:
        f = lambda h: e * phi.value(np.array([h]))[0] + (1 - e) * phi.value(np.array([-h]))[0]  # noqa: E731
        expect += minimize_scalar(f, bounds=(-40, 40), method="bounded", options={"xatol": 1e-12}).fun
    assert res.value == pytest.approx(expect, abs=1e-7)
    assert res.value <= expect + 1e-12


def test_minimizer_capacity():
    with pytest.raises(CapacityError):
        minimize_conditional_surrogate(ConditionalDistribution.uniform(11), MLLogistic(Hamming()))


def test_minimizer_is_deterministic():
    p = random_distribution(3, seed=3)
    spec = CompSum(Hamming(), GCE(0.5))
    a = minimize_conditional_surrogate(p, spec, MinimizerOptions(seed=4))
    b = minimize_conditional_surrogate(p, spec, MinimizerOptions(seed=4))
    assert np.array_equal(a.scores, b.scores) and a.value == b.value


# ---------------------------------------------------------------------------
# bound functions


def test_gamma_examples():
    b = BoundSpec(MLLogistic(Hamming()))
    assert gamma_apply(b, 0.25, 3) == 1.0
    assert gamma_apply(BoundSpec(CompSum(Hamming(), MAE())), 0.1, 2) == pytest.approx(0.4)
    assert gamma_apply(BoundSpec(CompSum(Hamming(), GCE(0.5))), 0.01, 2) == pytest.approx(0.28284271247, abs=1e-10)
    assert gamma_apply(BoundSpec(BinaryRelevance()), 0.5, 4) == pytest.approx(math.sqrt(2))
    assert gamma_apply(BoundSpec(Constrained(Hamming(), Exp())), 0.25, 3) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        gamma_apply(b, -1e-3, 2)


def test_gamma_pairing_is_enforced():
    assert gamma_for(MLLogistic(Hamming())) == GammaTag("sqrt2x")
    assert gamma_for(Constrained(Hamming(), RhoMargin(2.0))) == GammaTag("linear")
    assert gamma_for(CompSum(Hamming(), GCE(0.3))) == GammaTag("sqrt-nq", 0.3)
    with pytest.raises(DomainError):
        BoundSpec(MLLogistic(Hamming()), GammaTag("linear"))
    with pytest.raises(DomainError):
        BoundSpec(BinaryRelevance(Exp()))
    with pytest.raises(DomainError):
        GammaTag("sqrt-nq")


ALL_BOUNDS = [
    BoundSpec(MLLogistic(Hamming())),
    BoundSpec(CompSum(Hamming(), GCE(0.5))),
    BoundSpec(CompSum(Hamming(), MAE())),
    BoundSpec(Constrained(Jaccard(), Exp())),
    BoundSpec(Constrained(Hamming(), Hinge())),
    BoundSpec(BinaryRelevance()),
]


@given(st.floats(0, 10), st.floats(0, 10), st.integers(1, 6))
@settings(max_examples=100)
def test_gamma_subadditive(a, b, l):
    for bound in ALL_BOUNDS:
        assert gamma_apply(bound, a + b, l) <= gamma_apply(bound, a, l) + gamma_apply(bound, b, l) + 1e-12


# ---------------------------------------------------------------------------
# verify_bound


def test_verify_bound_at_minimizer():
    p = random_distribution(2, seed=1)
    bound = BoundSpec(MLLogistic(Hamming()))
    res = minimize_conditional_surrogate(p, bound.surrogate)
    rep = verify_bound(p, res.scores, bound, minimum=res)
    assert rep.surrogate_regret == 0 and rep.target_regret <= 1e-12 and rep.holds


def test_verify_bound_two_point_example():
    rep = verify_bound(two_point(0.7), [-1.0], BoundSpec(MLLogistic(Hamming())))
    assert rep.target_regret == pytest.approx(0.4)
    assert rep.surrogate_regret >= 0.04 - 1e-6
    # oracle: the infimum over a fine grid
    spec = MLLogistic(Hamming())
    best = min(conditional_error(spec, [0.3, 0.7], [h]) for h in np.arange(-10, 10, 1e-3))
    assert rep.surrogate_regret == pytest.approx(conditional_error(spec, [0.3, 0.7], [-1.0]) - best, abs=1e-6)
    assert rep.holds


def test_report_flags():
    from mllc.lab import RegretReport

    assert RegretReport(0.5, 0.01, 0.2, -0.3, True, 0).violation
    r = RegretReport(0.5, 0.01, 0.2, -0.3, False, 8)
    assert r.flagged and not r.violation
    assert RegretReport(0.1, 0.01, 0.2, 0.1, False, 8).holds


def test_surrogate_regret_decreases_toward_minimizer():
    rng = np.random.default_rng(3)
    for spec in (MLLogistic(Hamming()), CompSum(Hamming(), SumExp()), Constrained(Hamming(), Exp())):
        p = random_distribution(3, seed=11)
        res = minimize_conditional_surrogate(p, spec)
        h0 = rng.normal(scale=3, size=3)
        vals = [conditional_error(spec, p.probs, res.scores + lam * (h0 - res.scores)) for lam in np.linspace(1, 0, 21)]
        assert all(b <= a + 1e-10 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# where linear per-label scores fall short of the bounds


def test_hinge_counterexample_with_linear_scores():
    """With labeling scores tied to y'.h the hinge bound t can be beaten.

    The LP optimum is confirmed by a dense grid.
    """
    p = random_distribution(2, seed=0, trial=181)
    h = random_scores(2, seed=0, trial=181)
    spec = Constrained(Hamming(), Hinge())
    rep = verify_bound(p, h, BoundSpec(spec))
    grid = np.linspace(-4, 4, 161)
    best = min(conditional_error(spec, p.probs, [a, b]) for a in grid for b in grid)
    res = minimize_conditional_surrogate(p, spec)
    assert res.value == pytest.approx(best, abs=1e-9)
    assert rep.target_regret > rep.gamma_value + 0.05


def test_logistic_subset_minimizer_predicts_marginal_majority():
    """The logistic minimizer factorizes over labels, so for subset 0/1 it
    predicts the per-label majority, which need not be the mode of ``p``."""
    p = ConditionalDistribution(2, [0.0, 0.3, 0.3, 0.4])  # mode (+,+) ... marginals 0.7, 0.7
    assert bayes_consistency_gap(p, MLLogistic(SubsetZeroOne())) == 0.0
    q = ConditionalDistribution(2, [0.0, 0.35, 0.35, 0.3])  # mode is (+,-) or (-,+); majority says (+,+)
    res = minimize_conditional_surrogate(q, MLLogistic(SubsetZeroOne()))
    assert res.converged
    assert bayes_consistency_gap(q, MLLogistic(SubsetZeroOne())) == pytest.approx(0.05)


def test_logistic_hamming_minimizer_is_bayes():
    for trial in range(50):
        p = random_distribution(3, seed=5, trial=trial)
        assert bayes_consistency_gap(p, MLLogistic(Hamming())) <= 2e-5


# ---------------------------------------------------------------------------
# sweeps


def test_sweep_zero_trials_writes_header(tmp_path):
    out = tmp_path / "s.csv"
    s = sweep(SweepConfig([BoundSpec(MLLogistic(Hamming()))], trials=0, out=str(out)))
    assert s.pairs == s.violations == 0
    assert out.read_text() == ",".join(CSV_HEADER) + "\n"


def test_sweep_csv_rows(tmp_path):
    out = tmp_path / "s.csv"
    bounds = [BoundSpec(MLLogistic(Hamming())), BoundSpec(CompSum(Jaccard(), GCE(0.5)))]
    s = sweep(SweepConfig(bounds, l_list=[1, 2], trials=5, seed=3, out=str(out)))
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == s.pairs == 20
    assert s.violations == 0
    assert [r["trial"] for r in rows[:5]] == ["0", "1", "2", "3", "4"]
    gce = [r for r in rows if r["psi_or_phi"] == "gce"]
    assert gce[0]["param"] == "0.5" and gce[0]["target"] == "jaccard" and gce[0]["surrogate"] == "comp-sum"
    r = rows[7]
    assert float(r["margin"]) == pytest.approx(float(r["gamma_value"]) - float(r["target_regret"]), abs=1e-15)
    assert len(r["target_regret"].replace("-", "").replace(".", "").split("e")[0]) <= 17


def test_sweep_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cfg = dict(bounds=[BoundSpec(Constrained(Hamming(), SqHinge()))], l_list=[2], trials=6, seed=9)
    sweep(SweepConfig(**cfg, out=str(a)))
    sweep(SweepConfig(**cfg, out=str(b)))
    assert a.read_bytes() == b.read_bytes()


def test_sweep_negative_control():
    bound = BoundSpec(MLLogistic(Hamming()), gamma_scale=0.1)
    s = sweep(SweepConfig([bound], l_list=[2], trials=40))
    assert s.violations >= 1


def test_sweep_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        sweep(SweepConfig([BoundSpec(MLLogistic(Hamming()))], trials=1, out=str(tmp_path / "no" / "x.csv")))


def test_recall_at_k_bound_small_sweep():
    s = sweep(SweepConfig([BoundSpec(MLLogistic(RecallAtK(1)))], l_list=[2, 3], trials=30))
    assert s.violations == 0
