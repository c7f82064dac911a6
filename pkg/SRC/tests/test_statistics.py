from fractions import Fraction

import numpy as np
import pytest

from SRC.exception import InvalidParameterError, RejectedInputError, UnsupportedStatisticError
from SRC.pipeline.partition import CubicPartition, PairedSample, build_counts
from SRC.pipeline.statistics import (
    STATISTICS,
    ScoreFunction,
    WeightFunction,
    b_k_n,
    evaluate,
    gamma_n,
    histogram_density,
    kendall_tau,
    kendall_tau_reference,
    l_n,
    m_n,
    ranks,
    resolve_ids,
    t_n,
    v_n,
    v_n_exact,
)

HALF = CubicPartition(1, 1, 0.5, 0.5)
QUARTER = CubicPartition.unit_grid(4)


# ------------------------------------------------------------ brute force oracles


def _brute_vn(x, y, width):
    n = len(x)
    jx = [int(np.floor(v / width)) for v in x]
    jy = [int(np.floor(v / width)) for v in y]
    total = Fraction(0)
    for j in set(jx):
        for k in set(jy):
            joint = sum(1 for a, b in zip(jx, jy) if a == j and b == k)
            total += abs(Fraction(joint, n) - Fraction(jx.count(j), n) * Fraction(jy.count(k), n))
    return total


def _ecdf(values, t, strict=False):
    return Fraction(sum(1 for v in values if (v < t if strict else v <= t)), len(values))


def _joint_ecdf(x, y, s, t, strict_x=False):
    n = len(x)
    hits = sum(1 for a, b in zip(x, y) if (a < s if strict_x else a <= s) and b <= t)
    return Fraction(hits, n)


def _brute_gamma(x, y):
    best = Fraction(0)
    for s in x:
        for t in y:
            for sx in (False, True):
                for sy in (False, True):
                    hits = sum(
                        1
                        for a, b in zip(x, y)
                        if (a < s if sx else a <= s) and (b < t if sy else b <= t)
                    )
                    diff = Fraction(hits, len(x)) - _ecdf(x, s, sx) * _ecdf(y, t, sy)
                    best = max(best, abs(diff))
    return best


def _brute_bk(x, y, k, q1, q2):
    n = len(x)
    cap = n / (n + 1)
    total = 0.0
    for xi in x:
        for yl in y:
            diff = _joint_ecdf(x, y, xi, yl) - _ecdf(x, xi) * _ecdf(y, yl)
            w1 = float(q1(np.array(min(float(_ecdf(x, xi)), cap))))
            w2 = float(q2(np.array(min(float(_ecdf(y, yl)), cap))))
            total += float(diff) ** k * w1 * w2
    return total / (n * n)


def _brute_mn(x, y):
    best = Fraction(0)
    for s in x:
        for strict in (False, True):
            inner = sum(
                _joint_ecdf(x, y, s, yi, strict_x=strict) - _ecdf(x, s, strict) * _ecdf(y, yi) for yi in y
            ) / len(x)
            best = max(best, abs(inner))
    return best


def _brute_ranks(values):
    return [sum(1 for w in values if w < v) + (sum(1 for w in values if w == v) + 1) / 2 for v in values]


def _brute_tau(x, y):
    n = len(x)
    total = 0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += np.sign(x[i] - x[j]) * np.sign(y[i] - y[j])
    return total / (n * (n - 1))


def _random_small_samples(count, seed=7):
    rng = np.random.default_rng(seed)
    for trial in range(count):
        n = int(rng.integers(2, 9))
        x = rng.random(n)
        y = rng.random(n)
        if trial % 3 == 0:
            # coarse values force ties
            x = np.round(x, 1)
            y = np.round(y, 1)
        yield x, y


# -------------------------------------------------------------------- V_n, L_n


def test_vn_two_point_diagonal_is_one():
    counts = build_counts(PairedSample([0.1, 0.9], [0.1, 0.9]), HALF)
    assert v_n_exact(counts) == 1
    assert v_n(counts) == 1.0


def test_vn_single_cell_is_zero():
    counts = build_counts(PairedSample([0.1, 0.2, 0.3], [0.4, 0.1, 0.2]), HALF)
    assert v_n_exact(counts) == 0


def test_vn_three_points_is_eight_ninths():
    counts = build_counts(PairedSample([0.1, 0.1, 0.6], [0.1, 0.1, 0.6]), HALF)
    assert v_n_exact(counts) == Fraction(8, 9)


def test_vn_single_pair_is_zero():
    assert v_n(build_counts(PairedSample([0.3], [0.8]), HALF)) == 0.0


def test_vn_range_and_product_structure():
    rng = np.random.default_rng(3)
    for _ in range(50):
        sample = PairedSample(rng.normal(size=(30, 2)), rng.normal(size=(30, 1)))
        value = v_n(build_counts(sample, CubicPartition.from_sample(sample)))
        assert 0.0 <= value <= 2.0


def test_ln_on_occupied_cells_equals_vn():
    rng = np.random.default_rng(4)
    sample = PairedSample(rng.random(40), rng.random(40))
    counts = build_counts(sample, QUARTER)
    assert l_n(counts, counts.marginal_x, counts.marginal_y) == pytest.approx(v_n(counts), abs=1e-15)


def test_ln_on_fewer_cells_is_at_most_vn():
    rng = np.random.default_rng(4)
    sample = PairedSample(rng.random(40), rng.random(40))
    counts = build_counts(sample, QUARTER)
    fewer_x = list(counts.marginal_x)[:-1]
    assert l_n(counts, fewer_x, counts.marginal_y) <= v_n(counts) + 1e-15


def test_ln_with_cells_outside_support_adds_nothing():
    counts = build_counts(PairedSample([0.1, 0.9], [0.1, 0.9]), HALF)
    value = l_n(counts, [(0,), (1,), (7,)], [(0,), (1,), (-3,)])
    assert value == 1.0


def test_ln_requires_nonempty_sets():
    counts = build_counts(PairedSample([0.1, 0.9], [0.1, 0.9]), HALF)
    with pytest.raises(InvalidParameterError):
        l_n(counts, [], [(0,)])


def test_histogram_density_at_a_point():
    counts = build_counts(PairedSample([0.1, 0.2, 0.9], [0.1, 0.3, 0.6]), HALF)
    f, f1, f2 = histogram_density(counts, HALF, [0.05], [0.05])
    assert f == pytest.approx(2 / (3 * 0.25))
    assert f1 == pytest.approx(2 / (3 * 0.5))
    assert f2 == pytest.approx(2 / (3 * 0.5))
    f, _, _ = histogram_density(counts, HALF, [0.9], [0.1])
    assert f == 0.0


def test_vn_matches_brute_force():
    for x, y in _random_small_samples(300, seed=21):
        counts = build_counts(PairedSample(x, y), QUARTER)
        assert v_n_exact(counts) == _brute_vn(x, y, 0.25)


# ------------------------------------------------------------ CDF statistics


def test_gamma_anti_diagonal_and_comonotone():
    assert gamma_n(PairedSample([0.25, 0.75], [0.75, 0.25])) == pytest.approx(0.25)
    grid = [0.25, 0.5, 0.75, 1.0]
    assert gamma_n(PairedSample(grid, grid)) == pytest.approx(0.25)


def test_gamma_single_pair_is_zero():
    assert gamma_n(PairedSample([0.4], [0.2])) == 0.0


def test_cdf_statistics_reject_multivariate():
    sample = PairedSample(np.zeros((5, 2)), np.zeros(5))
    for func in (gamma_n, b_k_n, m_n, t_n, kendall_tau):
        with pytest.raises(UnsupportedStatisticError):
            func(sample)


def test_bk_rejects_bad_exponent():
    with pytest.raises(InvalidParameterError):
        b_k_n(PairedSample([0.1, 0.2], [0.3, 0.4]), k=0)


def test_bk_single_pair_is_zero():
    assert b_k_n(PairedSample([0.4], [0.2]), k=2) == 0.0


def test_oracle_equivalence_small_samples():
    sine = WeightFunction("sine")
    one = WeightFunction("one")
    for x, y in _random_small_samples(1000):
        sample = PairedSample(x, y)
        assert gamma_n(sample) == pytest.approx(float(_brute_gamma(x, y)), abs=1e-12)
        assert m_n(sample) == pytest.approx(float(_brute_mn(x, y)), abs=1e-12)
        for k in (1, 2):
            assert b_k_n(sample, k, one, one) == pytest.approx(_brute_bk(x, y, k, one, one), abs=1e-12)
            assert b_k_n(sample, k, sine, sine) == pytest.approx(_brute_bk(x, y, k, sine, sine), abs=1e-12)
        assert kendall_tau(sample) == pytest.approx(_brute_tau(x, y), abs=1e-12)
        np.testing.assert_allclose(ranks(x), _brute_ranks(list(x)))


# ------------------------------------------------------------------ rank tests


def test_ranks_with_ties():
    np.testing.assert_array_equal(ranks([3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0])


def test_tn_concordant_three_points():
    sample = PairedSample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert t_n(sample) == pytest.approx(14 / 48)


def test_tn_van_der_waerden_is_antisymmetric():
    sample = PairedSample([1.0, 2.0, 3.0], [3.0, 2.0, 1.0])
    a = ScoreFunction("van_der_waerden")
    assert t_n(sample, a, a) < 0
    assert t_n(PairedSample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), a, a) == pytest.approx(-t_n(sample, a, a))


def test_score_table_outside_knots_is_rejected():
    score = ScoreFunction("table", knots=(0.3, 0.7), values=(0.0, 1.0))
    with pytest.raises(InvalidParameterError):
        t_n(PairedSample([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0]), score, score)


def test_tn_sign_scores():
    sign = ScoreFunction("sign")
    concordant = PairedSample([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
    antitone = PairedSample([1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0])
    assert t_n(concordant, sign, sign) == pytest.approx(1.0)
    assert t_n(antitone, sign, sign) == pytest.approx(-1.0)
    # odd n puts the middle rank at u = 1/2, which scores zero
    assert t_n(PairedSample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), sign, sign) == pytest.approx(2 / 3)


def test_tn_with_zero_score_is_zero():
    zero = ScoreFunction("table", knots=(0.0, 1.0), values=(0.0, 0.0))
    sample = PairedSample([1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 5.0, 1.0, 4.0, 3.0])
    assert t_n(sample, zero, ScoreFunction()) == 0.0
    assert t_n(sample, zero, ScoreFunction("van_der_waerden")) == 0.0


def test_tau_monotone_pairs():
    x = np.arange(10.0)
    assert kendall_tau(PairedSample(x, x)) == 1.0
    assert kendall_tau(PairedSample(x, -x)) == -1.0


def test_tau_needs_two_pairs():
    with pytest.raises(RejectedInputError):
        kendall_tau(PairedSample([1.0], [2.0]))


def test_tau_fast_matches_reference():
    rng = np.random.default_rng(17)
    sample = PairedSample(rng.normal(size=100), rng.normal(size=100))
    assert kendall_tau(sample) == kendall_tau_reference(sample)
    tied = PairedSample(rng.integers(0, 5, size=200), rng.integers(0, 5, size=200))
    assert kendall_tau(tied) == kendall_tau_reference(tied)


def test_tau_sign_symmetry():
    rng = np.random.default_rng(2)
    x, y = rng.random(60), rng.random(60)
    assert kendall_tau(PairedSample(x, -y)) == -kendall_tau(PairedSample(x, y))


# ------------------------------------------------------------------ invariances


@pytest.mark.parametrize("statistic_id", list(STATISTICS))
def test_pair_permutation_invariance(statistic_id):
    rng = np.random.default_rng(8)
    x, y = rng.random(40), rng.random(40)
    order = rng.permutation(40)
    base = evaluate(statistic_id, PairedSample(x, y), QUARTER)
    shuffled = evaluate(statistic_id, PairedSample(x[order], y[order]), QUARTER)
    assert shuffled == pytest.approx(base, abs=1e-12)


@pytest.mark.parametrize("statistic_id", ["gamma", "b1_one", "b2_one", "b1_sine", "b2_sine", "mn", "tn", "tn_vdw", "tau"])
def test_monotone_transform_invariance(statistic_id):
    rng = np.random.default_rng(12)
    x, y = rng.random(40), rng.random(40)
    base = evaluate(statistic_id, PairedSample(x, y))
    transformed = evaluate(statistic_id, PairedSample(np.exp(3 * x), y**3 + 2))
    assert transformed == pytest.approx(base, abs=1e-12)


# ------------------------------------------------------------------ registry


def test_resolve_all_univariate_lists_every_statistic():
    assert resolve_ids(["all"], 1, 1) == list(STATISTICS)


def test_resolve_all_multivariate_keeps_histogram_statistics():
    assert resolve_ids(["all"], 2, 1) == ["vn", "ln"]


def test_resolve_rejects_unknown_and_unsupported():
    with pytest.raises(UnsupportedStatisticError):
        resolve_ids(["nope"], 1, 1)
    with pytest.raises(UnsupportedStatisticError):
        resolve_ids(["tau"], 2, 2)


def test_evaluate_uses_default_partition():
    rng = np.random.default_rng(1)
    sample = PairedSample(rng.random(50), rng.random(50))
    expected = v_n(build_counts(sample, CubicPartition.from_sample(sample)))
    assert evaluate("vn", sample) == expected
