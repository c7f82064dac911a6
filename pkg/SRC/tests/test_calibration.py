import numpy as np
import pytest
from scipy.stats import kstest

from SRC.exception import InvalidParameterError
from SRC.pipeline.calibration import (
    NullTable,
    mc_null_table,
    permutation_pvalue,
    pvalue_from_table,
    table_grid_cells,
    table_test,
)
from SRC.pipeline.partition import CubicPartition, PairedSample
from SRC.pipeline.statistics import STATISTICS
from SRC.pipeline.synthgen import AlternativeSpec, GeneratorSpec, sample


@pytest.fixture
def uniform_sample():
    rng = np.random.default_rng(10)
    return PairedSample(rng.random(40), rng.random(40))


def _table(draws, statistic_id="tau", n=10):
    return NullTable(statistic_id=statistic_id, n=n, draws=draws, generator_id="test", seed=0)


# ------------------------------------------------------------------ permutation


def test_constant_statistic_gives_p_one():
    rng = np.random.default_rng(0)
    # every X in one cell, so V_n is zero for every permutation
    sample_ = PairedSample(rng.uniform(0.0, 0.5, 30), rng.random(30))
    report = permutation_pvalue(sample_, "vn", B=99, seed=1, partition=CubicPartition(1, 1, 1.0, 0.25))
    assert report.observed == 0.0
    assert report.p_value == 1.0
    assert not report.censored


def test_extreme_observed_value_hits_the_floor():
    x = np.arange(50.0)
    report = permutation_pvalue(PairedSample(x, x), "tau", B=99, seed=4)
    assert report.observed == 1.0
    assert report.p_value == pytest.approx(1 / 100)
    assert report.censored


def test_permutation_requires_enough_permutations(uniform_sample):
    with pytest.raises(InvalidParameterError):
        permutation_pvalue(uniform_sample, "vn", B=50)


def test_permutation_is_deterministic(uniform_sample):
    first = permutation_pvalue(uniform_sample, "b2_one", B=99, seed=12)
    second = permutation_pvalue(uniform_sample, "b2_one", B=99, seed=12)
    assert first == second
    assert first.method == "permutation"
    assert first.replicates == 99


def test_permutation_independent_of_thread_count(uniform_sample):
    one = permutation_pvalue(uniform_sample, "vn", B=199, seed=5, threads=1)
    two = permutation_pvalue(uniform_sample, "vn", B=199, seed=5, threads=2)
    assert one == two


def test_permutation_freezes_default_partition(uniform_sample):
    report = permutation_pvalue(uniform_sample, "vn", B=99, seed=2)
    expected = CubicPartition.from_sample(uniform_sample).metadata()
    assert report.partition == expected


# ------------------------------------------------------------------ null tables


def test_null_table_sorted_and_sized():
    table = mc_null_table("tau", 10, N=100, seed=3)
    assert table.N == 100
    assert np.all(np.diff(table.draws) >= 0)
    assert table.floor == pytest.approx(1 / 101)


def test_null_table_is_deterministic():
    a = mc_null_table("vn", 20, N=100, seed=3)
    b = mc_null_table("vn", 20, N=100, seed=3)
    np.testing.assert_array_equal(a.draws, b.draws)
    assert a.generator_id == b.generator_id
    assert table_grid_cells(a) == 4


def test_null_table_rejects_dependent_generator():
    spec = GeneratorSpec(AlternativeSpec("fgm", 0.5))
    with pytest.raises(InvalidParameterError):
        mc_null_table("vn", 20, N=100, generator_spec=spec)


def test_null_table_needs_enough_draws():
    with pytest.raises(InvalidParameterError):
        mc_null_table("vn", 20, N=50)
    with pytest.raises(InvalidParameterError):
        _table(np.zeros(10))


def test_null_table_sorts_unsorted_draws():
    table = _table(np.arange(100.0)[::-1])
    assert table.draws[0] == 0.0 and table.draws[-1] == 99.0


def test_tau_null_table_mean_is_zero():
    table = mc_null_table("tau", 10, N=10_000, seed=8)
    se = table.draws.std(ddof=1) / np.sqrt(table.N)
    assert abs(table.draws.mean()) < 3 * se


def test_pvalue_from_table_examples():
    table = _table(np.arange(101.0))
    assert pvalue_from_table(-1.0, table) == 1.0
    assert pvalue_from_table(1000.0, table) == pytest.approx(1 / 102)
    assert pvalue_from_table(50.0, table) == pytest.approx(52 / 102)


def test_pvalue_from_table_is_nonincreasing():
    rng = np.random.default_rng(6)
    table = _table(rng.normal(size=500))
    grid = np.linspace(-4, 4, 200)
    values = [pvalue_from_table(v, table) for v in grid]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_table_test_checks_sample_size(uniform_sample):
    table = mc_null_table("tau", 10, N=100, seed=1)
    with pytest.raises(InvalidParameterError):
        table_test(uniform_sample, table)


def test_table_test_uses_the_table_grid():
    table = mc_null_table("vn", 40, N=100, seed=1, grid_cells=3)
    s = sample(GeneratorSpec(), 40, 99)
    report = table_test(s, table)
    assert report.method == "null_table"
    assert report.partition["width_x"] == pytest.approx(1 / 3)
    assert report.p_value >= table.floor


# ------------------------------------------------------------ calibration runs


@pytest.mark.slow
def test_pvalues_uniform_under_independence():
    runs, B = 1000, 199
    pvalues = {sid: [] for sid in STATISTICS}
    spec = GeneratorSpec()
    for r in range(runs):
        s = sample(spec, 50, 2024, r)
        for sid in STATISTICS:
            pvalues[sid].append(permutation_pvalue(s, sid, B=B, seed=r).p_value)
    for sid, ps in pvalues.items():
        ps = np.array(ps)
        assert kstest(ps, "uniform").statistic < 0.08, sid
        assert 0.03 <= np.mean(ps <= 0.05) <= 0.07, sid


@pytest.mark.slow
def test_power_under_gaussian_copula():
    runs, B = 500, 199
    spec = GeneratorSpec(AlternativeSpec("gaussian_copula", 0.5))
    for sid in STATISTICS:
        rejections = [
            permutation_pvalue(sample(spec, 100, 31, r), sid, B=B, seed=r).p_value <= 0.05 for r in range(runs)
        ]
        assert np.mean(rejections) > 0.3, sid


@pytest.mark.slow
def test_strong_dependence_reaches_the_floor():
    spec = GeneratorSpec(AlternativeSpec("gaussian_copula", 0.8))
    floors = sum(
        permutation_pvalue(sample(spec, 200, 55, r), "vn", B=999, seed=r).p_value == pytest.approx(1 / 1000)
        for r in range(100)
    )
    assert floors >= 95
