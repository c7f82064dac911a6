import numpy as np
import pytest

from SRC.exception import InvalidParameterError, RejectedInputError
from SRC.pipeline.partition import (
    CubicPartition,
    PairedSample,
    bin_point,
    bin_points,
    build_counts,
    default_width,
)
from SRC.pipeline.statistics import v_n_exact

DIAGONAL = PairedSample([0.1, 0.9], [0.1, 0.9])


@pytest.fixture
def half_grid():
    return CubicPartition(1, 1, 0.5, 0.5)


@pytest.mark.parametrize("p, expected", [(0.1, (0,)), (0.6, (1,)), (-0.1, (-1,))])
def test_bin_point_half_open_cells(p, expected):
    assert bin_point(p, 0.0, 0.5) == expected


def test_bin_point_rejects_non_finite():
    with pytest.raises(RejectedInputError):
        bin_point([np.nan], [0.0], 0.5)
    with pytest.raises(RejectedInputError):
        bin_point([np.inf], [0.0], 0.5)


def test_partition_rejects_bad_widths():
    with pytest.raises(InvalidParameterError):
        CubicPartition(1, 1, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        CubicPartition(1, 1, 1.0, -2.0)


def test_partition_totality_random_points():
    rng = np.random.default_rng(11)
    points = rng.uniform(-5, 5, size=(10_000, 2))
    origin = np.array([0.3, -1.7])
    width = 0.37
    lattice = bin_points(points, origin, width)
    lower = origin + lattice * width
    upper = lower + width
    assert np.all(lower <= points)
    assert np.all(points < upper)


def test_cell_bounds_contain_their_points():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(500, 2))
    y = rng.uniform(-3, 3, size=500)
    part = CubicPartition(2, 1, 0.41, 0.29, origin_x=(0.13, -0.6), origin_y=(0.05,))
    sample = PairedSample(x, y)
    for xi, yi in zip(sample.x, sample.y):
        jx = bin_point(xi, part.origin_x, part.width_x)
        jy = bin_point(yi, part.origin_y, part.width_y)
        lower_x, upper_x = part.cell_bounds_x(jx)
        lower_y, upper_y = part.cell_bounds_y(jy)
        assert np.all(lower_x <= xi) and np.all(xi < upper_x)
        assert np.all(lower_y <= yi) and np.all(yi < upper_y)
    counts = build_counts(sample, part)
    assert sum(counts.joint.values()) == 500
    for jx, jy in counts.joint:
        assert jx in counts.marginal_x and jy in counts.marginal_y
        assert part.cell_bounds_x(jx)[0].shape == (2,)
        assert part.cell_bounds_y(jy)[0].shape == (1,)


def test_build_counts_two_point_diagonal(half_grid):
    counts = build_counts(DIAGONAL, half_grid)
    assert counts.joint == {((0,), (0,)): 1, ((1,), (1,)): 1}
    assert counts.marginal_x == {(0,): 1, (1,): 1}
    assert counts.marginal_y == {(0,): 1, (1,): 1}


def test_build_counts_single_pair(half_grid):
    counts = build_counts(PairedSample([0.2], [0.7]), half_grid)
    assert counts.n == 1
    assert counts.joint == {((0,), (1,)): 1}
    assert counts.marginal_x == {(0,): 1}
    assert counts.marginal_y == {(1,): 1}


def test_build_counts_marginalization_and_conservation():
    rng = np.random.default_rng(5)
    sample = PairedSample(rng.normal(size=(50, 2)), rng.normal(size=50))
    part = CubicPartition.from_sample(sample)
    counts = build_counts(sample, part)

    assert sum(counts.joint.values()) == 50
    assert sum(counts.marginal_x.values()) == 50
    assert sum(counts.marginal_y.values()) == 50

    recomputed_x, recomputed_y = {}, {}
    for (j, k), c in counts.joint.items():
        assert c > 0
        recomputed_x[j] = recomputed_x.get(j, 0) + c
        recomputed_y[k] = recomputed_y.get(k, 0) + c
    assert recomputed_x == counts.marginal_x
    assert recomputed_y == counts.marginal_y


def test_build_counts_dimension_mismatch(half_grid):
    sample = PairedSample(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(RejectedInputError):
        build_counts(sample, half_grid)


def test_shift_equivariance():
    rng = np.random.default_rng(9)
    x = rng.random((40, 1))
    y = rng.random((40, 1))
    part = CubicPartition(1, 1, 0.2, 0.3)
    shifted_part = CubicPartition(1, 1, 0.2, 0.3, origin_x=(0.8,), origin_y=(-1.5,))
    base = build_counts(PairedSample(x, y), part)
    moved = build_counts(PairedSample(x + 0.8, y - 1.5), shifted_part)

    assert sorted(base.joint.values()) == sorted(moved.joint.values())
    assert sorted(base.marginal_x.values()) == sorted(moved.marginal_x.values())
    assert v_n_exact(base) == v_n_exact(moved)


def test_default_width_constant_coordinate_falls_back():
    choice = default_width(np.full((10, 1), 3.0), 10, 2)
    assert choice.width == 1.0
    assert choice.degenerate


def test_default_width_formula_and_linearity():
    unit = np.array([[-1.0], [1.0]]) / np.sqrt(2.0)  # sample sd exactly 1
    one = default_width(unit, 100, 2)
    two = default_width(2.0 * unit, 100, 2)
    assert not one.degenerate
    assert one.width == pytest.approx(3.5 * 100 ** (-0.25), rel=1e-12)
    assert one.width == pytest.approx(1.1068, abs=1e-4)
    assert two.width == pytest.approx(2.0 * one.width, rel=1e-12)


def test_paired_sample_validation():
    with pytest.raises(RejectedInputError):
        PairedSample([1.0, 2.0], [1.0])
    with pytest.raises(RejectedInputError):
        PairedSample([1.0, np.nan], [1.0, 2.0])
    with pytest.raises(RejectedInputError):
        PairedSample(np.empty(0), np.empty(0))


def test_unit_grid_cells():
    part = CubicPartition.unit_grid(4)
    assert part.width_x == 0.25
    lower, upper = part.cell_bounds_x((3,))
    assert lower[0] == 0.75 and upper[0] == 1.0
