"""
Cubic partitions of R^d x R^d', sparse binning and the empirical cell measures.

Cells are half-open, [o + m*h, o + (m+1)*h) per coordinate, so every point
lands in exactly one cell. Only occupied cells are stored.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from SRC.exception import InvalidParameterError, RejectedInputError

logger = logging.getLogger(__name__)

CellIndex = Tuple[int, ...]


@dataclass(frozen=True)
class PairedSample:
    """n pairs (X_i, Y_i) with X_i in R^d and Y_i in R^d', stored as (n, d) and (n, d') arrays."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if x.ndim != 2 or y.ndim != 2:
            raise RejectedInputError("sample blocks must be vectors or (n, dim) matrices")
        if x.shape[0] != y.shape[0]:
            raise RejectedInputError(f"paired blocks differ in length: {x.shape[0]} vs {y.shape[0]}")
        if x.shape[0] == 0:
            raise RejectedInputError("no data rows")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise RejectedInputError("sample contains non-finite coordinates")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def d_prime(self) -> int:
        return self.y.shape[1]

    def with_y(self, y: np.ndarray) -> "PairedSample":
        """Same X block paired with a different Y block (used for permutations)."""
        return PairedSample(self.x, y)

    def is_univariate(self) -> bool:
        return self.d == 1 and self.d_prime == 1


class WidthChoice(NamedTuple):
    width: float
    degenerate: bool


@dataclass(frozen=True)
class CubicPartition:
    """The pair of cubic partitions P_n of R^d and Q_n of R^d'."""

    d: int
    d_prime: int
    width_x: float
    width_y: float
    origin_x: Tuple[float, ...] = field(default=())
    origin_y: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.d < 1 or self.d_prime < 1:
            raise InvalidParameterError(f"dimensions must be positive, got d={self.d}, d'={self.d_prime}")
        if not (np.isfinite(self.width_x) and self.width_x > 0 and np.isfinite(self.width_y) and self.width_y > 0):
            raise InvalidParameterError(f"cell widths must be positive, got {self.width_x}, {self.width_y}")
        origin_x = tuple(float(v) for v in self.origin_x) or (0.0,) * self.d
        origin_y = tuple(float(v) for v in self.origin_y) or (0.0,) * self.d_prime
        if len(origin_x) != self.d or len(origin_y) != self.d_prime:
            raise InvalidParameterError("origin length does not match the partition dimension")
        object.__setattr__(self, "width_x", float(self.width_x))
        object.__setattr__(self, "width_y", float(self.width_y))
        object.__setattr__(self, "origin_x", origin_x)
        object.__setattr__(self, "origin_y", origin_y)

    @classmethod
    def from_sample(
        cls,
        sample: PairedSample,
        width_x: Optional[float] = None,
        width_y: Optional[float] = None,
        origin_x: Sequence[float] = (),
        origin_y: Sequence[float] = (),
    ) -> "CubicPartition":
        """Partition with the default width rule for any width not given explicitly."""
        total_dim = sample.d + sample.d_prime
        if width_x is None:
            width_x = default_width(sample.x, sample.n, total_dim).width
        if width_y is None:
            width_y = default_width(sample.y, sample.n, total_dim).width
        return cls(sample.d, sample.d_prime, width_x, width_y, tuple(origin_x), tuple(origin_y))

    @classmethod
    def unit_grid(cls, cells_per_side: int, d: int = 1, d_prime: int = 1) -> "CubicPartition":
        """Data-independent partition of the unit cube into cells_per_side cells per axis."""
        if cells_per_side < 1:
            raise InvalidParameterError(f"cells_per_side must be positive, got {cells_per_side}")
        width = 1.0 / cells_per_side
        return cls(d, d_prime, width, width)

    @property
    def cell_volume_x(self) -> float:
        return self.width_x**self.d

    @property
    def cell_volume_y(self) -> float:
        return self.width_y**self.d_prime

    def cell_bounds_x(self, index: CellIndex) -> Tuple[np.ndarray, np.ndarray]:
        return _cell_bounds(index, self.origin_x, self.width_x)

    def cell_bounds_y(self, index: CellIndex) -> Tuple[np.ndarray, np.ndarray]:
        return _cell_bounds(index, self.origin_y, self.width_y)

    def metadata(self) -> Dict:
        return {
            "d": self.d,
            "d_prime": self.d_prime,
            "width_x": self.width_x,
            "width_y": self.width_y,
            "origin_x": list(self.origin_x),
            "origin_y": list(self.origin_y),
        }


@dataclass(frozen=True)
class CellCounts:
    """Sparse joint counts n*nu_n(A_j x B_k) and marginal counts n*mu_{n,1}(A_j), n*mu_{n,2}(B_k)."""

    n: int
    joint: Dict[Tuple[CellIndex, CellIndex], int]
    marginal_x: Dict[CellIndex, int]
    marginal_y: Dict[CellIndex, int]


def _cell_bounds(index: CellIndex, origin: Sequence[float], width: float) -> Tuple[np.ndarray, np.ndarray]:
    lower = np.asarray(origin, dtype=np.float64) + np.asarray(index, dtype=np.float64) * width
    return lower, lower + width


def bin_points(points: np.ndarray, origin: Sequence[float], width: float) -> np.ndarray:
    """
    Vectorised cell lookup: lattice[i, c] = floor((points[i, c] - origin[c]) / width).

    Args:
        points (np.ndarray): (n, m) coordinates.
        origin (sequence): Length-m origin.
        width (float): Cell edge length.

    Returns:
        np.ndarray: (n, m) int64 lattice indices.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if not np.isfinite(points).all():
        raise RejectedInputError("cannot bin non-finite coordinates")
    if not width > 0:
        raise InvalidParameterError(f"cell width must be positive, got {width}")
    origin = np.asarray(origin, dtype=np.float64)
    if origin.shape != (points.shape[1],):
        raise RejectedInputError(f"origin has {origin.size} coordinates, points have {points.shape[1]}")
    return np.floor((points - origin) / width).astype(np.int64)


def bin_point(p: Sequence[float], origin: Sequence[float], width: float) -> CellIndex:
    """Cell index of a single point."""
    p = np.atleast_1d(np.asarray(p, dtype=np.float64))
    origin = np.atleast_1d(np.asarray(origin, dtype=np.float64))
    return tuple(int(v) for v in bin_points(p.reshape(1, -1), origin, width)[0])


def _count_rows(lattice: np.ndarray) -> Counter:
    rows, counts = np.unique(lattice, axis=0, return_counts=True)
    return Counter({tuple(int(v) for v in row): int(c) for row, c in zip(rows, counts)})


def build_counts(sample: PairedSample, part: CubicPartition) -> CellCounts:
    """
    Bin a paired sample on a cubic partition.

    Args:
        sample (PairedSample): The observations.
        part (CubicPartition): Partitions P_n, Q_n.

    Returns:
        CellCounts: Occupied joint cells and both marginal count maps.
    """
    if sample.d != part.d or sample.d_prime != part.d_prime:
        raise RejectedInputError(
            f"sample dimensions ({sample.d}, {sample.d_prime}) do not match partition ({part.d}, {part.d_prime})"
        )
    lx = bin_points(sample.x, part.origin_x, part.width_x)
    ly = bin_points(sample.y, part.origin_y, part.width_y)
    joint = {
        (key[: part.d], key[part.d :]): count for key, count in _count_rows(np.hstack([lx, ly])).items()
    }
    return CellCounts(
        n=sample.n,
        joint=joint,
        marginal_x=dict(_count_rows(lx)),
        marginal_y=dict(_count_rows(ly)),
    )


def default_width(sample_coords: np.ndarray, n: int, total_dim: int) -> WidthChoice:
    """
    Scott-like width 3.5 * sigma * n^(-1/(2 + total_dim)).

    sigma is the average per-coordinate sample standard deviation of the block.
    A constant coordinate makes the rule meaningless; width 1 is returned and flagged.

    Args:
        sample_coords (np.ndarray): (n, m) block of coordinates (X or Y).
        n (int): Sample size.
        total_dim (int): Dimension of the histogram the width serves.

    Returns:
        WidthChoice: (width, degenerate flag).
    """
    coords = np.asarray(sample_coords, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords.reshape(-1, 1)
    if n < 2 or coords.shape[0] < 2:
        logger.warning("default_width needs n >= 2, falling back to width 1")
        return WidthChoice(1.0, True)
    sd = coords.std(axis=0, ddof=1)
    if np.any(sd == 0) or not np.isfinite(sd).all():
        logger.warning("constant coordinate in block, falling back to width 1")
        return WidthChoice(1.0, True)
    width = 3.5 * float(sd.mean()) * float(n) ** (-1.0 / (2 + total_dim))
    return WidthChoice(width, False)
