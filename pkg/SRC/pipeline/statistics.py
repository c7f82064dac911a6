"""
Independence statistics: the histogram L1 statistic V_n and its competitors.

V_n and L_n work on sparse cell counts of any dimension. The CDF- and
rank-based statistics (Gamma_n, B^k_{n,q1,q2}, M_n, T_n, tau_n) are defined
for univariate X and Y only.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm, rankdata

from SRC.exception import InvalidParameterError, RejectedInputError, UnsupportedStatisticError
from SRC.pipeline.partition import CellCounts, CellIndex, CubicPartition, PairedSample, bin_point, build_counts

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- histogram L1


def _vn_numerator(counts: CellCounts) -> int:
    # n^2 * V_n = sum over all (j, k) of |n*N_jk - a_j*b_k|; empty joint cells
    # contribute a_j*b_k and those sum to n^2 minus the occupied products
    if counts.n < 1 or not counts.joint:
        raise RejectedInputError("cannot compute V_n on empty counts")
    n = counts.n
    total = n * n
    for (j, k), c in counts.joint.items():
        product = counts.marginal_x[j] * counts.marginal_y[k]
        total += abs(n * c - product) - product
    return total


def v_n_exact(counts: CellCounts) -> Fraction:
    """V_n as an exact rational."""
    return Fraction(_vn_numerator(counts), counts.n * counts.n)


def v_n(counts: CellCounts) -> float:
    """
    L1 distance between the joint histogram and the product of the marginal histograms.

    The cell volumes cancel, so V_n = sum_{j,k} |N_jk/n - a_j*b_k/n^2| over occupied
    marginal cells, accumulated in integers and divided by n^2 once.

    Args:
        counts (CellCounts): Binned sample.

    Returns:
        float: V_n in [0, 2].
    """
    return _vn_numerator(counts) / (counts.n * counts.n)


def l_n(counts: CellCounts, finite_x_cells: Iterable[CellIndex], finite_y_cells: Iterable[CellIndex]) -> float:
    """
    Cell sum of |nu_n(A x B) - mu_{n,1}(A) mu_{n,2}(B)| over the given finite cell sets.

    Args:
        counts (CellCounts): Binned sample.
        finite_x_cells (iterable): Cells of P'_n.
        finite_y_cells (iterable): Cells of Q'_n.

    Returns:
        float: L_n; equals V_n when the sets cover every occupied marginal cell.
    """
    xs = list(dict.fromkeys(tuple(c) for c in finite_x_cells))
    ys = list(dict.fromkeys(tuple(c) for c in finite_y_cells))
    if not xs or not ys:
        raise InvalidParameterError("L_n needs nonempty finite cell sets")
    if counts.n < 1:
        raise RejectedInputError("cannot compute L_n on empty counts")
    n = counts.n
    total = 0
    for j in xs:
        a = counts.marginal_x.get(j, 0)
        for k in ys:
            total += abs(n * counts.joint.get((j, k), 0) - a * counts.marginal_y.get(k, 0))
    return total / (n * n)


def histogram_density(
    counts: CellCounts, part: CubicPartition, x: Sequence[float], y: Sequence[float]
) -> Tuple[float, float, float]:
    """Histogram estimates (f_n(x, y), f_{n,1}(x), f_{n,2}(y)) at one point."""
    jx = bin_point(x, part.origin_x, part.width_x)
    jy = bin_point(y, part.origin_y, part.width_y)
    if len(jx) != part.d or len(jy) != part.d_prime:
        raise RejectedInputError("evaluation point does not match the partition dimensions")
    n = counts.n
    f = counts.joint.get((jx, jy), 0) / (n * part.cell_volume_x * part.cell_volume_y)
    f1 = counts.marginal_x.get(jx, 0) / (n * part.cell_volume_x)
    f2 = counts.marginal_y.get(jy, 0) / (n * part.cell_volume_y)
    return f, f1, f2


# ------------------------------------------------------- weights and scores


@dataclass(frozen=True)
class WeightFunction:
    """Nonnegative weight q on (0, 1): constant one, sin(pi*u), or a user table."""

    kind: str = "one"
    knots: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("one", "sine", "table"):
            raise InvalidParameterError(f"unknown weight function kind '{self.kind}'")
        if self.kind == "table":
            _check_table(self.knots, self.values)
            if min(self.values) < 0:
                raise InvalidParameterError("weight table must be nonnegative")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "one":
            return np.ones_like(u)
        if self.kind == "sine":
            return np.sin(np.pi * u)
        return _interp_table(u, self.knots, self.values)


@dataclass(frozen=True)
class ScoreFunction:
    """Score a(u) of a linear rank statistic: wilcoxon u, sign(u - 1/2), van der Waerden, or a table."""

    kind: str = "wilcoxon"
    knots: Tuple[float, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("wilcoxon", "sign", "van_der_waerden", "table"):
            raise InvalidParameterError(f"unknown score function kind '{self.kind}'")
        if self.kind == "table":
            _check_table(self.knots, self.values)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "wilcoxon":
            scores = u.copy()
        elif self.kind == "sign":
            scores = np.sign(u - 0.5)
        elif self.kind == "van_der_waerden":
            scores = norm.ppf(u)
        else:
            scores = _interp_table(u, self.knots, self.values)
        if not np.isfinite(scores).all():
            raise InvalidParameterError(f"score function '{self.kind}' is undefined on the rank grid")
        return scores


def _check_table(knots, values):
    if len(knots) < 2 or len(knots) != len(values):
        raise InvalidParameterError("table needs at least two knots and one value per knot")
    if any(b <= a for a, b in zip(knots, knots[1:])):
        raise InvalidParameterError("table knots must be strictly increasing")


def _interp_table(u: np.ndarray, knots, values) -> np.ndarray:
    if np.any(u < knots[0]) or np.any(u > knots[-1]):
        raise InvalidParameterError(f"table defined on [{knots[0]}, {knots[-1]}] only")
    return np.interp(u, knots, values)


# ------------------------------------------------------- empirical CDF lattice


def _require_univariate(sample: PairedSample, name: str):
    if not sample.is_univariate():
        raise UnsupportedStatisticError(
            f"{name} is defined for univariate X and Y only, got d={sample.d}, d'={sample.d_prime}"
        )


@dataclass(frozen=True)
class _CdfLattice:
    """n*F_n, n*F_{n,1}, n*F_{n,2} on the grid of distinct data values, with multiplicities."""

    n: int
    joint: np.ndarray  # (ux, uy) counts #{X <= ux[a], Y <= uy[b]}
    cum_x: np.ndarray
    cum_y: np.ndarray
    mult_x: np.ndarray
    mult_y: np.ndarray

    def discrepancy(self) -> np.ndarray:
        """n^2 * (F_n - F_{n,1} F_{n,2}) as exact integers."""
        return self.n * self.joint - np.outer(self.cum_x, self.cum_y)


def _cdf_lattice(sample: PairedSample) -> _CdfLattice:
    x = sample.x[:, 0]
    y = sample.y[:, 0]
    _, ix = np.unique(x, return_inverse=True)
    _, iy = np.unique(y, return_inverse=True)
    ix = ix.ravel()
    iy = iy.ravel()
    mult_x = np.bincount(ix).astype(np.int64)
    mult_y = np.bincount(iy).astype(np.int64)
    cells = np.zeros((mult_x.size, mult_y.size), dtype=np.int64)
    np.add.at(cells, (ix, iy), 1)
    return _CdfLattice(
        n=sample.n,
        joint=cells.cumsum(axis=0).cumsum(axis=1),
        cum_x=mult_x.cumsum(),
        cum_y=mult_y.cumsum(),
        mult_x=mult_x,
        mult_y=mult_y,
    )


def gamma_n(sample: PairedSample) -> float:
    """
    Kolmogorov-type statistic sup |F_n(x, y) - F_{n,1}(x) F_{n,2}(y)|.

    Left limits at a data value equal the step value at the previous distinct
    value (or zero below the minimum), so the corner lattice of distinct values
    already carries every attainable discrepancy.
    """
    _require_univariate(sample, "Gamma_n")
    lattice = _cdf_lattice(sample)
    return float(np.abs(lattice.discrepancy()).max()) / (lattice.n * lattice.n)


def b_k_n(sample: PairedSample, k: int = 2, q1: WeightFunction = WeightFunction(), q2: WeightFunction = WeightFunction()) -> float:
    """
    Weighted Cramer-von Mises type statistic B^k_{n,q1,q2}.

    The double integral against dF_{n,1} dF_{n,2} is the average over all n^2
    pairs (X_i, Y_l); weights are evaluated at F clipped to n/(n+1).

    Args:
        sample (PairedSample): Univariate pairs.
        k (int): Positive exponent of the discrepancy.
        q1 (WeightFunction): Weight on F_{n,1}.
        q2 (WeightFunction): Weight on F_{n,2}.

    Returns:
        float: The statistic.
    """
    _require_univariate(sample, "B^k_n")
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"exponent k must be a positive integer, got {k}")
    lattice = _cdf_lattice(sample)
    n = lattice.n
    cap = n / (n + 1)
    wx = lattice.mult_x * q1(np.minimum(lattice.cum_x / n, cap))
    wy = lattice.mult_y * q2(np.minimum(lattice.cum_y / n, cap))
    terms = (lattice.discrepancy() / (n * n)) ** int(k)
    return float(wx @ terms @ wy) / (n * n)


def m_n(sample: PairedSample) -> float:
    """Durbin-type statistic sup_x |integral of (F_n(x, y) - F_{n,1}(x) F_{n,2}(y)) dF_{n,2}(y)|."""
    _require_univariate(sample, "M_n")
    lattice = _cdf_lattice(sample)
    n = lattice.n
    rows = lattice.discrepancy() @ lattice.mult_y
    return float(np.abs(rows).max()) / (n * n * n)


# ----------------------------------------------------------------- rank tests


def ranks(values: Sequence[float]) -> np.ndarray:
    """Ranks 1..n with midranks for ties."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise RejectedInputError("cannot rank an empty vector")
    return rankdata(values, method="average")


def t_n(sample: PairedSample, a1: ScoreFunction = ScoreFunction(), a2: ScoreFunction = ScoreFunction()) -> float:
    """Linear rank statistic n^-1 sum a1(R_i/(n+1)) a2(S_i/(n+1))."""
    _require_univariate(sample, "T_n")
    n = sample.n
    r = ranks(sample.x[:, 0]) / (n + 1)
    s = ranks(sample.y[:, 0]) / (n + 1)
    return float(np.mean(a1(r) * a2(s)))


def kendall_tau_reference(sample: PairedSample) -> float:
    """Kendall's tau straight from the pairwise definition, O(n^2)."""
    _require_univariate(sample, "tau_n")
    n = sample.n
    if n < 2:
        raise RejectedInputError("Kendall's tau needs n >= 2")
    r = ranks(sample.x[:, 0])
    s = ranks(sample.y[:, 0])
    signed = np.sign(r[:, None] - r[None, :]) * np.sign(s[:, None] - s[None, :])
    return int(signed.sum()) / (n * (n - 1))


def _count_inversions(seq: List[float]) -> int:
    # bottom-up merge sort counting pairs i < j with seq[i] > seq[j]
    seq = list(seq)
    size = len(seq)
    buf = list(seq)
    inversions = 0
    width = 1
    while width < size:
        for lo in range(0, size, 2 * width):
            mid = min(lo + width, size)
            hi = min(lo + 2 * width, size)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if seq[j] < seq[i]:
                    buf[k] = seq[j]
                    inversions += mid - i
                    j += 1
                else:
                    buf[k] = seq[i]
                    i += 1
                k += 1
            buf[k : k + mid - i] = seq[i:mid]
            k += mid - i
            buf[k : k + hi - j] = seq[j:hi]
        seq, buf = buf, seq
        width *= 2
    return inversions


def _tied_pairs(*columns: np.ndarray) -> int:
    stacked = np.column_stack(columns)
    _, counts = np.unique(stacked, axis=0, return_counts=True)
    return int(sum(int(c) * (int(c) - 1) // 2 for c in counts))


def kendall_tau(sample: PairedSample) -> float:
    """
    Kendall's tau, (1/(n(n-1))) sum_{i != j} sign(R_i - R_j) sign(S_i - S_j), in O(n log n).

    Concordant minus discordant pairs come from a merge-sort inversion count
    (Knight's method); tied pairs contribute zero, no tau-b correction.
    """
    _require_univariate(sample, "tau_n")
    n = sample.n
    if n < 2:
        raise RejectedInputError("Kendall's tau needs n >= 2")
    x = sample.x[:, 0]
    y = sample.y[:, 0]
    order = np.lexsort((y, x))
    discordant = _count_inversions(y[order].tolist())
    untied = n * (n - 1) // 2 - _tied_pairs(x) - _tied_pairs(y) + _tied_pairs(x, y)
    return 2 * (untied - 2 * discordant) / (n * (n - 1))


# ------------------------------------------------------------------ registry


@dataclass(frozen=True)
class StatisticDefinition:
    id: str
    description: str
    func: Callable[[PairedSample, Optional[CubicPartition]], float]
    needs_partition: bool = False
    univariate_only: bool = True


def _stat_vn(sample, part):
    return v_n(build_counts(sample, part))


def _stat_ln(sample, part):
    counts = build_counts(sample, part)
    return l_n(counts, counts.marginal_x, counts.marginal_y)


def _stat_gamma(sample, part):
    return gamma_n(sample)


def _stat_b1_one(sample, part):
    return b_k_n(sample, 1, WeightFunction("one"), WeightFunction("one"))


def _stat_b2_one(sample, part):
    return b_k_n(sample, 2, WeightFunction("one"), WeightFunction("one"))


def _stat_b1_sine(sample, part):
    return b_k_n(sample, 1, WeightFunction("sine"), WeightFunction("sine"))


def _stat_b2_sine(sample, part):
    return b_k_n(sample, 2, WeightFunction("sine"), WeightFunction("sine"))


def _stat_mn(sample, part):
    return m_n(sample)


def _stat_tn(sample, part):
    return t_n(sample, ScoreFunction("wilcoxon"), ScoreFunction("wilcoxon"))


def _stat_tn_vdw(sample, part):
    return t_n(sample, ScoreFunction("van_der_waerden"), ScoreFunction("van_der_waerden"))


def _stat_tau(sample, part):
    return kendall_tau(sample)


STATISTICS: Dict[str, StatisticDefinition] = {
    s.id: s
    for s in [
        StatisticDefinition("vn", "histogram L1 statistic V_n", _stat_vn, needs_partition=True, univariate_only=False),
        StatisticDefinition("ln", "L_n on the occupied cells", _stat_ln, needs_partition=True, univariate_only=False),
        StatisticDefinition("gamma", "Kolmogorov-type Gamma_n", _stat_gamma),
        StatisticDefinition("b1_one", "B^1 with q1 = q2 = 1", _stat_b1_one),
        StatisticDefinition("b2_one", "B^2 with q1 = q2 = 1 (Hoeffding / Blum-Kiefer-Rosenblatt)", _stat_b2_one),
        StatisticDefinition("b1_sine", "B^1 with q = sin(pi u) (Koziol-Nemec)", _stat_b1_sine),
        StatisticDefinition("b2_sine", "B^2 with q = sin(pi u)", _stat_b2_sine),
        StatisticDefinition("mn", "Durbin-type M_n", _stat_mn),
        StatisticDefinition("tn", "linear rank statistic, Wilcoxon scores", _stat_tn),
        StatisticDefinition("tn_vdw", "linear rank statistic, van der Waerden scores", _stat_tn_vdw),
        StatisticDefinition("tau", "Kendall rank correlation tau_n", _stat_tau),
    ]
}


def get_statistic(statistic_id: str) -> StatisticDefinition:
    try:
        return STATISTICS[statistic_id]
    except KeyError:
        raise UnsupportedStatisticError(
            f"unknown statistic '{statistic_id}', choose from {', '.join(STATISTICS)}"
        ) from None


def check_supported(statistic_id: str, d: int, d_prime: int) -> StatisticDefinition:
    definition = get_statistic(statistic_id)
    if definition.univariate_only and (d != 1 or d_prime != 1):
        raise UnsupportedStatisticError(
            f"statistic '{statistic_id}' needs univariate X and Y, got d={d}, d'={d_prime}"
        )
    return definition


def resolve_ids(statistic_ids: Iterable[str], d: int, d_prime: int) -> List[str]:
    """Expand 'all' to every statistic defined for the dimensions and validate the rest."""
    resolved: List[str] = []
    for sid in statistic_ids:
        if sid == "all":
            resolved.extend(s.id for s in STATISTICS.values() if not s.univariate_only or (d == 1 and d_prime == 1))
        else:
            check_supported(sid, d, d_prime)
            resolved.append(sid)
    return list(dict.fromkeys(resolved))


def evaluate(statistic_id: str, sample: PairedSample, partition: Optional[CubicPartition] = None) -> float:
    """
    Evaluate a registered statistic.

    Args:
        statistic_id (str): Registry id.
        sample (PairedSample): The observations.
        partition (CubicPartition, optional): Cells for V_n / L_n; the default width
                                              rule is applied when omitted.

    Returns:
        float: Statistic value.
    """
    definition = check_supported(statistic_id, sample.d, sample.d_prime)
    if definition.needs_partition and partition is None:
        partition = CubicPartition.from_sample(sample)
    return definition.func(sample, partition)
