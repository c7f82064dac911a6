"""
Large-deviation and Bahadur-efficiency laboratory.

Under independence n^-1 log P(V_n > lambda) -> -g(lambda) with
g(lambda) = lambda^2/2 (1 + o(1)) as lambda -> 0. The lab estimates the tail
probabilities by plain Monte Carlo on a fixed data-independent partition,
fits the exponential rate, and turns p-values into Bahadur slope estimates
-(2/n) log p_n under the built-in alternatives.
"""

import logging
import math
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from scipy.stats import linregress

from SRC.exception import InvalidParameterError, MissingNullTableError, QuadratureError
from SRC.pipeline import synthgen
from SRC.pipeline.calibration import (
    NullTable,
    fixed_partition,
    pvalue_from_table,
    simulate_statistic,
    table_grid_cells,
)
from SRC.schemas import SMALL_LAMBDA_LABEL, EfficiencyRatio, LDCurve, SlopePoint, SlopeReport
from SRC.utils.config import DEFAULT_GRID_CELLS, DEFAULT_SEED, DEFAULT_THREADS, MIN_SLOPE_REPS, MIN_TAIL_DRAWS
from SRC.utils.rng import ORACLE_STREAM, SLOPE_STREAM, TAIL_STREAM

logger = logging.getLogger(__name__)

VALID_LAMBDA = 0.5
CENSOR_ALPHA = 0.05
MIN_FIT_POINTS = 3


# ------------------------------------------------------------ rate function


def theoretical_rate(lam: float) -> float:
    """Small-lambda expansion lambda^2/2 of the rate g; g(0) = 0 is the limit."""
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0:
        raise InvalidParameterError(f"lambda must be a nonnegative threshold, got {lam}")
    if lam > VALID_LAMBDA:
        logger.warning(f"lambda={lam} is outside the small-lambda regime (<= {VALID_LAMBDA})")
    return lam * lam / 2.0


class TailEstimate(NamedTuple):
    p_hat: float
    se: float
    censored: bool
    upper_bound: Optional[float]


def _tail_estimate(values: np.ndarray, lam: float) -> TailEstimate:
    N = values.size
    p_hat = float(np.count_nonzero(values > lam)) / N
    se = math.sqrt(p_hat * (1.0 - p_hat) / N)
    if p_hat == 0.0:
        return TailEstimate(0.0, 0.0, True, 1.0 - CENSOR_ALPHA ** (1.0 / N))
    return TailEstimate(p_hat, se, False, None)


def _null_spec(generator: Optional[synthgen.GeneratorSpec], d: int, d_prime: int) -> synthgen.GeneratorSpec:
    spec = generator or synthgen.GeneratorSpec(synthgen.AlternativeSpec("independent_uniform", 0.0, d, d_prime))
    if not spec.alternative.is_independent:
        raise InvalidParameterError(f"tail probabilities are taken under independence, got {spec.generator_id}")
    return synthgen.GeneratorSpec(spec.alternative, spec.marginal, TAIL_STREAM)


def _null_draws(statistic_id, n, N, spec, seed, grid_cells, threads, progress) -> np.ndarray:
    alt = spec.alternative
    partition = fixed_partition(statistic_id, alt.d, alt.d_prime, grid_cells)
    return simulate_statistic(statistic_id, spec, n, N, seed, partition, threads=threads, progress=progress)


def tail_prob(
    statistic_id: str,
    n: int,
    lam: float,
    N: int,
    generator: Optional[synthgen.GeneratorSpec] = None,
    seed: int = DEFAULT_SEED,
    grid_cells: int = DEFAULT_GRID_CELLS,
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> TailEstimate:
    """
    Monte Carlo estimate of P(T_n > lambda) under independence.

    Args:
        statistic_id (str): Registry id (V_n uses the fixed unit-cube grid).
        n (int): Sample size.
        lam (float): Threshold.
        N (int): Replicates, at least 1000.
        generator (GeneratorSpec, optional): Independent generator, uniforms by default.
        seed (int): Seed.
        grid_cells (int): Cells per side of the fixed partition.
        threads (int): Worker cap.
        progress (bool): Show progress.

    Returns:
        TailEstimate: p_hat and its binomial standard error; a zero count is
                      censored and carries the one-sided bound 1 - alpha^(1/N).
    """
    if N < MIN_TAIL_DRAWS:
        raise InvalidParameterError(f"tail estimation needs N >= {MIN_TAIL_DRAWS}, got {N}")
    spec = _null_spec(generator, 1, 1)
    values = _null_draws(statistic_id, n, N, spec, seed, grid_cells, threads, progress)
    estimate = _tail_estimate(values, float(lam))
    if estimate.censored:
        logger.warning(f"P({statistic_id} > {lam}) at n={n} censored, upper bound {estimate.upper_bound:.3g}")
    return estimate


def gretton_envelope(n: int, epsilons: Sequence[float], m: int, m_prime: int) -> float:
    """
    2^(m m') e^(-n e1^2/2) + 2^m e^(-n e2^2/2) + 2^m' e^(-n e3^2/2), summed in log space.

    Returns:
        float: The bound, inf when it overflows.
    """
    e1, e2, e3 = (float(e) for e in epsilons)
    if min(e1, e2, e3) <= 0:
        raise InvalidParameterError(f"envelope epsilons must be positive, got {epsilons}")
    log2 = math.log(2.0)
    log_terms = [
        m * m_prime * log2 - n * e1 * e1 / 2.0,
        m * log2 - n * e2 * e2 / 2.0,
        m_prime * log2 - n * e3 * e3 / 2.0,
    ]
    log_bound = float(logsumexp(log_terms))
    return math.exp(log_bound) if log_bound < 700 else math.inf


def rate_curve(
    statistic_id: str,
    lambda_grid: Sequence[float],
    n_grid: Sequence[int],
    N: int,
    seed: int = DEFAULT_SEED,
    generator: Optional[synthgen.GeneratorSpec] = None,
    grid_cells: int = DEFAULT_GRID_CELLS,
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> LDCurve:
    """
    Tail probabilities on a (n, lambda) grid and the fitted exponential rate per lambda.

    One set of N null replicates is simulated per n and thresholded at every
    lambda. fitted_rate(lambda) is the unweighted least-squares slope of
    -log p_hat against n over uncensored points; fewer than three such points
    leave lambda unusable.

    Returns:
        LDCurve: Estimates, rates, envelope values and fit summaries.
    """
    if N < MIN_TAIL_DRAWS:
        raise InvalidParameterError(f"tail estimation needs N >= {MIN_TAIL_DRAWS}, got {N}")
    lambdas = [float(v) for v in lambda_grid]
    ns = sorted(int(v) for v in n_grid)
    if not lambdas or not ns:
        raise InvalidParameterError("rate_curve needs nonempty lambda and n grids")
    if min(lambdas) <= 0:
        raise InvalidParameterError("lambda grid must be positive")
    spec = _null_spec(generator, 1, 1)
    alt = spec.alternative
    partition = fixed_partition(statistic_id, alt.d, alt.d_prime, grid_cells)
    m = grid_cells**alt.d
    m_prime = grid_cells**alt.d_prime

    estimates: List[List[TailEstimate]] = []
    envelope: List[List[float]] = []
    for n in ns:
        values = _null_draws(statistic_id, n, N, spec, seed, grid_cells, threads, progress)
        estimates.append([_tail_estimate(values, lam) for lam in lambdas])
        envelope.append([gretton_envelope(n, (lam / 3.0,) * 3, m, m_prime) for lam in lambdas])
        logger.info(f"rate_curve {statistic_id}: n={n} done")

    rates = [[None if e.censored else -math.log(e.p_hat) / n for e in row] for n, row in zip(ns, estimates)]
    fitted, fitted_se, usable = [], [], []
    for col, lam in enumerate(lambdas):
        points = [(n, -math.log(row[col].p_hat)) for n, row in zip(ns, estimates) if not row[col].censored]
        if len(points) < MIN_FIT_POINTS:
            logger.warning(f"lambda={lam}: only {len(points)} uncensored points, unusable")
            fitted.append(None)
            fitted_se.append(None)
            usable.append(False)
            continue
        fit = linregress([p[0] for p in points], [p[1] for p in points])
        fitted.append(float(fit.slope))
        fitted_se.append(float(fit.stderr))
        usable.append(True)

    violations = sum(
        1
        for row, env_row in zip(estimates, envelope)
        for e, env in zip(row, env_row)
        if env < 1.0 and e.p_hat > env
    )
    return LDCurve(
        statistic_id=statistic_id,
        generator_id=spec.generator_id,
        partition=partition.metadata() if partition is not None else None,
        replicates=int(N),
        seed=int(seed),
        lambda_grid=lambdas,
        n_grid=ns,
        tail_probs=[[e.p_hat for e in row] for row in estimates],
        standard_errors=[[e.se for e in row] for row in estimates],
        censored=[[e.censored for e in row] for row in estimates],
        upper_bounds=[[e.upper_bound for e in row] for row in estimates],
        rates=rates,
        fitted_rate=fitted,
        fitted_rate_se=fitted_se,
        usable=usable,
        g_theory=[lam * lam / 2.0 for lam in lambdas],
        envelope=envelope,
        envelope_violations=violations,
    )


def plot_rows(curve: LDCurve) -> List[Dict]:
    """Long-format rows: lambda, n, p_hat, se, g_hat, g_theory."""
    rows = []
    for i, n in enumerate(curve.n_grid):
        for j, lam in enumerate(curve.lambda_grid):
            rows.append(
                {
                    "lambda": lam,
                    "n": n,
                    "p_hat": curve.tail_probs[i][j],
                    "se": curve.standard_errors[i][j],
                    "g_hat": curve.rates[i][j],
                    "g_theory": curve.g_theory[j],
                }
            )
    return rows


# ----------------------------------------------------------------- divergence

Box = Tuple[float, float, float, float]


def _quadrature_problem(alt: synthgen.AlternativeSpec) -> Tuple[Box, Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    # the L1 divergence is invariant under marginal transforms, so each family
    # is integrated on the scale where its integrand is smooth and bounded
    if alt.family == "gaussian_copula":
        spec = synthgen.GeneratorSpec(alt, marginal="normal")
        box = (-8.0, 8.0, -8.0, 8.0)
    elif alt.family == "functional":
        if alt.theta == 0:
            raise QuadratureError("functional(sigma=0) is singular, its divergence has no density form")
        spec = synthgen.GeneratorSpec(alt)
        box = (0.0, 1.0, -8.0 * alt.theta, 1.0 + 8.0 * alt.theta)
    else:
        spec = synthgen.GeneratorSpec(alt)
        box = (0.0, 1.0, 0.0, 1.0)

    def integrand(x, y):
        f, f1, f2 = synthgen.density(spec, x, y)
        return np.abs(f - f1 * f2)

    return box, integrand


def _midpoint(integrand, box: Box, m: int, block: int = 256) -> float:
    x_lo, x_hi, y_lo, y_hi = box
    hx = (x_hi - x_lo) / m
    hy = (y_hi - y_lo) / m
    xs = x_lo + (np.arange(m) + 0.5) * hx
    ys = y_lo + (np.arange(m) + 0.5) * hy
    total = 0.0
    for start in range(0, m, block):
        total += float(integrand(xs[start : start + block, None], ys[None, :]).sum())
    return total * hx * hy


def l1_divergence(alt: synthgen.AlternativeSpec, tol: float = 1e-4, start: int = 16, max_doublings: int = 12) -> float:
    """
    Population L1 divergence of the alternative from independence, integral of |f - f1 f2|.

    Midpoint rule on an m x m grid, m doubled until successive values differ by
    less than tol. Independent families return exactly 0.

    Args:
        alt (AlternativeSpec): Family and parameter.
        tol (float): Convergence tolerance.
        start (int): Initial grid size.
        max_doublings (int): Doublings before giving up.

    Returns:
        float: The divergence.
    """
    if alt.is_independent:
        return 0.0
    box, integrand = _quadrature_problem(alt)
    m = start
    previous = _midpoint(integrand, box, m)
    for _ in range(max_doublings):
        m *= 2
        current = _midpoint(integrand, box, m)
        if abs(current - previous) < tol:
            logger.info(f"l1_divergence {alt.label()} = {current:.6g} on a {m}x{m} grid")
            return current
        previous = current
    raise QuadratureError(f"l1_divergence for {alt.label()} did not converge after {max_doublings} doublings")


def l1_divergence_mc(
    alt: synthgen.AlternativeSpec, draws: int = 10**7, seed: int = DEFAULT_SEED, chunk: int = 10**6
) -> Tuple[float, float]:
    """
    Monte Carlo oracle E_f |1 - f1(X) f2(Y) / f(X, Y)| for the divergence.

    Returns:
        tuple: (estimate, standard error).
    """
    if alt.is_independent:
        return 0.0, 0.0
    spec = synthgen.GeneratorSpec(alt, stream_id=ORACLE_STREAM)
    total = 0.0
    total_sq = 0.0
    for index, begin in enumerate(range(0, draws, chunk)):
        size = min(chunk, draws - begin)
        pairs = synthgen.sample(spec, size, seed, index)
        f, f1, f2 = synthgen.density(spec, pairs.x[:, 0], pairs.y[:, 0])
        terms = np.abs(1.0 - f1 * f2 / f)
        total += float(terms.sum())
        total_sq += float((terms * terms).sum())
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0)
    return mean, math.sqrt(var / draws)


def vn_theoretical_slope(alt: synthgen.AlternativeSpec) -> float:
    """Exact slope 2 g(Delta) ~ Delta^2 of V_n under the small-lambda expansion."""
    delta = l1_divergence(alt)
    if delta > VALID_LAMBDA:
        logger.warning(f"divergence {delta:.4g} of {alt.label()} exceeds {VALID_LAMBDA}, slope is approximate")
    return delta * delta


# ------------------------------------------------------------------- slopes


def empirical_slope(
    statistic_id: str,
    alt: synthgen.AlternativeSpec,
    n_grid: Sequence[int],
    reps: int,
    null_tables: Mapping[int, NullTable],
    seed: int = DEFAULT_SEED,
    marginal: str = "uniform",
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> SlopeReport:
    """
    Bahadur slope estimates K_n = -(2/n) log p_n under an alternative.

    p_n comes from the null table of each n. The reported slope is the
    largest-n mean; the largest n whose censoring fraction is at most one
    half is reported separately.

    Args:
        statistic_id (str): Registry id.
        alt (AlternativeSpec): Alternative the samples come from.
        n_grid (sequence): Sample sizes.
        reps (int): Samples per n, at least 20.
        null_tables (mapping): n -> NullTable of the same statistic.
        seed (int): Seed.
        marginal (str): Marginal transform of the generated samples.
        threads (int): Worker cap.
        progress (bool): Show progress.

    Returns:
        SlopeReport: Per-n estimates, slope summary and (for V_n) the theoretical slope.
    """
    if reps < MIN_SLOPE_REPS:
        raise InvalidParameterError(f"empirical_slope needs reps >= {MIN_SLOPE_REPS}, got {reps}")
    ns = sorted(int(v) for v in n_grid)
    if not ns:
        raise InvalidParameterError("empirical_slope needs a nonempty n grid")
    missing = [n for n in ns if n not in null_tables]
    if missing:
        raise MissingNullTableError(f"no null table of '{statistic_id}' for n in {missing}")
    spec = synthgen.GeneratorSpec(alt, marginal, SLOPE_STREAM)

    points: List[SlopePoint] = []
    for n in ns:
        table = null_tables[n]
        if table.statistic_id != statistic_id or table.n != n:
            raise InvalidParameterError(
                f"null table for n={n} holds '{table.statistic_id}' at n={table.n}, expected '{statistic_id}'"
            )
        partition = fixed_partition(statistic_id, alt.d, alt.d_prime, table_grid_cells(table))
        values = simulate_statistic(statistic_id, spec, n, reps, seed, partition, threads=threads, progress=progress)
        p = np.array([pvalue_from_table(v, table) for v in values])
        k = -(2.0 / n) * np.log(p)
        points.append(
            SlopePoint(
                n=n,
                reps=int(reps),
                mean=float(k.mean()),
                se=float(k.std(ddof=1) / math.sqrt(reps)),
                censored_fraction=float(np.mean(p <= table.floor)),
                statistic_mean=float(values.mean()),
            )
        )

    last = points[-1]
    table_limited = last.censored_fraction > 0.5
    if table_limited:
        logger.warning(
            f"{statistic_id} under {alt.label()}: {last.censored_fraction:.0%} of p-values at the table floor, "
            f"N={null_tables[last.n].N} is too small to resolve the tail"
        )
    resolved = [pt for pt in points if pt.censored_fraction <= 0.5]
    report = SlopeReport(
        statistic_id=statistic_id,
        alternative=alt.to_dict(),
        seed=int(seed),
        table_draws=null_tables[last.n].N,
        b_hat=last.statistic_mean,
        points=points,
        slope=last.mean,
        slope_se=last.se,
        slope_n=last.n,
        uncensored_slope=resolved[-1].mean if resolved else None,
        uncensored_slope_se=resolved[-1].se if resolved else None,
        uncensored_n=resolved[-1].n if resolved else None,
        table_limited=table_limited,
    )
    if statistic_id == "vn":
        delta = l1_divergence(alt)
        report.divergence = delta
        report.theoretical_slope = delta * delta
        report.theoretical_approximate = delta > VALID_LAMBDA
        report.approximation = SMALL_LAMBDA_LABEL
    return report


def efficiency_ratio(report_a: SlopeReport, report_b: SlopeReport) -> EfficiencyRatio:
    """
    Bahadur relative efficiency slope_A / slope_B with a delta-method standard error.
    """
    if report_a.alternative != report_b.alternative:
        raise InvalidParameterError("efficiency ratio needs both slopes under the same alternative")
    if report_b.table_limited or report_b.slope <= 0:
        raise InvalidParameterError(
            f"slope of '{report_b.statistic_id}' is zero or censored, the ratio is undefined"
        )
    a, sa = report_a.slope, report_a.slope_se
    b, sb = report_b.slope, report_b.slope_se
    se = math.sqrt((sa / b) ** 2 + (a * sb / (b * b)) ** 2)
    return EfficiencyRatio(
        statistic_a=report_a.statistic_id,
        statistic_b=report_b.statistic_id,
        alternative=report_a.alternative,
        ratio=a / b,
        se=se,
    )
