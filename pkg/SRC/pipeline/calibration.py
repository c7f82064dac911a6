"""
p-values by permutation and by Monte Carlo null tables.

Every replicate draws from its own (seed, stream, index) address, so results
are identical for any worker count and chunking.
"""

import dataclasses
import logging
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from SRC.exception import InvalidParameterError
from SRC.pipeline import synthgen
from SRC.pipeline.partition import CubicPartition, PairedSample
from SRC.pipeline.statistics import check_supported, evaluate
from SRC.schemas import TestReport
from SRC.utils.config import (
    DEFAULT_GRID_CELLS,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SEED,
    DEFAULT_TABLE_DRAWS,
    DEFAULT_THREADS,
    MIN_PERMUTATIONS,
    MIN_TABLE_DRAWS,
)
from SRC.utils.replicates import run_replicates
from SRC.utils.rng import NULL_TABLE_STREAM, PERMUTATION_STREAM, stream

logger = logging.getLogger(__name__)

# ties between permuted and observed values survive float reordering up to this
TIE_TOLERANCE = 100 * np.finfo(np.float64).eps


@dataclass(frozen=True)
class NullTable:
    """Sorted Monte Carlo draws of a statistic under independence."""

    statistic_id: str
    n: int
    draws: np.ndarray
    generator_id: str
    seed: int

    def __post_init__(self):
        draws = np.array(self.draws, dtype=np.float64)
        if draws.ndim != 1 or draws.size < MIN_TABLE_DRAWS:
            raise InvalidParameterError(f"a null table needs at least {MIN_TABLE_DRAWS} draws, got {draws.size}")
        if np.any(np.diff(draws) < 0):
            draws = np.sort(draws)
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)

    @property
    def N(self) -> int:
        return int(self.draws.size)

    @property
    def floor(self) -> float:
        return 1.0 / (self.N + 1)


def fixed_partition(statistic_id: str, d: int, d_prime: int, grid_cells: int) -> Optional[CubicPartition]:
    """Unit-cube grid for partition statistics, None for the rest."""
    definition = check_supported(statistic_id, d, d_prime)
    if not definition.needs_partition:
        return None
    return CubicPartition.unit_grid(grid_cells, d, d_prime)


def _statistic_chunk(start, stop, statistic_id, spec, n, seed, partition):
    return np.array(
        [evaluate(statistic_id, synthgen.sample(spec, n, seed, n, i), partition) for i in range(start, stop)],
        dtype=np.float64,
    )


def simulate_statistic(
    statistic_id: str,
    spec: synthgen.GeneratorSpec,
    n: int,
    count: int,
    seed: int,
    partition: Optional[CubicPartition] = None,
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> np.ndarray:
    """
    Statistic values on `count` independent samples of size n from `spec`.

    Replicate i of size n is drawn from address (seed, spec.stream_id, n, i).

    Returns:
        np.ndarray: Values ordered by replicate index.
    """
    alt = spec.alternative
    check_supported(statistic_id, alt.d, alt.d_prime)
    task = partial(_statistic_chunk, statistic_id=statistic_id, spec=spec, n=int(n), seed=int(seed), partition=partition)
    return run_replicates(task, int(count), threads=threads, progress=progress, desc=f"{statistic_id} n={n}")


def _permutation_chunk(start, stop, sample, statistic_id, partition, seed):
    values = np.empty(stop - start, dtype=np.float64)
    for slot, b in enumerate(range(start, stop)):
        perm = stream(seed, PERMUTATION_STREAM, b).permutation(sample.n)
        values[slot] = evaluate(statistic_id, sample.with_y(sample.y[perm]), partition)
    return values


def permutation_pvalue(
    sample: PairedSample,
    statistic_id: str,
    B: int = DEFAULT_PERMUTATIONS,
    seed: int = DEFAULT_SEED,
    partition: Optional[CubicPartition] = None,
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> TestReport:
    """
    Conditional permutation test of independence.

    The Y block is permuted B times; for V_n / L_n the partition of the
    observed sample is frozen across permutations.

    Args:
        sample (PairedSample): The observations.
        statistic_id (str): Registry id of the statistic.
        B (int): Number of permutations, at least 99.
        seed (int): Seed of the permutation streams.
        partition (CubicPartition, optional): Cells for partition statistics.
        threads (int): Worker cap.
        progress (bool): Show progress.

    Returns:
        TestReport: p = (1 + #{T_b >= T_obs}) / (B + 1).
    """
    if B < MIN_PERMUTATIONS:
        raise InvalidParameterError(f"permutation test needs B >= {MIN_PERMUTATIONS}, got {B}")
    definition = check_supported(statistic_id, sample.d, sample.d_prime)
    if definition.needs_partition and partition is None:
        partition = CubicPartition.from_sample(sample)
    observed = evaluate(statistic_id, sample, partition)
    task = partial(_permutation_chunk, sample=sample, statistic_id=statistic_id, partition=partition, seed=int(seed))
    permuted = run_replicates(task, int(B), threads=threads, progress=progress, desc=f"{statistic_id} permutations")
    exceed = int(np.count_nonzero(permuted >= observed - TIE_TOLERANCE * abs(observed)))
    p_value = (1 + exceed) / (B + 1)
    logger.info(f"{statistic_id}: observed={observed:.6g}, p={p_value:.6g} over B={B}")
    return TestReport(
        statistic_id=statistic_id,
        n=sample.n,
        observed=observed,
        p_value=p_value,
        method="permutation",
        replicates=int(B),
        seed=int(seed),
        censored=exceed == 0,
        partition=partition.metadata() if partition is not None else None,
    )


def mc_null_table(
    statistic_id: str,
    n: int,
    N: int = DEFAULT_TABLE_DRAWS,
    generator_spec: Optional[synthgen.GeneratorSpec] = None,
    seed: int = DEFAULT_SEED,
    grid_cells: int = DEFAULT_GRID_CELLS,
    threads: int = DEFAULT_THREADS,
    progress: bool = False,
) -> NullTable:
    """
    Simulate the null distribution of a statistic.

    Args:
        statistic_id (str): Registry id.
        n (int): Sample size.
        N (int): Number of draws, at least 100.
        generator_spec (GeneratorSpec, optional): Independent generator; defaults to
                                                  independent uniforms on [0,1] x [0,1].
        seed (int): Table seed.
        grid_cells (int): Cells per side of the fixed partition for V_n / L_n.
        threads (int): Worker cap.
        progress (bool): Show progress.

    Returns:
        NullTable: Sorted draws plus the metadata that reproduces them.
    """
    if N < MIN_TABLE_DRAWS:
        raise InvalidParameterError(f"null table needs N >= {MIN_TABLE_DRAWS}, got {N}")
    spec = generator_spec or synthgen.GeneratorSpec()
    if not spec.alternative.is_independent:
        raise InvalidParameterError(f"null tables need an independent generator, got {spec.generator_id}")
    spec = dataclasses.replace(spec, stream_id=NULL_TABLE_STREAM)
    alt = spec.alternative
    partition = fixed_partition(statistic_id, alt.d, alt.d_prime, grid_cells)
    generator_id = spec.generator_id + (f":grid={grid_cells}" if partition is not None else "")
    logger.info(f"simulating null table {statistic_id} n={n} N={N} from {generator_id}")
    draws = simulate_statistic(statistic_id, spec, n, N, seed, partition, threads=threads, progress=progress)
    return NullTable(statistic_id=statistic_id, n=int(n), draws=np.sort(draws), generator_id=generator_id, seed=int(seed))


def pvalue_from_table(observed: float, table: NullTable) -> float:
    """Empirical survival p = (1 + #{draws >= observed}) / (N + 1)."""
    at_least = table.N - int(np.searchsorted(table.draws, observed, side="left"))
    return (1 + at_least) / (table.N + 1)


def table_grid_cells(table: NullTable) -> int:
    """Cells per side of the fixed partition a table was simulated on."""
    for token in table.generator_id.split(":"):
        if token.startswith("grid="):
            return int(token[len("grid=") :])
    return DEFAULT_GRID_CELLS


def table_test(sample: PairedSample, table: NullTable) -> TestReport:
    """Test a sample against a precomputed null table of the same statistic and n."""
    if sample.n != table.n:
        raise InvalidParameterError(f"null table was simulated for n={table.n}, sample has n={sample.n}")
    partition = fixed_partition(table.statistic_id, sample.d, sample.d_prime, table_grid_cells(table))
    observed = evaluate(table.statistic_id, sample, partition)
    p_value = pvalue_from_table(observed, table)
    return TestReport(
        statistic_id=table.statistic_id,
        n=sample.n,
        observed=observed,
        p_value=p_value,
        method="null_table",
        replicates=table.N,
        seed=table.seed,
        censored=p_value <= table.floor,
        partition=partition.metadata() if partition is not None else None,
    )
