"""Versioned report schemas and the run configuration every report embeds."""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from SRC.utils.config import FORMAT_VERSION

SMALL_LAMBDA_LABEL = "small-lambda approximation g(lambda) ~ lambda^2/2"

# never embedded: they change where bytes go, not which bytes
RUNTIME_ONLY_FIELDS = {"threads", "output", "csv_output", "progress"}


class RunConfig(BaseModel):
    subcommand: Literal["test", "nulltable", "ldcurve", "slope", "simulate"]
    input_path: Optional[str] = None
    d: int = 1
    d_prime: int = 1
    statistics: List[str] = Field(default_factory=list)
    replicates: Optional[int] = None
    seed: int
    width_x: Optional[float] = None
    width_y: Optional[float] = None
    origin_x: Optional[List[float]] = None
    origin_y: Optional[List[float]] = None
    grid_cells: Optional[int] = None
    table_path: Optional[str] = None
    n: Optional[int] = None
    n_grid: Optional[List[int]] = None
    lambdas: Optional[List[float]] = None
    family: Optional[str] = None
    theta: Optional[float] = None
    marginal: str = "uniform"
    reps: Optional[int] = None
    tables_dir: Optional[str] = None
    output: Optional[str] = None
    csv_output: Optional[str] = None
    threads: int = 1
    progress: bool = False

    def embedded(self) -> Dict:
        return self.model_dump(mode="json", exclude=RUNTIME_ONLY_FIELDS)


class TestReport(BaseModel):
    __test__ = False

    format_version: int = FORMAT_VERSION
    statistic_id: str
    n: int
    observed: float
    p_value: float
    method: Literal["permutation", "null_table"]
    replicates: int
    seed: int
    censored: bool
    partition: Optional[Dict] = None
    config: Optional[Dict] = None


class LDCurve(BaseModel):
    format_version: int = FORMAT_VERSION
    statistic_id: str
    generator_id: str
    partition: Optional[Dict] = None
    replicates: int
    seed: int
    lambda_grid: List[float]
    n_grid: List[int]
    # rows follow n_grid, columns follow lambda_grid
    tail_probs: List[List[float]]
    standard_errors: List[List[float]]
    censored: List[List[bool]]
    upper_bounds: List[List[Optional[float]]]
    rates: List[List[Optional[float]]]
    fitted_rate: List[Optional[float]]
    fitted_rate_se: List[Optional[float]]
    usable: List[bool]
    g_theory: List[float]
    envelope: List[List[float]]
    envelope_violations: int
    approximation: str = SMALL_LAMBDA_LABEL
    config: Optional[Dict] = None


class SlopePoint(BaseModel):
    n: int
    reps: int
    mean: float
    se: float
    censored_fraction: float
    statistic_mean: float


class SlopeReport(BaseModel):
    format_version: int = FORMAT_VERSION
    statistic_id: str
    alternative: Dict
    seed: int
    table_draws: int
    b_hat: float
    points: List[SlopePoint]
    slope: float
    slope_se: float
    slope_n: int
    uncensored_slope: Optional[float] = None
    uncensored_slope_se: Optional[float] = None
    uncensored_n: Optional[int] = None
    table_limited: bool
    divergence: Optional[float] = None
    theoretical_slope: Optional[float] = None
    theoretical_approximate: Optional[bool] = None
    approximation: Optional[str] = None
    config: Optional[Dict] = None


class EfficiencyRatio(BaseModel):
    statistic_a: str
    statistic_b: str
    alternative: Dict
    ratio: float
    se: float


class SlopeComparison(BaseModel):
    format_version: int = FORMAT_VERSION
    reports: List[SlopeReport]
    efficiency_ratio: Optional[EfficiencyRatio] = None
    config: Optional[Dict] = None
