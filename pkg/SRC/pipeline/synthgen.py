"""
Paired-sample generators for the built-in alternative families and their exact densities.

Families (theta in parentheses):
    independent_uniform      X ~ U[0,1]^d, Y ~ U[0,1]^d', independent
    gaussian_copula (rho)    U = Phi(Z1), V = Phi(Z2), corr(Z1, Z2) = rho
    fgm (alpha)              copula density 1 + alpha(1 - 2u)(1 - 2v)
    functional (sigma)       X ~ U(0,1), Y = X + sigma * Z
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.stats import norm

from SRC.exception import InvalidParameterError
from SRC.pipeline.partition import PairedSample
from SRC.utils.rng import SAMPLE_STREAM, stream

logger = logging.getLogger(__name__)

FAMILIES = ("independent_uniform", "gaussian_copula", "fgm", "functional")
COPULA_FAMILIES = ("independent_uniform", "gaussian_copula", "fgm")
MARGINALS = ("uniform", "normal")


@dataclass(frozen=True)
class AlternativeSpec:
    family: str = "independent_uniform"
    theta: float = 0.0
    d: int = 1
    d_prime: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown family '{self.family}', choose from {', '.join(FAMILIES)}")
        if self.d < 1 or self.d_prime < 1:
            raise InvalidParameterError("dimensions must be positive")
        if self.family != "independent_uniform" and (self.d != 1 or self.d_prime != 1):
            raise InvalidParameterError(f"family '{self.family}' is bivariate only (d = d' = 1)")
        theta = float(self.theta)
        if self.family == "gaussian_copula" and not -1.0 < theta < 1.0:
            raise InvalidParameterError(f"gaussian_copula needs rho in (-1, 1), got {theta}")
        if self.family == "fgm" and not -1.0 <= theta <= 1.0:
            raise InvalidParameterError(f"fgm needs alpha in [-1, 1], got {theta}")
        if self.family == "functional" and theta < 0:
            raise InvalidParameterError(f"functional needs sigma >= 0, got {theta}")
        object.__setattr__(self, "theta", theta)

    @property
    def is_independent(self) -> bool:
        return (
            self.family == "independent_uniform"
            or (self.family in ("gaussian_copula", "fgm") and self.theta == 0.0)
        )

    def label(self) -> str:
        if self.family == "independent_uniform":
            return f"independent_uniform(d={self.d},d'={self.d_prime})"
        return f"{self.family}({self.theta:g})"

    def to_dict(self) -> Dict:
        return {"family": self.family, "theta": self.theta, "d": self.d, "d_prime": self.d_prime}


@dataclass(frozen=True)
class GeneratorSpec:
    """An alternative plus the marginal transform and the stream id its draws come from."""

    alternative: AlternativeSpec = AlternativeSpec()
    marginal: str = "uniform"
    stream_id: int = SAMPLE_STREAM

    def __post_init__(self):
        if self.marginal not in MARGINALS:
            raise InvalidParameterError(f"unknown marginal transform '{self.marginal}'")
        if self.marginal == "normal" and self.alternative.family not in COPULA_FAMILIES:
            raise InvalidParameterError("the normal marginal transform applies to copula families only")

    @property
    def generator_id(self) -> str:
        return f"{self.alternative.label()}:{self.marginal}"


def _draw(alt: AlternativeSpec, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    if alt.family == "independent_uniform":
        return rng.random((n, alt.d)), rng.random((n, alt.d_prime))
    if alt.family == "gaussian_copula":
        z1 = rng.standard_normal(n)
        z2 = alt.theta * z1 + np.sqrt(1.0 - alt.theta**2) * rng.standard_normal(n)
        return norm.cdf(z1), norm.cdf(z2)
    if alt.family == "fgm":
        u = rng.random(n)
        w = rng.random(n)
        # invert C(v | u) = v + a v (1 - v), a = alpha (1 - 2u); stable root form
        a = alt.theta * (1.0 - 2.0 * u)
        v = 2.0 * w / ((1.0 + a) + np.sqrt((1.0 + a) ** 2 - 4.0 * a * w))
        return u, np.clip(v, 0.0, 1.0)
    x = rng.random(n)
    return x, x + alt.theta * rng.standard_normal(n)


def sample(spec: GeneratorSpec, n: int, seed: int, *index: int) -> PairedSample:
    """
    Draw n i.i.d. pairs.

    Args:
        spec (GeneratorSpec): Family, parameter and marginal transform.
        n (int): Number of pairs.
        seed (int): Experiment seed.
        *index (int): Extra stream address (replicate indices); the draw depends
                      only on (seed, spec.stream_id, *index).

    Returns:
        PairedSample: The generated sample.
    """
    if n < 1:
        raise InvalidParameterError(f"sample size must be positive, got {n}")
    rng = stream(seed, spec.stream_id, *index)
    x, y = _draw(spec.alternative, int(n), rng)
    if spec.marginal == "normal":
        x, y = norm.ppf(x), norm.ppf(y)
    return PairedSample(x, y)


def _copula_density(alt: AlternativeSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if alt.family == "fgm":
        return 1.0 + alt.theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
    if alt.family == "gaussian_copula":
        rho = alt.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            z1, z2 = norm.ppf(u), norm.ppf(v)
            expo = -(rho**2 * (z1**2 + z2**2) - 2.0 * rho * z1 * z2) / (2.0 * (1.0 - rho**2))
            return np.exp(expo) / np.sqrt(1.0 - rho**2)
    return np.ones(np.broadcast(u, v).shape)


def density(spec: GeneratorSpec, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Joint and marginal densities (f(x, y), f1(x), f2(y)); zero outside the support.

    Args:
        spec (GeneratorSpec): Family and marginal transform.
        x: X point(s), shape (...,) when d = 1 or (..., d).
        y: Y point(s), shape (...,) when d' = 1 or (..., d').

    Returns:
        tuple: Three arrays broadcast over the evaluation points.
    """
    alt = spec.alternative
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    if alt.family == "functional":
        sigma = alt.theta
        if sigma == 0:
            raise InvalidParameterError("functional(sigma=0) has no joint density")
        inside_x = (x >= 0) & (x <= 1)
        f1 = inside_x.astype(np.float64)
        f = np.where(inside_x, norm.pdf((y - x) / sigma) / sigma, 0.0)
        f2 = norm.cdf(y / sigma) - norm.cdf((y - 1.0) / sigma)
        return f, f1, np.broadcast_to(f2, np.broadcast(x, y).shape).copy()

    if alt.family == "independent_uniform" and (alt.d > 1 or alt.d_prime > 1):
        xs = x if alt.d > 1 else x[..., None]
        ys = y if alt.d_prime > 1 else y[..., None]
        if spec.marginal == "normal":
            f1 = np.prod(norm.pdf(xs), axis=-1)
            f2 = np.prod(norm.pdf(ys), axis=-1)
        else:
            f1 = np.all((xs >= 0) & (xs <= 1), axis=-1).astype(np.float64)
            f2 = np.all((ys >= 0) & (ys <= 1), axis=-1).astype(np.float64)
        return f1 * f2, f1, f2

    if spec.marginal == "normal" and alt.family == "gaussian_copula":
        rho = alt.theta
        quad = (x**2 - 2.0 * rho * x * y + y**2) / (1.0 - rho**2)
        f = np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(1.0 - rho**2))
        return f, norm.pdf(x), norm.pdf(y)

    if spec.marginal == "normal":
        u, v = norm.cdf(x), norm.cdf(y)
        jac_x, jac_y = norm.pdf(x), norm.pdf(y)
        c = _copula_density(alt, u, v)
        return c * jac_x * jac_y, jac_x, jac_y

    inside_x = (x >= 0) & (x <= 1)
    inside_y = (y >= 0) & (y <= 1)
    inside = inside_x & inside_y
    with np.errstate(invalid="ignore"):
        c = _copula_density(alt, np.clip(x, 0, 1), np.clip(y, 0, 1))
    f = np.where(inside, c, 0.0)
    return f, inside_x.astype(np.float64), inside_y.astype(np.float64)
