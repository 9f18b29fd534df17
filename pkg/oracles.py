#!/usr/bin/env python3
"""
Brute-force reference computations for the analytic losses.

Trapezoid quadrature for the 1-D inclusion integral, Monte-Carlo estimates
for CSD and the KL divergence behind the VIB loss, and central finite
differences for gradients. None of these share code paths with
prob_losses, so agreement between the two is meaningful.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from errors import InvalidArgumentError, NumericError
from gauss_core import GaussianEmbedding, check_same_dim, make_rng

logger = logging.getLogger(__name__)

MC_CHUNK = 100_000
MIN_MC_CSD_SAMPLES = 10_000
MIN_MC_KL_SAMPLES = 100_000
LOG_UNDERFLOW = math.log(1e-300)


@dataclass(frozen=True)
class QuadratureConfig:
    """
    Integration grid for `quadrature_log_inc`.

    Args:
        half_width_sigmas: Half-span of the grid in pooled standard deviations
        points: Number of grid points (odd, at least 101)
    """
    half_width_sigmas: float = 12.0
    points: int = 20001

    def __post_init__(self):
        if not self.half_width_sigmas >= 6:
            raise InvalidArgumentError(f"half_width_sigmas must be >= 6, got {self.half_width_sigmas}")
        if self.points < 101 or self.points % 2 == 0:
            raise InvalidArgumentError(f"points must be odd and >= 101, got {self.points}")

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> "QuadratureConfig":
        config = config or {}
        kwargs = {}
        if config.get("half_width_sigmas") is not None:
            kwargs["half_width_sigmas"] = float(config["half_width_sigmas"])
        if config.get("points") is not None:
            kwargs["points"] = int(config["points"])
        return cls(**kwargs)

    def doubled(self) -> "QuadratureConfig":
        """Same span with twice the resolution"""
        return QuadratureConfig(self.half_width_sigmas, 2 * self.points - 1)


class MonteCarloEstimate(NamedTuple):
    estimate: float
    std_error: float


def _normal_logpdf(x: np.ndarray, mu: float, var: float) -> np.ndarray:
    return -0.5 * math.log(2.0 * math.pi * var) - (x - mu) ** 2 / (2.0 * var)


def quadrature_log_inc(mu1: float, var1: float, mu2: float, var2: float,
                       cfg: QuadratureConfig = QuadratureConfig()) -> float:
    """
    log of the integral of p1(x)^2 p2(x) over the real line, p_i = N(mu_i, var_i).

    The grid is centred on the mode of the integrand, the precision-weighted
    mean (2 mu1/var1 + mu2/var2) / (2/var1 + 1/var2), and spans
    `cfg.half_width_sigmas` of its pooled standard deviation either side.

    Raises:
        InvalidArgumentError: non-finite means or non-positive variances
        NumericError: the integral underflows 1e-300
    """
    for name, value in (("mu1", mu1), ("mu2", mu2)):
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    for name, value in (("var1", var1), ("var2", var2)):
        if not (math.isfinite(value) and value > 0):
            raise InvalidArgumentError(f"{name} must be positive, got {value!r}")

    precision = 2.0 / var1 + 1.0 / var2
    center = (2.0 * mu1 / var1 + mu2 / var2) / precision
    width = cfg.half_width_sigmas * math.sqrt(1.0 / precision)
    # grid is built relative to the centre so translation leaves it unchanged
    offsets = np.linspace(-width, width, cfg.points)
    log_integrand = 2.0 * _normal_logpdf(offsets, mu1 - center, var1) \
        + _normal_logpdf(offsets, mu2 - center, var2)
    shift = float(np.max(log_integrand))
    result = shift + math.log(trapezoid(np.exp(log_integrand - shift), offsets))
    if not math.isfinite(result) or result < LOG_UNDERFLOW:
        raise NumericError(
            f"inclusion integral underflows 1e-300 (log = {result!r}); "
            "widen the variances or move the means closer"
        )
    return result


def _chunks(n: int):
    done = 0
    index = 0
    while done < n:
        size = min(MC_CHUNK, n - done)
        yield index, size
        done += size
        index += 1


def _summarize(values: np.ndarray) -> MonteCarloEstimate:
    n = values.size
    if np.ptp(values) == 0.0:
        return MonteCarloEstimate(float(values[0]), 0.0)
    return MonteCarloEstimate(float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(n)))


def mc_csd(z1: GaussianEmbedding, z2: GaussianEmbedding, n: int = 1_000_000,
           seed: int = 0) -> MonteCarloEstimate:
    """
    Monte-Carlo estimate of E||Z1 - Z2||^2.

    Draws are split into fixed chunks, each with its own counter-based
    stream `make_rng(seed, offset=chunk)`, so the estimate does not depend
    on how chunks are scheduled.

    Returns:
        MonteCarloEstimate(estimate, std_error)
    """
    check_same_dim(z1, z2)
    if n < MIN_MC_CSD_SAMPLES:
        raise InvalidArgumentError(f"mc_csd needs n >= {MIN_MC_CSD_SAMPLES}, got {n}")
    values = np.empty(int(n))
    start = 0
    for chunk, size in _chunks(int(n)):
        rng = make_rng(seed, offset=chunk)
        diff = z1.sample(rng, size) - z2.sample(rng, size)
        values[start:start + size] = np.sum(diff * diff, axis=1)
        start += size
    return _summarize(values)


def mc_kl_to_standard_normal(z: GaussianEmbedding, n: int = 1_000_000,
                             seed: int = 0) -> MonteCarloEstimate:
    """
    Monte-Carlo estimate of KL(z || N(0, I)) = E_z[log q_z(x) - log phi(x)].

    Args:
        z: Embedding with every dimension above the log-variance floor
        n: Number of draws, at least 1e5
        seed: Stream seed
    """
    if n < MIN_MC_KL_SAMPLES:
        raise InvalidArgumentError(f"mc_kl_to_standard_normal needs n >= {MIN_MC_KL_SAMPLES}, got {n}")
    if z.is_degenerate:
        raise InvalidArgumentError(f"embedding '{z.id}' has zero variance; its KL is unbounded")
    std = np.exp(0.5 * z.log_var)
    values = np.empty(int(n))
    start = 0
    for chunk, size in _chunks(int(n)):
        rng = make_rng(seed, offset=chunk)
        noise = rng.standard_normal((size, z.dim))
        x = z.mu + noise * std
        # log q - log phi, the 2 pi terms cancel
        log_ratio = -0.5 * z.log_var - 0.5 * noise ** 2 + 0.5 * x ** 2
        values[start:start + size] = np.sum(log_ratio, axis=1)
        start += size
    return _summarize(values)


def finite_diff_grad(f: Callable[[np.ndarray], float], x, step: float = 1e-5) -> np.ndarray:
    """
    Central finite-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h.

    Args:
        f: Scalar function of a parameter vector
        x: Evaluation point
        step: h, within [1e-7, 1e-3]

    Raises:
        NumericError: f is non-finite at a perturbed point; index is the coordinate
    """
    if not 1e-7 <= step <= 1e-3:
        raise InvalidArgumentError(f"step must be within [1e-7, 1e-3], got {step!r}")
    x0 = np.array(x, dtype=np.float64).reshape(-1)
    logger.debug(f"finite differences over {x0.size} coordinates, step {step}")
    grad = np.zeros_like(x0)
    for i in range(x0.size):
        shifted = x0.copy()
        shifted[i] = x0[i] + step
        f_plus = float(f(shifted))
        shifted[i] = x0[i] - step
        f_minus = float(f(shifted))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"non-finite function value around coordinate {i}", index=i)
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad
