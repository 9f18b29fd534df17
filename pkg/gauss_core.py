#!/usr/bin/env python3
"""
Diagonal-Gaussian embeddings and the distance/mixing algebra on them.

An embedding is a mean vector plus a per-dimension log-variance. Every
other module consumes the operations here: the closed-form sampled
distance (CSD), its cosine form for L2-normalized means, prompt mixing
and the total-uncertainty statistic tr(Sigma).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

# sigma^2 = 0 is stored as log_var at this floor
LOG_VAR_FLOOR = -30.0

NORM_TOLERANCE = 1e-9
SIMPLEX_TOLERANCE = 1e-8


def make_rng(seed: int, offset: int = 0) -> np.random.Generator:
    """
    Counter-based generator for a (seed, offset) stream.

    Streams for different offsets are independent, so work split by offset
    reproduces the serial result regardless of evaluation order.
    """
    if seed < 0 or offset < 0:
        raise InvalidArgumentError(f"seed and offset must be non-negative, got {seed}, {offset}")
    return np.random.Generator(np.random.Philox(key=int(seed) + (int(offset) << 64)))


def _as_vector(values, name: str) -> np.ndarray:
    if np.ndim(values) > 1:
        raise InvalidArgumentError(f"{name} must be a 1-D vector")
    return np.array(values, dtype=np.float64).reshape(-1)


@dataclass(frozen=True, eq=False)
class GaussianEmbedding:
    """
    Diagonal-covariance Gaussian N(mu, diag(exp(log_var))).

    Instances are immutable; the arrays are copied and made read-only.
    Entries of log_var below `floor` are raised to it.
    """
    id: str
    mu: np.ndarray
    log_var: np.ndarray
    normalized: bool = False
    floor: float = LOG_VAR_FLOOR

    def __post_init__(self):
        mu = _as_vector(self.mu, "mu")
        log_var = _as_vector(self.log_var, "log_var")
        if mu.size < 1:
            raise InvalidArgumentError(f"embedding '{self.id}' has dimension 0")
        if mu.shape != log_var.shape:
            raise InvalidArgumentError(
                f"embedding '{self.id}': mu has dimension {mu.size}, log_var has {log_var.size}"
            )
        if not np.all(np.isfinite(mu)):
            raise InvalidArgumentError(f"embedding '{self.id}': mu has non-finite entries")
        # -inf means sigma^2 = 0, which the floor represents
        if np.any(np.isnan(log_var)) or np.any(log_var == np.inf):
            raise InvalidArgumentError(f"embedding '{self.id}': log_var has non-finite entries")
        log_var = np.maximum(log_var, self.floor)
        if self.normalized and __debug__:
            norm = float(np.linalg.norm(mu))
            if abs(norm - 1.0) > NORM_TOLERANCE:
                raise InvalidArgumentError(
                    f"embedding '{self.id}' flagged normalized but ||mu|| = {norm!r}"
                )
        mu.setflags(write=False)
        log_var.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_var", log_var)
        object.__setattr__(self, "id", str(self.id))

    @classmethod
    def from_variance(cls, id: str, mu, variance, normalized: bool = False) -> "GaussianEmbedding":
        """Build from sigma^2 directly; zero variances map to the floor"""
        variance = _as_vector(variance, "variance")
        if np.any(variance < 0):
            raise InvalidArgumentError(f"embedding '{id}': negative variance")
        with np.errstate(divide="ignore"):
            log_var = np.log(variance)
        return cls(id=id, mu=mu, log_var=log_var, normalized=normalized)

    @classmethod
    def l2_normalized(cls, id: str, mu, log_var) -> "GaussianEmbedding":
        """Build with mu scaled to unit L2 norm and the normalized flag set"""
        mu = _as_vector(mu, "mu")
        norm = np.linalg.norm(mu)
        if norm == 0.0 or not np.isfinite(norm):
            raise InvalidArgumentError(f"embedding '{id}': cannot normalize mu with norm {norm}")
        return cls(id=id, mu=mu / norm, log_var=log_var, normalized=True)

    @property
    def dim(self) -> int:
        return int(self.mu.size)

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)

    @property
    def is_degenerate(self) -> bool:
        """True when any dimension sits at the log-variance floor"""
        return bool(np.any(self.log_var <= self.floor))

    @property
    def sampling_std(self) -> np.ndarray:
        """Per-dimension standard deviation used for sampling; zero at the floor"""
        return np.where(self.log_var <= self.floor, 0.0, np.exp(0.5 * self.log_var))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw n point embeddings, shape (n, D)"""
        noise = rng.standard_normal((int(n), self.dim))
        return self.mu + noise * self.sampling_std

    def with_id(self, id: str) -> "GaussianEmbedding":
        return GaussianEmbedding(id=id, mu=self.mu, log_var=self.log_var,
                                 normalized=self.normalized, floor=self.floor)


DEFAULT_EPS_LOG = -10.0


@dataclass(frozen=True)
class LossParams:
    """
    Scalar hyperparameters of the training objective.

    a, b scale and shift the pairwise contrastive logit; c sharpens the
    inclusion loss; eps_inc multiplies every 1/sigma^2 inside the inclusion
    measure; alpha1, alpha2, beta weight the matched-pair inclusion,
    masked-pair inclusion and VIB terms.
    """
    a: float = 10.0
    b: float = -10.0
    c: float = 10.0
    eps_inc: float = math.exp(DEFAULT_EPS_LOG)
    alpha1: float = 1e-7
    alpha2: float = 1e-3
    beta: float = 1e-4

    def __post_init__(self):
        for name in ("a", "c", "eps_inc"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"LossParams.{name} must be positive, got {value!r}")
        for name in ("alpha1", "alpha2", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidArgumentError(f"LossParams.{name} must be non-negative, got {value!r}")
        if not math.isfinite(self.b):
            raise InvalidArgumentError(f"LossParams.b must be finite, got {self.b!r}")

    @property
    def eps_log(self) -> float:
        return math.log(self.eps_inc)

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> "LossParams":
        """
        Build from a config mapping.

        The inclusion epsilon is given in log space as `eps_log`
        (eps_inc = exp(eps_log)); a literal `eps_inc` is also accepted.
        """
        config = dict(config or {})
        kwargs = {k: float(config[k]) for k in ("a", "b", "c", "alpha1", "alpha2", "beta") if config.get(k) is not None}
        if config.get("eps_log") is not None:
            kwargs["eps_inc"] = math.exp(float(config["eps_log"]))
        elif config.get("eps_inc") is not None:
            kwargs["eps_inc"] = float(config["eps_inc"])
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, float]:
        return {
            "a": self.a, "b": self.b, "c": self.c, "eps_log": self.eps_log,
            "alpha1": self.alpha1, "alpha2": self.alpha2, "beta": self.beta,
        }


def check_same_dim(*zs: GaussianEmbedding) -> int:
    """Return the shared dimension, raising on mismatch"""
    dims = {z.dim for z in zs}
    if len(dims) != 1:
        raise InvalidArgumentError(f"dimension mismatch: {sorted(dims)}")
    return dims.pop()


def _require_normalized(z: GaussianEmbedding) -> None:
    if not z.normalized:
        raise InvalidArgumentError(f"embedding '{z.id}' is not L2-normalized")


def csd(z1: GaussianEmbedding, z2: GaussianEmbedding) -> float:
    """
    Closed-form sampled distance E||Z1 - Z2||^2.

    Returns:
        ||mu1 - mu2||^2 + sum(sigma1^2 + sigma2^2)
    """
    check_same_dim(z1, z2)
    diff = z1.mu - z2.mu
    return float(diff @ diff + np.sum(z1.variance) + np.sum(z2.variance))


def csd_similarity(z1: GaussianEmbedding, z2: GaussianEmbedding) -> float:
    """
    Cosine form of CSD for normalized means: mu1.mu2 - 0.5 * sum(sigma1^2 + sigma2^2).

    Equals 1 - csd/2 when both means have unit norm.
    """
    check_same_dim(z1, z2)
    _require_normalized(z1)
    _require_normalized(z2)
    return float(z1.mu @ z2.mu - 0.5 * (np.sum(z1.variance) + np.sum(z2.variance)))


def total_uncertainty(z: GaussianEmbedding) -> float:
    """
    tr(Sigma) = sum of per-dimension variances.

    Dimensions at the log-variance floor count as sigma^2 = 0, so a fully
    floor-capped embedding returns exactly 0; `z.is_degenerate` flags it.
    """
    return float(np.sum(np.where(z.log_var <= z.floor, 0.0, z.variance)))


def _mix(zs: Sequence[GaussianEmbedding], weights: np.ndarray, squared_weights: bool,
         renormalize: bool, id: Optional[str]) -> GaussianEmbedding:
    mu = np.stack([z.mu for z in zs])
    var = np.stack([z.variance for z in zs])
    mean = weights @ mu
    var_weights = weights ** 2 if squared_weights else weights
    mixed_var = var_weights @ var
    mix_id = id if id is not None else "+".join(z.id for z in zs)
    if renormalize:
        return GaussianEmbedding.l2_normalized(mix_id, mean, np.log(mixed_var))
    return GaussianEmbedding.from_variance(mix_id, mean, mixed_var)


def mix_prompts(zs: Sequence[GaussianEmbedding], renormalize: bool = False,
                id: Optional[str] = None) -> GaussianEmbedding:
    """
    Prompt ensemble N(mean of mu_i, mean of sigma_i^2).

    The variance is the plain mean of variances, not divided by N again.

    Args:
        zs: Prompt embeddings of one class
        renormalize: Rescale the mixed mean to unit norm
        id: Identifier of the result (defaults to the joined input ids)
    """
    if not zs:
        raise InvalidArgumentError("mix_prompts needs at least one embedding")
    check_same_dim(*zs)
    if len(zs) == 1 and not renormalize:
        return zs[0] if id is None else zs[0].with_id(id)
    weights = np.full(len(zs), 1.0 / len(zs))
    return _mix(zs, weights, False, renormalize, id)


def weighted_mix(zs: Sequence[GaussianEmbedding], pi, renormalize: bool = False,
                 independent_sum: bool = False, id: Optional[str] = None) -> GaussianEmbedding:
    """
    Weighted prompt embedding with mean sum(pi_i mu_i).

    The variance is sum(pi_i sigma_i^2) (parameter average). With
    `independent_sum` it is sum(pi_i^2 sigma_i^2), the variance of a sum of
    independent scaled Gaussians.

    Args:
        zs: Prompt embeddings
        pi: PromptWeights or a plain weight sequence over the same index set
    """
    weights = np.asarray(getattr(pi, "pi", pi), dtype=np.float64).reshape(-1)
    if not zs:
        raise InvalidArgumentError("weighted_mix needs at least one embedding")
    if weights.size != len(zs):
        raise InvalidArgumentError(f"{weights.size} weights for {len(zs)} embeddings")
    if np.any(weights < -SIMPLEX_TOLERANCE) or abs(weights.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise InvalidArgumentError(f"weights are off the simplex (sum={weights.sum()!r})")
    check_same_dim(*zs)
    hot = np.flatnonzero(weights == 1.0)
    if hot.size == 1 and not renormalize and not independent_sum:
        chosen = zs[int(hot[0])]
        return chosen if id is None else chosen.with_id(id)
    return _mix(zs, weights, independent_sum, renormalize, id)


def stack(zs: Sequence[GaussianEmbedding]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack means and log-variances into (n, D) arrays"""
    if not zs:
        raise InvalidArgumentError("cannot stack an empty embedding list")
    check_same_dim(*zs)
    return np.stack([z.mu for z in zs]), np.stack([z.log_var for z in zs])


def pairwise_csd(rows: Sequence[GaussianEmbedding], cols: Sequence[GaussianEmbedding]) -> np.ndarray:
    """CSD between every row and column embedding, shape (len(rows), len(cols))"""
    mu_r, lv_r = stack(rows)
    mu_c, lv_c = stack(cols)
    if mu_r.shape[1] != mu_c.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {mu_r.shape[1]} vs {mu_c.shape[1]}")
    if mu_r.shape[0] * mu_c.shape[0] * mu_r.shape[1] <= 1 << 22:
        diff = mu_r[:, None, :] - mu_c[None, :, :]
        sq = np.sum(diff * diff, axis=2)
    else:
        # expanded form for large pools; loses exactness at zero distance
        sq = (
            np.sum(mu_r ** 2, axis=1)[:, None]
            + np.sum(mu_c ** 2, axis=1)[None, :]
            - 2.0 * mu_r @ mu_c.T
        )
    return sq + np.sum(np.exp(lv_r), axis=1)[:, None] + np.sum(np.exp(lv_c), axis=1)[None, :]


def unit_rows(raw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise L2 normalization; returns (unit rows, norms)"""
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms == 0.0):
        raise InvalidArgumentError(f"zero-norm mean vector at row {int(np.argmin(norms))}")
    return raw / norms[:, None], norms


def project_through_normalization(grad_unit: np.ndarray, unit: np.ndarray,
                                  norms: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. unit vectors back to the raw vectors they came from"""
    radial = np.sum(grad_unit * unit, axis=1)
    return (grad_unit - radial[:, None] * unit) / norms[:, None]

