#!/usr/bin/env python3
"""
Bayesian prompt re-weighting.

Treats the N prompt embeddings of one class as the components of a
diagonal Gaussian mixture and fits only the mixing proportions pi by
MAP-EM under a symmetric Dirichlet(alpha) prior. Observations are point
embeddings sampled from image Gaussians near the class (zero-shot) or
from labeled class images (few-shot).

Order of a run:
    1. pi_n proportional to 1 / tr(Sigma_n)
    2. Sigma_n <- Sigma_n + eps_cov * I
    3. alternate E and M steps until max |delta pi| < tol or max_iters
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from errors import InvalidArgumentError, NumericError
from gauss_core import (
    SIMPLEX_TOLERANCE,
    GaussianEmbedding,
    check_same_dim,
    make_rng,
    mix_prompts,
    pairwise_csd,
    stack,
    total_uncertainty,
)

logger = logging.getLogger(__name__)

ZERO_SHOT_ALPHA = 5.0
FEW_SHOT_ALPHA = 2.0

# offset stride between per-class sampling streams
CLASS_STREAM_STRIDE = 1 << 32


@dataclass(frozen=True, eq=False)
class PromptWeights:
    """Mixing proportions of one class over its prompts"""
    class_id: str
    pi: np.ndarray
    ml_fallback: bool = False

    def __post_init__(self):
        pi = np.array(self.pi, dtype=np.float64).reshape(-1)
        if pi.size < 1:
            raise InvalidArgumentError("PromptWeights needs at least one weight")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > SIMPLEX_TOLERANCE:
            raise InvalidArgumentError(
                f"weights for class '{self.class_id}' are off the simplex: {pi.tolist()}"
            )
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    def __len__(self) -> int:
        return int(self.pi.size)

    def to_dict(self) -> Dict[str, Any]:
        return {"class_id": self.class_id, "pi": self.pi.tolist(), "ml_fallback": self.ml_fallback}


@dataclass(frozen=True, eq=False)
class Observations:
    """M' point embeddings of dimension D used as mixture data"""
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1:
            raise InvalidArgumentError(f"observations must be a non-empty (M', D) array, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvalidArgumentError("observations contain non-finite values")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class BprwConfig:
    """
    EM settings.

    Args:
        alpha: Dirichlet concentration (5 zero-shot, 2 few-shot)
        eps_cov: Added to every prompt variance before density evaluation
        m: Nearest images per class in zero-shot mode
        k: Samples per selected image in zero-shot mode
        total_points: Target observation count in few-shot mode
        max_iters: EM iteration cap
        tol: Convergence threshold on max |delta pi|
    """
    alpha: float = ZERO_SHOT_ALPHA
    eps_cov: float = 0.02
    m: int = 5
    k: int = 20
    total_points: int = 100
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        for name in ("alpha", "eps_cov", "tol"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"BprwConfig.{name} must be positive, got {value!r}")
        for name in ("m", "k", "total_points", "max_iters"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"BprwConfig.{name} must be >= 1, got {getattr(self, name)}")

    @classmethod
    def for_mode(cls, few_shot: bool, **overrides) -> "BprwConfig":
        """Config with the mode's default alpha unless one is given"""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        overrides.setdefault("alpha", FEW_SHOT_ALPHA if few_shot else ZERO_SHOT_ALPHA)
        return cls(**overrides)

    @classmethod
    def from_dict(cls, config: Dict[str, Any], few_shot: bool = False) -> "BprwConfig":
        config = config or {}
        casts = {"alpha": float, "eps_cov": float, "m": int, "k": int,
                 "total_points": int, "max_iters": int, "tol": float}
        kwargs = {k: cast(config[k]) for k, cast in casts.items() if config.get(k) is not None}
        return cls.for_mode(few_shot, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return {"alpha": self.alpha, "eps_cov": self.eps_cov, "m": self.m, "k": self.k,
                "total_points": self.total_points, "max_iters": self.max_iters, "tol": self.tol}


@dataclass(frozen=True, eq=False)
class EStepResult:
    gamma: np.ndarray
    degenerate_rows: int = 0


@dataclass(frozen=True)
class BprwResult:
    """Final weights, penalized log-posterior per iteration (entry 0 is the initial pi) and status"""
    weights: PromptWeights
    log_posterior: List[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    degenerate_rows: int = 0


def gaussian_logpdf(x, z: GaussianEmbedding) -> float:
    """
    Log-density of a diagonal Gaussian at x.

    Returns:
        sum_d [-0.5 log(2 pi sigma^2[d]) - (x[d] - mu[d])^2 / (2 sigma^2[d])]
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != z.dim:
        raise InvalidArgumentError(f"point has dimension {x.size}, embedding '{z.id}' has {z.dim}")
    var = z.variance
    return float(np.sum(-0.5 * (math.log(2.0 * math.pi) + z.log_var) - (x - z.mu) ** 2 / (2.0 * var)))


def log_densities(obs: Observations, prompts: Sequence[GaussianEmbedding]) -> np.ndarray:
    """(M', N) matrix of log f_n(x_j)"""
    if not prompts:
        raise InvalidArgumentError("at least one prompt is required")
    mu, log_var = stack(prompts)
    if obs.points.shape[1] != mu.shape[1]:
        raise InvalidArgumentError(
            f"observations have dimension {obs.points.shape[1]}, prompts have {mu.shape[1]}"
        )
    var = np.exp(log_var)
    diff = obs.points[:, None, :] - mu[None, :, :]
    return np.sum(-0.5 * (math.log(2.0 * math.pi) + log_var)[None, :, :]
                  - diff ** 2 / (2.0 * var)[None, :, :], axis=2)


def _log_pi(pi: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(pi)


def e_step(obs: Observations, prompts: Sequence[GaussianEmbedding],
           pi: PromptWeights, log_dens: Optional[np.ndarray] = None) -> EStepResult:
    """
    Responsibilities gamma_jn = pi_n f_n(x_j) / sum_i pi_i f_i(x_j).

    Evaluated in log space with a per-row max shift. Rows whose weighted
    densities are all zero become uniform and are counted as degenerate.
    """
    if not prompts:
        raise InvalidArgumentError("e_step needs at least one prompt")
    if len(pi) != len(prompts):
        raise InvalidArgumentError(f"{len(pi)} weights for {len(prompts)} prompts")
    if log_dens is None:
        log_dens = log_densities(obs, prompts)
    weighted = log_dens + _log_pi(pi.pi)[None, :]
    norm = logsumexp(weighted, axis=1, keepdims=True)
    dead = ~np.isfinite(norm[:, 0])
    gamma = np.empty_like(weighted)
    gamma[~dead] = np.exp(weighted[~dead] - norm[~dead])
    gamma[dead] = 1.0 / weighted.shape[1]
    degenerate = int(np.count_nonzero(dead))
    if degenerate:
        logger.warning(f"e_step: {degenerate} observation(s) have zero weighted density; using uniform rows")
    return EStepResult(gamma=gamma, degenerate_rows=degenerate)


def m_step(gamma: np.ndarray, alpha: float, class_id: str = "") -> PromptWeights:
    """
    MAP update pi_n = (N_n + alpha - 1) / (M' + N (alpha - 1)).

    Negative entries (alpha < 1) are clamped to 0 and the vector is
    renormalized. A non-positive denominator falls back to the
    maximum-likelihood update N_n / M' and sets `ml_fallback`.
    """
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 2 or gamma.shape[0] < 1 or gamma.shape[1] < 1:
        raise InvalidArgumentError(f"gamma must be a non-empty (M', N) matrix, got shape {gamma.shape}")
    if not alpha > 0:
        raise InvalidArgumentError(f"alpha must be positive, got {alpha!r}")
    n_obs, n_comp = gamma.shape
    counts = gamma.sum(axis=0)
    denom = n_obs + n_comp * (alpha - 1.0)
    if denom <= 0:
        logger.warning(f"m_step: denominator {denom} <= 0 for alpha={alpha}; using maximum likelihood")
        return PromptWeights(class_id, counts / n_obs, ml_fallback=True)
    pi = (counts + (alpha - 1.0)) / denom
    if np.any(pi < 0):
        pi = np.maximum(pi, 0.0)
        total = pi.sum()
        if total <= 0:
            logger.warning("m_step: every weight clamped to zero; using maximum likelihood")
            return PromptWeights(class_id, counts / n_obs, ml_fallback=True)
        pi = pi / total
    return PromptWeights(class_id, pi)


def init_weights(prompts: Sequence[GaussianEmbedding], class_id: str = "") -> PromptWeights:
    """pi_n = (1 / tr Sigma_n) / sum_i (1 / tr Sigma_i)"""
    if not prompts:
        raise InvalidArgumentError("init_weights needs at least one prompt")
    traces = np.array([total_uncertainty(z) for z in prompts])
    if np.any(traces <= 0):
        raise InvalidArgumentError("prompt with zero total uncertainty; stabilize first")
    inverse = 1.0 / traces
    return PromptWeights(class_id, inverse / inverse.sum())


def stabilize_prompts(prompts: Sequence[GaussianEmbedding], eps_cov: float) -> List[GaussianEmbedding]:
    """Sigma_n <- Sigma_n + eps_cov * I"""
    if not eps_cov > 0:
        raise InvalidArgumentError(f"eps_cov must be positive, got {eps_cov!r}")
    return [GaussianEmbedding.from_variance(z.id, z.mu, z.variance + eps_cov, normalized=z.normalized)
            for z in prompts]


def penalized_log_posterior(log_dens: np.ndarray, pi: PromptWeights, alpha: float) -> float:
    """Mixture log-likelihood plus the Dirichlet log-prior (up to its normalizer)"""
    log_pi = _log_pi(pi.pi)
    value = float(np.sum(logsumexp(log_dens + log_pi[None, :], axis=1)))
    if alpha != 1.0:
        value += (alpha - 1.0) * float(np.sum(log_pi[pi.pi > 0]))
    return value


def collect_observations(class_prompt_mix: GaussianEmbedding, image_pool: Sequence[GaussianEmbedding],
                         cfg: BprwConfig, seed: int, labels: Optional[Sequence[str]] = None,
                         class_id: Optional[str] = None, stream: int = 0) -> Observations:
    """
    Sample point embeddings that represent one class.

    Zero-shot (labels is None): the cfg.m pool images nearest to the class
    mix by CSD, cfg.k draws each. Few-shot: every pool image labeled
    `class_id`, ceil(cfg.total_points / K_true) draws each.

    Args:
        class_prompt_mix: Ensemble embedding of the class prompts
        image_pool: Candidate image embeddings
        cfg: Sampling counts
        seed: Base seed; image of rank r draws from make_rng(seed, stream * 2^32 + r)
        labels: Class id per pool image (few-shot mode)
        class_id: Class to collect in few-shot mode
        stream: Stream index, one per class
    """
    if not image_pool:
        raise InvalidArgumentError("image pool is empty")
    check_same_dim(class_prompt_mix, *image_pool)
    if labels is None:
        m = cfg.m
        if len(image_pool) < m:
            logger.warning(f"only {len(image_pool)} pool images for M={m}; shrinking M")
            m = len(image_pool)
        distances = pairwise_csd([class_prompt_mix], image_pool)[0]
        selected = np.argsort(distances, kind="stable")[:m]
        per_image = cfg.k
    else:
        if len(labels) != len(image_pool):
            raise InvalidArgumentError(f"{len(labels)} labels for {len(image_pool)} pool images")
        wanted = class_id if class_id is not None else class_prompt_mix.id
        selected = np.array([i for i, label in enumerate(labels) if label == wanted], dtype=int)
        if selected.size == 0:
            raise InvalidArgumentError(f"no labeled images for class '{wanted}'")
        per_image = math.ceil(cfg.total_points / selected.size)
    draws = []
    for rank, index in enumerate(selected):
        rng = make_rng(seed, offset=stream * CLASS_STREAM_STRIDE + rank)
        draws.append(image_pool[int(index)].sample(rng, per_image))
    logger.debug(f"collected {len(selected)} x {per_image} observations for '{class_prompt_mix.id}'")
    return Observations(np.concatenate(draws, axis=0))


def run_bprw(prompts: Sequence[GaussianEmbedding], obs: Observations, cfg: BprwConfig,
             class_id: str = "") -> BprwResult:
    """
    MAP-EM over the mixing proportions of one class.

    Initial weights come from the raw prompts, or from the stabilized
    ones when a raw prompt has zero total uncertainty; densities use the
    prompts after eps_cov stabilization.

    Raises:
        NumericError: penalized log-posterior is non-finite; index is the iteration
    """
    if not prompts:
        raise InvalidArgumentError("run_bprw needs at least one prompt")
    stable = stabilize_prompts(prompts, cfg.eps_cov)
    if all(total_uncertainty(z) > 0 for z in prompts):
        pi = init_weights(prompts, class_id)
    else:
        logger.warning(f"run_bprw '{class_id}': zero-uncertainty prompt, initializing from stabilized prompts")
        pi = init_weights(stable, class_id)
    log_dens = log_densities(obs, stable)

    trace = [penalized_log_posterior(log_dens, pi, cfg.alpha)]
    converged = False
    degenerate = 0
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        responsibilities = e_step(obs, stable, pi, log_dens=log_dens)
        degenerate += responsibilities.degenerate_rows
        updated = m_step(responsibilities.gamma, cfg.alpha, class_id)
        value = penalized_log_posterior(log_dens, updated, cfg.alpha)
        if not math.isfinite(value):
            raise NumericError(f"non-finite log-posterior at iteration {iteration}", index=iteration)
        trace.append(value)
        delta = float(np.max(np.abs(updated.pi - pi.pi)))
        pi = updated
        if delta < cfg.tol:
            converged = True
            break
    if not converged:
        logger.warning(f"BPRW for '{class_id}' did not converge in {cfg.max_iters} iterations")
    logger.debug(f"BPRW '{class_id}': {iteration} iterations, pi={np.round(pi.pi, 4).tolist()}")
    return BprwResult(weights=pi, log_posterior=trace, converged=converged,
                      iterations=iteration, degenerate_rows=degenerate)


def reweight_classes(class_prompts: Dict[str, Sequence[GaussianEmbedding]],
                     image_pool: Sequence[GaussianEmbedding], cfg: BprwConfig, seed: int,
                     labels: Optional[Sequence[str]] = None) -> Dict[str, BprwResult]:
    """
    Run observation collection and EM for every class.

    Classes are processed in key order; class i samples from stream i.
    """
    results = {}
    for stream, class_id in enumerate(sorted(class_prompts)):
        prompts = list(class_prompts[class_id])
        mix = mix_prompts(prompts, id=class_id)
        obs = collect_observations(mix, image_pool, cfg, seed, labels=labels,
                                   class_id=class_id, stream=stream)
        results[class_id] = run_bprw(prompts, obs, cfg, class_id=class_id)
        logger.info(f"{class_id}: pi={np.round(results[class_id].weights.pi, 4).tolist()} "
                    f"after {results[class_id].iterations} iterations")
    return results
