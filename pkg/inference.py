#!/usr/bin/env python3
"""
Uncertainty-aware inference over Gaussian embeddings.

Zero-shot classification against prompt ensembles, uncertainty-based
prompt filtering, inclusion-root discovery, root-to-caption traversal and
hierarchy inclusion scoring.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InvalidArgumentError
from gauss_core import (
    DEFAULT_EPS_LOG,
    GaussianEmbedding,
    check_same_dim,
    mix_prompts,
    pairwise_csd,
    total_uncertainty,
    weighted_mix,
)
from prob_losses import inclusion_hypothesis

logger = logging.getLogger(__name__)

DEFAULT_EPS_INC = math.exp(DEFAULT_EPS_LOG)
SIGMA_STATS = "sigma_stats"
TOP_K = "top_k"
ROOT_INCLUSION = "inclusion"
ROOT_NULL = "null"


@dataclass(frozen=True)
class ClassPromptSet:
    """Prompts of one class and the class embedding built from them"""
    class_id: str
    prompts: List[GaussianEmbedding]
    mixed: GaussianEmbedding

    @classmethod
    def from_prompts(cls, class_id: str, prompts: Sequence[GaussianEmbedding],
                     renormalize: bool = False) -> "ClassPromptSet":
        prompts = list(prompts)
        return cls(class_id, prompts, mix_prompts(prompts, renormalize=renormalize, id=class_id))

    @classmethod
    def from_weights(cls, class_id: str, prompts: Sequence[GaussianEmbedding], weights,
                     independent_sum: bool = False) -> "ClassPromptSet":
        """Class embedding as the weighted mix of its prompts (e.g. re-weighted by BPRW)"""
        prompts = list(prompts)
        return cls(class_id, prompts,
                   weighted_mix(prompts, weights, independent_sum=independent_sum, id=class_id))


@dataclass(frozen=True)
class ZscResult:
    class_id: str
    index: int
    scores: Dict[str, float]


def zsc_classify(image: GaussianEmbedding, classes: Sequence[ClassPromptSet]) -> ZscResult:
    """
    Nearest class embedding by CSD.

    Returns:
        ZscResult with the winning class, its index and every class's CSD;
        ties go to the lowest index
    """
    if not classes:
        raise InvalidArgumentError("zsc_classify needs at least one class")
    check_same_dim(image, *(c.mixed for c in classes))
    scores = pairwise_csd([image], [c.mixed for c in classes])[0]
    best = int(np.argmin(scores))
    return ZscResult(classes[best].class_id, best, {c.class_id: float(s) for c, s in zip(classes, scores)})


def filter_prompts(prompts: Sequence[GaussianEmbedding], strategy: str = SIGMA_STATS,
                   k: Optional[int] = None, n_std: float = 1.0) -> List[GaussianEmbedding]:
    """
    Drop high-uncertainty prompts.

    sigma_stats keeps prompts with tr(Sigma) <= mean + n_std * std of the set;
    top_k keeps the k lowest-uncertainty prompts. Input order is preserved
    and the result is never empty.
    """
    if not prompts:
        raise InvalidArgumentError("filter_prompts needs at least one prompt")
    traces = np.array([total_uncertainty(z) for z in prompts])
    if strategy == SIGMA_STATS:
        threshold = traces.mean() + n_std * traces.std()
        tolerance = 1e-12 * max(1.0, abs(float(traces.mean())))
        keep = np.flatnonzero(traces <= threshold + tolerance)
    elif strategy == TOP_K:
        if k is None or not 1 <= k <= len(prompts):
            raise InvalidArgumentError(f"top_k needs 1 <= k <= {len(prompts)}, got {k!r}")
        keep = np.sort(np.argsort(traces, kind="stable")[:k])
    else:
        raise InvalidArgumentError(f"unknown filter strategy '{strategy}'")
    if keep.size == 0:
        keep = np.array([int(np.argmin(traces))])
    if keep.size < len(prompts):
        logger.debug(f"filter_prompts[{strategy}]: kept {keep.size} of {len(prompts)}")
    return [prompts[int(i)] for i in keep]


def inclusion_scores(image: GaussianEmbedding, caption_pool: Sequence[GaussianEmbedding],
                     eps_inc: float = DEFAULT_EPS_INC) -> np.ndarray:
    """H(image in caption) for every caption"""
    return np.array([inclusion_hypothesis(image, caption, eps_inc) for caption in caption_pool])


def find_root(image: GaussianEmbedding, caption_pool: Sequence[GaussianEmbedding],
              eps_inc: float = DEFAULT_EPS_INC) -> str:
    """Caption that most includes the image (argmax H, lowest index on ties)"""
    return caption_pool[_root_index(image, caption_pool, eps_inc)].id


def _root_index(image, caption_pool, eps_inc) -> int:
    if not caption_pool:
        raise InvalidArgumentError("caption pool is empty")
    return int(np.argmax(inclusion_scores(image, caption_pool, eps_inc)))


def blend_root(root: GaussianEmbedding, null_text: GaussianEmbedding) -> GaussianEmbedding:
    """Average of the root caption and the null text"""
    return mix_prompts([root, null_text], id=f"{root.id}+{null_text.id}")


@dataclass(frozen=True)
class TraversalPath:
    """
    Captions retrieved along the root-to-target interpolation.

    `steps` keeps every (t, caption_id), duplicates included;
    `unique_captions` keeps first appearances in order.
    """
    image_id: str
    steps: List[Tuple[float, str]]
    unique_captions: List[str]
    root_id: str
    target_id: str

    def to_dict(self) -> Dict:
        return {"image_id": self.image_id, "root_id": self.root_id, "target_id": self.target_id,
                "steps": [[t, c] for t, c in self.steps], "unique_captions": list(self.unique_captions)}


def _interpolants(root: GaussianEmbedding, target: GaussianEmbedding, ts: np.ndarray,
                  image_id: str) -> List[GaussianEmbedding]:
    mus = (1.0 - ts)[:, None] * root.mu[None, :] + ts[:, None] * target.mu[None, :]
    log_vars = (1.0 - ts)[:, None] * root.log_var[None, :] + ts[:, None] * target.log_var[None, :]
    interpolants = []
    # a zero mean (antipodal endpoints) keeps the previous direction, or the target's at t=0
    direction = target.mu
    for t, mu, lv in zip(ts, mus, log_vars):
        if np.linalg.norm(mu) > 0.0:
            direction = mu
        interpolants.append(GaussianEmbedding.l2_normalized(f"{image_id}@{t:.6f}", direction, lv))
    return interpolants


def traverse(image: GaussianEmbedding, caption_pool: Sequence[GaussianEmbedding],
             null_text: GaussianEmbedding, steps: int = 50, eps_inc: float = DEFAULT_EPS_INC,
             root_mode: str = ROOT_INCLUSION) -> TraversalPath:
    """
    Walk from a root embedding to the image's nearest caption.

    The target is the caption nearest the image by CSD. The root is the
    blend of the most-including caption with the null text
    (root_mode="inclusion"), or the null text alone (root_mode="null").
    At each of `steps` equally spaced t the interpolant (means linear then
    renormalized, log-variances linear) retrieves its nearest caption by
    CSD; at t=1 the interpolant is the target itself.

    Args:
        image: Query image embedding
        caption_pool: Candidate captions
        null_text: Embedding of the empty caption
        steps: Number of interpolation points, at least 2
        eps_inc: Inclusion epsilon used to find the root
        root_mode: "inclusion" or "null"
    """
    if steps < 2:
        raise InvalidArgumentError(f"steps must be >= 2, got {steps}")
    if not caption_pool:
        raise InvalidArgumentError("caption pool is empty")
    check_same_dim(image, null_text, *caption_pool)

    target_index = int(np.argmin(pairwise_csd([image], caption_pool)[0]))
    target = caption_pool[target_index]
    if root_mode == ROOT_INCLUSION:
        root_caption = caption_pool[_root_index(image, caption_pool, eps_inc)]
        root, root_id = blend_root(root_caption, null_text), root_caption.id
    elif root_mode == ROOT_NULL:
        root, root_id = null_text, null_text.id
    else:
        raise InvalidArgumentError(f"unknown root mode '{root_mode}'")

    ts = np.linspace(0.0, 1.0, steps)
    interior = _interpolants(root, target, ts[:-1], image.id)
    nearest = np.argmin(pairwise_csd(interior, caption_pool), axis=1)
    retrieved = [caption_pool[int(i)].id for i in nearest] + [target.id]
    path = [(float(t), caption_id) for t, caption_id in zip(ts, retrieved)]
    unique = list(dict.fromkeys(retrieved))
    logger.debug(f"traverse {image.id} [{root_mode}]: {' -> '.join(unique)}")
    return TraversalPath(image_id=image.id, steps=path, unique_captions=unique,
                         root_id=root_id, target_id=target.id)


@dataclass(frozen=True)
class HierarchyEval:
    fraction: float
    h_values: List[float]
    histogram_counts: List[int] = field(default_factory=list)
    histogram_edges: List[float] = field(default_factory=list)


def eval_hierarchy_inclusion(pairs: Sequence[Tuple[GaussianEmbedding, GaussianEmbedding]],
                             eps_inc: float = DEFAULT_EPS_INC, bins: int = 10) -> HierarchyEval:
    """Share of (specific, general) pairs with H(specific in general) > 0, plus the H histogram"""
    if not pairs:
        raise InvalidArgumentError("eval_hierarchy_inclusion needs at least one pair")
    h = np.array([inclusion_hypothesis(specific, general, eps_inc) for specific, general in pairs])
    counts, edges = np.histogram(h, bins=bins)
    return HierarchyEval(
        fraction=float(np.count_nonzero(h > 0)) / h.size,
        h_values=h.tolist(),
        histogram_counts=counts.tolist(),
        histogram_edges=edges.tolist(),
    )


@dataclass(frozen=True)
class TraversalMetrics:
    precision: float
    recall: float
    root_recall: float

    def as_dict(self) -> Dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "root_recall": self.root_recall}


def traversal_metrics(paths: Sequence[TraversalPath],
                      ground_truth: Dict[str, Sequence[str]]) -> TraversalMetrics:
    """
    Mean per-path precision and recall of unique captions against the
    ground-truth levels, and the share of paths whose root is the most
    general ground-truth caption.

    Args:
        paths: Traversal results
        ground_truth: image_id -> caption ids ordered general to specific
    """
    if not paths:
        raise InvalidArgumentError("traversal_metrics needs at least one path")
    precision, recall, root_hits = [], [], 0
    for path in paths:
        if path.image_id not in ground_truth or not ground_truth[path.image_id]:
            raise InvalidArgumentError(f"no ground truth for image '{path.image_id}'")
        truth = list(ground_truth[path.image_id])
        found = set(path.unique_captions) & set(truth)
        precision.append(len(found) / len(path.unique_captions))
        recall.append(len(found) / len(set(truth)))
        root_hits += path.root_id == truth[0]
    return TraversalMetrics(float(np.mean(precision)), float(np.mean(recall)), root_hits / len(paths))
