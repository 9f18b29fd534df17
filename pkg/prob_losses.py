#!/usr/bin/env python3
"""
Probabilistic losses over diagonal-Gaussian embeddings.

Covers the pairwise contrastive loss on the CSD cosine logit, the Gaussian
inclusion measure log(int p1^2 p2), the antisymmetric inclusion hypothesis,
the inclusion loss, the VIB regularizer, and the composite objective with
analytic gradients w.r.t. raw means, log-variances and the logit scalars.

The inclusion measure uses the coefficients of the direct integral
derivation: per dimension

    -log v1 - 0.5 log v2 - 0.5 log A + B^2/(4A) - C,   v = sigma^2 / eps_inc

which differs from the measure's printed form (-2 log sigma1^2 - log sigma2^2)
by a factor of two on the log-variance terms. Quadrature agrees with the
former; the printed form stays available through `printed_coefficients=True`.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from errors import InvalidArgumentError, NumericError
from gauss_core import (
    GaussianEmbedding,
    LossParams,
    check_same_dim,
    csd_similarity,
    project_through_normalization,
    unit_rows,
)

logger = logging.getLogger(__name__)

# per-dimension constant dropped from inc_measure: 0.5 log(pi) - 1.5 log(2 pi)
INC_LOG_CONSTANT = 0.5 * math.log(math.pi) - 1.5 * math.log(2.0 * math.pi)


class MatchLabel(IntEnum):
    MATCH = 1
    MISMATCH = -1


def softplus(x):
    """log(1 + e^x) as max(x, 0) + log1p(exp(-|x|))"""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class InclusionCoefficients:
    """Per-dimension A, B, C of the inclusion integral, eps-stabilized"""
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def inclusion_coefficients(z1: GaussianEmbedding, z2: GaussianEmbedding,
                           eps_inc: float) -> InclusionCoefficients:
    check_same_dim(z1, z2)
    _check_eps(eps_inc)
    prec1 = eps_inc / z1.variance
    prec2 = eps_inc / z2.variance
    return InclusionCoefficients(
        A=prec1 + 0.5 * prec2,
        B=2.0 * z1.mu * prec1 + z2.mu * prec2,
        C=z1.mu ** 2 * prec1 + 0.5 * z2.mu ** 2 * prec2,
    )


def _check_eps(eps_inc: float) -> None:
    if not (math.isfinite(eps_inc) and eps_inc > 0):
        raise InvalidArgumentError(f"eps_inc must be positive, got {eps_inc!r}")


def _inclusion_terms(mu1: np.ndarray, lv1: np.ndarray, mu2: np.ndarray, lv2: np.ndarray,
                     eps_inc: float, printed: bool = False, grad: bool = True):
    """
    Row-wise inclusion measure and its partial derivatives.

    Arrays have shape (..., D); the measure is summed over the last axis.

    Returns:
        (value, d_mu1, d_lv1, d_mu2, d_lv2); gradients are None when grad=False
    """
    p1 = eps_inc * np.exp(-lv1)
    q = 0.5 * eps_inc * np.exp(-lv2)
    area = p1 + q
    k = p1 * q / area
    delta = mu1 - mu2
    delta_sq = delta * delta
    log_eps = math.log(eps_inc)
    w1, w2 = (2.0, 1.0) if printed else (1.0, 0.5)
    # B^2/(4A) - C == -k * delta^2, exact under joint translation
    per_dim = -w1 * (lv1 - log_eps) - w2 * (lv2 - log_eps) - 0.5 * np.log(area) - k * delta_sq
    if not np.all(np.isfinite(per_dim)):
        bad = np.argwhere(~np.isfinite(per_dim))[0]
        raise NumericError(f"non-finite inclusion measure at dimension {int(bad[-1])}",
                           index=int(bad[-1]))
    value = per_dim.sum(axis=-1)
    if not grad:
        return value, None, None, None, None
    area_sq = area * area
    d_lv1 = -w1 + p1 / (2.0 * area) + p1 * q * q * delta_sq / area_sq
    d_lv2 = -w2 + q / (2.0 * area) + q * p1 * p1 * delta_sq / area_sq
    d_mu1 = -2.0 * k * delta
    return value, d_mu1, d_lv1, -d_mu1, d_lv2


def _hypothesis_terms(mu1, lv1, mu2, lv2, eps_inc: float, printed: bool = False):
    """H = inc(1, 2) - inc(2, 1) with gradients w.r.t. both arguments"""
    fwd, f_mu1, f_lv1, f_mu2, f_lv2 = _inclusion_terms(mu1, lv1, mu2, lv2, eps_inc, printed)
    rev, r_mu2, r_lv2, r_mu1, r_lv1 = _inclusion_terms(mu2, lv2, mu1, lv1, eps_inc, printed)
    return fwd - rev, f_mu1 - r_mu1, f_lv1 - r_lv1, f_mu2 - r_mu2, f_lv2 - r_lv2


def inc_measure(z1: GaussianEmbedding, z2: GaussianEmbedding, eps_inc: float,
                printed_coefficients: bool = False) -> float:
    """
    Log inclusion measure log(int p1^2 p2 dx), up to a per-dimension constant.

    Adding `INC_LOG_CONSTANT * D` recovers the exact log-integral of the
    Gaussians with variances sigma^2 / eps_inc.

    Args:
        z1: Included candidate
        z2: Including candidate
        eps_inc: Multiplier applied to every 1/sigma^2
        printed_coefficients: Use -2 log sigma1^2 - log sigma2^2 instead of
            the integral-matched -log sigma1^2 - 0.5 log sigma2^2
    """
    check_same_dim(z1, z2)
    _check_eps(eps_inc)
    value, *_ = _inclusion_terms(z1.mu, z1.log_var, z2.mu, z2.log_var, eps_inc,
                                 printed_coefficients, grad=False)
    return float(value)


def inclusion_hypothesis(z1: GaussianEmbedding, z2: GaussianEmbedding, eps_inc: float,
                         printed_coefficients: bool = False) -> float:
    """H(Z1 in Z2) = inc(z1, z2) - inc(z2, z1); positive when z1 is included in z2"""
    return (inc_measure(z1, z2, eps_inc, printed_coefficients)
            - inc_measure(z2, z1, eps_inc, printed_coefficients))


def inclusion_loss(z1: GaussianEmbedding, z2: GaussianEmbedding, params: LossParams) -> float:
    """softplus(-c * H(Z1 in Z2))"""
    return softplus(-params.c * inclusion_hypothesis(z1, z2, params.eps_inc))


def ppcl(z_v: GaussianEmbedding, z_t: GaussianEmbedding, y: int, a: float, b: float) -> float:
    """
    Pairwise contrastive loss softplus(y * (-a * s + b)), s = csd_similarity.

    Args:
        y: MatchLabel.MATCH (+1) or MatchLabel.MISMATCH (-1)
    """
    try:
        label = MatchLabel(int(y))
    except ValueError:
        raise InvalidArgumentError(f"match label must be +1 or -1, got {y!r}") from None
    if not a > 0:
        raise InvalidArgumentError(f"a must be positive, got {a!r}")
    s = csd_similarity(z_v, z_t)
    return softplus(int(label) * (-a * s + b))


@dataclass(frozen=True)
class VibResult:
    value: float
    degenerate: bool


def vib_result(z: GaussianEmbedding) -> VibResult:
    """
    VIB value with a flag set when any log-variance sits at the floor.

    The value stays finite at the floor but is dominated by -log sigma^2.
    """
    if z.is_degenerate:
        logger.warning(f"vib_loss: embedding '{z.id}' has floor-capped log-variance")
    value = float(0.5 * np.sum(z.mu ** 2 + z.variance - z.log_var - 1.0))
    return VibResult(value=value, degenerate=z.is_degenerate)


def vib_loss(z: GaussianEmbedding) -> float:
    """KL(N(mu, diag sigma^2) || N(0, I)) = 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)"""
    return vib_result(z).value


@dataclass(frozen=True, eq=False)
class PairBatch:
    """
    Index structure of one objective evaluation.

    Rows index a shared parameter table: `raw_mu` holds pre-normalization
    means, `log_var` the log-variances. `labels[i, j]` is +1 when image
    row `image_rows[i]` matches text row `text_rows[j]`, otherwise -1.
    `masked` lists (original_row, masked_row) pairs of either modality.
    """
    raw_mu: np.ndarray
    log_var: np.ndarray
    image_rows: np.ndarray
    text_rows: np.ndarray
    labels: np.ndarray
    masked: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))

    def __post_init__(self):
        raw_mu = np.asarray(self.raw_mu, dtype=np.float64)
        log_var = np.asarray(self.log_var, dtype=np.float64)
        image_rows = np.asarray(self.image_rows, dtype=int).reshape(-1)
        text_rows = np.asarray(self.text_rows, dtype=int).reshape(-1)
        labels = np.asarray(self.labels, dtype=np.float64)
        masked = np.asarray(self.masked, dtype=int).reshape(-1, 2)
        if raw_mu.ndim != 2 or raw_mu.shape != log_var.shape:
            raise InvalidArgumentError(f"raw_mu {raw_mu.shape} and log_var {log_var.shape} must be equal 2-D shapes")
        n = raw_mu.shape[0]
        for name, rows in (("image_rows", image_rows), ("text_rows", text_rows), ("masked", masked)):
            if rows.size and (rows.min() < 0 or rows.max() >= n):
                raise InvalidArgumentError(f"{name} references rows outside 0..{n - 1}")
        if labels.shape != (image_rows.size, text_rows.size):
            raise InvalidArgumentError(
                f"labels shape {labels.shape} != ({image_rows.size}, {text_rows.size})"
            )
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise InvalidArgumentError("labels must be +1 or -1")
        for name, value in (("raw_mu", raw_mu), ("log_var", log_var)):
            if not np.all(np.isfinite(value)):
                raise InvalidArgumentError(f"{name} has non-finite entries")
        object.__setattr__(self, "raw_mu", raw_mu)
        object.__setattr__(self, "log_var", log_var)
        object.__setattr__(self, "image_rows", image_rows)
        object.__setattr__(self, "text_rows", text_rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "masked", masked)

    @property
    def matched(self) -> np.ndarray:
        """(image_row, text_row) pairs with label +1"""
        i, j = np.nonzero(self.labels > 0)
        return np.stack([self.image_rows[i], self.text_rows[j]], axis=1).reshape(-1, 2)

    @classmethod
    def from_embeddings(cls, images: Sequence[GaussianEmbedding], texts: Sequence[GaussianEmbedding],
                        labels, masked_images: Sequence[Tuple[int, GaussianEmbedding]] = (),
                        masked_texts: Sequence[Tuple[int, GaussianEmbedding]] = ()) -> "PairBatch":
        """
        Build a batch from embeddings.

        Args:
            images, texts: Original embeddings; their means act as raw means
            labels: +1/-1 matrix of shape (len(images), len(texts))
            masked_images: (image index, masked embedding) pairs
            masked_texts: (text index, masked embedding) pairs
        """
        items: List[GaussianEmbedding] = list(images) + list(texts)
        masked_pairs = []
        for offset, pairs in ((0, masked_images), (len(images), masked_texts)):
            for index, z in pairs:
                masked_pairs.append((offset + int(index), len(items)))
                items.append(z)
        check_same_dim(*items)
        return cls(
            raw_mu=np.stack([z.mu for z in items]),
            log_var=np.stack([z.log_var for z in items]),
            image_rows=np.arange(len(images)),
            text_rows=np.arange(len(images), len(images) + len(texts)),
            labels=labels,
            masked=np.array(masked_pairs, dtype=int).reshape(-1, 2),
        )


@dataclass(frozen=True)
class ObjectiveBreakdown:
    """Objective value and its weighted terms; total == sum of the terms"""
    total: float
    ppcl: float
    inc_vt: float
    inc_mask: float
    vib: float

    def as_dict(self) -> Dict[str, float]:
        return {"total": self.total, "ppcl": self.ppcl, "inc_vt": self.inc_vt,
                "inc_mask": self.inc_mask, "vib": self.vib}


@dataclass(frozen=True, eq=False)
class ObjectiveGradient:
    """Partial derivatives of the objective"""
    raw_mu: np.ndarray
    log_var: np.ndarray
    a: float
    b: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.raw_mu.ravel(), self.log_var.ravel(), [self.a, self.b]])


def _pair_inclusion(unit, log_var, pairs: np.ndarray, params: LossParams,
                    g_unit: np.ndarray, g_lv: np.ndarray) -> float:
    """Sum of inclusion losses over (included_row, including_row) pairs; accumulates gradients"""
    if pairs.size == 0:
        return 0.0
    first, second = pairs[:, 0], pairs[:, 1]
    h, d_mu1, d_lv1, d_mu2, d_lv2 = _hypothesis_terms(
        unit[first], log_var[first], unit[second], log_var[second], params.eps_inc
    )
    loss = softplus(-params.c * h)
    # d softplus(-cH)/dH
    dh = (-params.c * expit(-params.c * h))[:, None]
    np.add.at(g_unit, first, dh * d_mu1)
    np.add.at(g_unit, second, dh * d_mu2)
    np.add.at(g_lv, first, dh * d_lv1)
    np.add.at(g_lv, second, dh * d_lv2)
    return float(np.sum(loss))


def objective_and_grad(batch: PairBatch, params: LossParams,
                       with_grad: bool = True) -> Tuple[ObjectiveBreakdown, Optional[ObjectiveGradient]]:
    """
    Evaluate the composite objective and, optionally, its gradient.

    objective = sum over all (v, t) of PPCL
              + alpha1 * sum over matched (v, t) of L_inc(v in t)
              + alpha2 * sum over masked links of L_inc(orig in masked)
              + beta * sum over every row of VIB
    """
    unit, norms = unit_rows(batch.raw_mu)
    log_var = batch.log_var
    var = np.exp(log_var)
    g_unit = np.zeros_like(unit)
    g_lv = np.zeros_like(log_var)

    # pairwise contrastive term
    img, txt = batch.image_rows, batch.text_rows
    trace = var.sum(axis=1)
    sim = unit[img] @ unit[txt].T - 0.5 * (trace[img][:, None] + trace[txt][None, :])
    logits = batch.labels * (-params.a * sim + params.b)
    ppcl_total = float(np.sum(softplus(logits))) if logits.size else 0.0
    slope = batch.labels * expit(logits)
    d_sim = -params.a * slope
    grad_a = float(np.sum(-slope * sim))
    grad_b = float(np.sum(slope))
    np.add.at(g_unit, img, d_sim @ unit[txt])
    np.add.at(g_unit, txt, d_sim.T @ unit[img])
    np.add.at(g_lv, img, -0.5 * var[img] * d_sim.sum(axis=1)[:, None])
    np.add.at(g_lv, txt, -0.5 * var[txt] * d_sim.sum(axis=0)[:, None])

    # inclusion terms, gradients flow through both arguments
    inc_g_unit = np.zeros_like(unit)
    inc_g_lv = np.zeros_like(log_var)
    inc_vt = _pair_inclusion(unit, log_var, batch.matched, params, inc_g_unit, inc_g_lv) \
        if params.alpha1 > 0 else 0.0
    g_unit += params.alpha1 * inc_g_unit
    g_lv += params.alpha1 * inc_g_lv

    inc_g_unit[:] = 0.0
    inc_g_lv[:] = 0.0
    inc_mask = _pair_inclusion(unit, log_var, batch.masked, params, inc_g_unit, inc_g_lv) \
        if params.alpha2 > 0 else 0.0
    g_unit += params.alpha2 * inc_g_unit
    g_lv += params.alpha2 * inc_g_lv

    vib = 0.0
    if params.beta > 0:
        vib = float(0.5 * np.sum(unit ** 2 + var - log_var - 1.0))
        g_unit += params.beta * unit
        g_lv += params.beta * 0.5 * (var - 1.0)

    terms = (ppcl_total, params.alpha1 * inc_vt, params.alpha2 * inc_mask, params.beta * vib)
    breakdown = ObjectiveBreakdown(total=math.fsum(terms), ppcl=terms[0], inc_vt=terms[1],
                                   inc_mask=terms[2], vib=terms[3])
    if not with_grad:
        return breakdown, None
    gradient = ObjectiveGradient(
        raw_mu=project_through_normalization(g_unit, unit, norms),
        log_var=g_lv,
        a=grad_a,
        b=grad_b,
    )
    return breakdown, gradient


def total_objective(batch: PairBatch, params: LossParams) -> ObjectiveBreakdown:
    """Composite objective value with its per-term breakdown"""
    breakdown, _ = objective_and_grad(batch, params, with_grad=False)
    return breakdown


def objective_grad(batch: PairBatch, params: LossParams) -> ObjectiveGradient:
    """Gradient of `total_objective` w.r.t. raw means, log-variances, a and b"""
    _, gradient = objective_and_grad(batch, params)
    return gradient


def batch_with(batch: PairBatch, raw_mu: np.ndarray, log_var: np.ndarray) -> PairBatch:
    """Copy of `batch` with replaced parameter arrays"""
    return PairBatch(raw_mu=raw_mu, log_var=log_var, image_rows=batch.image_rows,
                     text_rows=batch.text_rows, labels=batch.labels, masked=batch.masked)


def flat_objective(batch: PairBatch, params: LossParams):
    """
    Objective as a function of one flat parameter vector
    [raw_mu.ravel(), log_var.ravel(), a, b], with the starting point.
    """
    shape = batch.raw_mu.shape
    size = batch.raw_mu.size

    def evaluate(x: np.ndarray) -> float:
        raw_mu = x[:size].reshape(shape)
        log_var = x[size:2 * size].reshape(shape)
        trial = LossParams(a=float(x[-2]), b=float(x[-1]), c=params.c, eps_inc=params.eps_inc,
                           alpha1=params.alpha1, alpha2=params.alpha2, beta=params.beta)
        return total_objective(batch_with(batch, raw_mu, log_var), trial).total

    start = np.concatenate([batch.raw_mu.ravel(), batch.log_var.ravel(), [params.a, params.b]])
    return evaluate, start
