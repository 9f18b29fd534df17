#!/usr/bin/env python3
"""
Oracle-versus-analytic acceptance suite.

Each check pits an analytic quantity from gauss_core / prob_losses / bprw
against an independent reference from oracles and reports pass/fail with
a short detail string. `gikit oracle-check` renders the records as a table.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from bprw import BprwConfig, Observations, PromptWeights, log_densities, m_step, penalized_log_posterior, run_bprw
from gauss_core import GaussianEmbedding, LossParams, csd, csd_similarity, make_rng
from oracles import (
    QuadratureConfig,
    finite_diff_grad,
    mc_csd,
    mc_kl_to_standard_normal,
    quadrature_log_inc,
)
from prob_losses import (
    INC_LOG_CONSTANT,
    PairBatch,
    flat_objective,
    inc_measure,
    inclusion_hypothesis,
    objective_grad,
    ppcl,
    vib_loss,
)

logger = logging.getLogger(__name__)

GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-6
STD_ERRORS = 3.0

# offsets keep the random streams of different checks apart
_STREAM_INCLUSION = 1
_STREAM_GRADIENT = 2
_STREAM_ALGEBRA = 3
_STREAM_CSD = 4
_STREAM_KL = 5
_STREAM_EM = 6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _random_embedding(rng: np.random.Generator, id: str, dim: int, normalized: bool = False,
                      log_var_range=(-2.0, 0.0)) -> GaussianEmbedding:
    mu = rng.standard_normal(dim)
    log_var = rng.uniform(*log_var_range, size=dim)
    if normalized:
        return GaussianEmbedding.l2_normalized(id, mu, log_var)
    return GaussianEmbedding(id=id, mu=mu, log_var=log_var)


def check_inclusion_oracle(seed: int, draws: int = 50) -> CheckResult:
    """inc_measure tracks the quadrature log-integral up to a fixed constant"""
    rng = make_rng(seed, _STREAM_INCLUSION)
    cfg = QuadratureConfig()
    offsets = []
    for i in range(draws):
        mu1, mu2 = rng.uniform(-3.0, 3.0, size=2)
        var1, var2 = rng.uniform(0.05, 5.0, size=2)
        z1 = GaussianEmbedding.from_variance(f"a{i}", [mu1], [var1])
        z2 = GaussianEmbedding.from_variance(f"b{i}", [mu2], [var2])
        offsets.append(quadrature_log_inc(mu1, var1, mu2, var2, cfg) - inc_measure(z1, z2, 1.0))
    offsets = np.array(offsets)
    spread = float(np.ptp(offsets))
    constant_gap = float(np.max(np.abs(offsets - INC_LOG_CONSTANT)))
    standard = math.exp(quadrature_log_inc(0.0, 1.0, 0.0, 1.0, cfg))
    closed_form = 1.0 / (2.0 * math.sqrt(3.0) * math.pi)
    rel = abs(standard - closed_form) / closed_form
    passed = spread < 1e-6 and constant_gap < 1e-6 and rel < 1e-6
    return CheckResult("inclusion_vs_quadrature", passed,
                       f"spread={spread:.2e} const_gap={constant_gap:.2e} phi3_rel={rel:.2e}")


def check_quadrature_convergence() -> CheckResult:
    """Doubling the grid moves the estimate by < 1e-8 and nesting is asymmetric"""
    cfg = QuadratureConfig()
    fine = cfg.doubled()
    worst = 0.0
    for mu1, var1, mu2, var2 in ((0.0, 1.0, 0.0, 1.0), (0.5, 0.25, -1.0, 4.0), (2.0, 3.0, 1.0, 0.1)):
        coarse_value = math.exp(quadrature_log_inc(mu1, var1, mu2, var2, cfg))
        fine_value = math.exp(quadrature_log_inc(mu1, var1, mu2, var2, fine))
        worst = max(worst, abs(coarse_value - fine_value) / fine_value)
    nested = quadrature_log_inc(0.0, 0.25, 0.0, 4.0, cfg) > quadrature_log_inc(0.0, 4.0, 0.0, 0.25, cfg)
    return CheckResult("quadrature_convergence", worst < 1e-8 and nested,
                       f"doubling_rel={worst:.2e} nested_asymmetric={nested}")


def check_hypothesis_signs(seed: int) -> CheckResult:
    """H > 0 on a nested grid, antisymmetric on random pairs, zero on identical pairs"""
    failures = 0
    for dim in (1, 4):
        for var1 in np.linspace(0.05, 2.0, 10):
            for ratio in np.linspace(1.1, 10.0, 5):
                mu = np.linspace(-1.0, 1.0, dim)
                z1 = GaussianEmbedding.from_variance("narrow", mu, np.full(dim, var1))
                z2 = GaussianEmbedding.from_variance("wide", mu, np.full(dim, var1 * ratio))
                if not inclusion_hypothesis(z1, z2, math.exp(-10.0)) > 0:
                    failures += 1
    rng = make_rng(seed, _STREAM_INCLUSION)
    worst_anti = 0.0
    self_values = []
    for i in range(100):
        z1 = _random_embedding(rng, f"p{i}", 8)
        z2 = _random_embedding(rng, f"q{i}", 8)
        worst_anti = max(worst_anti, abs(inclusion_hypothesis(z1, z2, 1.0) + inclusion_hypothesis(z2, z1, 1.0)))
        self_values.append(inclusion_hypothesis(z1, z1, 1.0))
    identical_zero = all(value == 0.0 for value in self_values)
    passed = failures == 0 and worst_anti < 1e-10 and identical_zero
    return CheckResult("hypothesis_signs", passed,
                       f"nested_failures={failures}/100 antisym={worst_anti:.1e} H(Z,Z)=0:{identical_zero}")


def random_batch(rng: np.random.Generator, dim: int) -> PairBatch:
    """Three images, three texts, one masked variant of each modality"""
    raw_mu = rng.standard_normal((8, dim))
    log_var = rng.uniform(-2.0, 0.0, size=(8, dim))
    labels = np.where(rng.uniform(size=(3, 3)) < 0.5, 1.0, -1.0)
    labels[0, 0] = 1.0
    return PairBatch(raw_mu=raw_mu, log_var=log_var, image_rows=[0, 1, 2], text_rows=[3, 4, 5],
                     labels=labels, masked=[[0, 6], [3, 7]])


def gradient_mismatch(batch: PairBatch, params: LossParams, step: float = 1e-5) -> float:
    """Largest violation of |analytic - fd| <= rtol |fd| + atol, as a ratio (<= 1 passes)"""
    f, x0 = flat_objective(batch, params)
    numeric = finite_diff_grad(f, x0, step)
    analytic = objective_grad(batch, params).flat()
    bound = GRAD_RTOL * np.abs(numeric) + GRAD_ATOL
    return float(np.max(np.abs(analytic - numeric) / bound))


def check_gradients(seed: int, batches: int = 20) -> CheckResult:
    rng = make_rng(seed, _STREAM_GRADIENT)
    worst = 0.0
    for _ in range(batches):
        dim = int(rng.integers(2, 17))
        params = LossParams(a=float(rng.uniform(2.0, 10.0)), b=float(rng.uniform(-5.0, 5.0)), c=2.0,
                            eps_inc=1.0, alpha1=0.5, alpha2=0.5, beta=0.1)
        worst = max(worst, gradient_mismatch(random_batch(rng, dim), params))
    return CheckResult("objective_gradients", worst <= 1.0,
                       f"{batches} batches, worst tolerance ratio={worst:.3f}")


def check_loss_algebra(seed: int) -> CheckResult:
    """ppcl at zero logit and the cosine identity of CSD"""
    rng = make_rng(seed, _STREAM_ALGEBRA)
    # orthogonal point embeddings give s = 0 up to the floor variance
    v = GaussianEmbedding.l2_normalized("v", [1.0, 0.0], [-30.0, -30.0])
    t = GaussianEmbedding.l2_normalized("t", [0.0, 1.0], [-30.0, -30.0])
    zero_logit = abs(ppcl(v, t, 1, 1.0, 0.0) - math.log(2.0))
    worst = 0.0
    for i in range(1000):
        z1 = _random_embedding(rng, f"u{i}", 8, normalized=True, log_var_range=(-6.0, -1.0))
        z2 = _random_embedding(rng, f"w{i}", 8, normalized=True, log_var_range=(-6.0, -1.0))
        worst = max(worst, abs(csd_similarity(z1, z2) - (1.0 - 0.5 * csd(z1, z2))))
    passed = zero_logit < 1e-12 and worst < 1e-12
    return CheckResult("loss_algebra", passed, f"ln2_err={zero_logit:.1e} cosine_identity={worst:.1e}")


def check_csd_monte_carlo(seed: int, samples: int, pairs: int = 10) -> CheckResult:
    rng = make_rng(seed, _STREAM_CSD)
    worst = 0.0
    for i in range(pairs):
        z1 = _random_embedding(rng, f"x{i}", 4, log_var_range=(-2.0, 0.5))
        z2 = _random_embedding(rng, f"y{i}", 4, log_var_range=(-2.0, 0.5))
        estimate = mc_csd(z1, z2, samples, seed=seed + i)
        worst = max(worst, abs(estimate.estimate - csd(z1, z2)) / estimate.std_error)
    return CheckResult("csd_vs_monte_carlo", worst < STD_ERRORS,
                       f"{pairs} pairs, n={samples}, worst={worst:.2f} std errors")


def check_vib_monte_carlo(seed: int, samples: int, count: int = 20) -> CheckResult:
    rng = make_rng(seed, _STREAM_KL)
    worst = 0.0
    for i in range(count):
        z = _random_embedding(rng, f"k{i}", 3, log_var_range=(-1.0, 1.0))
        estimate = mc_kl_to_standard_normal(z, max(samples, 100_000), seed=seed + i)
        worst = max(worst, abs(estimate.estimate - vib_loss(z)) / estimate.std_error)
    return CheckResult("vib_vs_monte_carlo", worst < STD_ERRORS,
                       f"{count} embeddings, worst={worst:.2f} std errors")


def separated_instance(seed: int):
    """Two far-apart prompts and 100 observations drawn around the first"""
    rng = make_rng(seed, _STREAM_EM)
    prompts = [
        GaussianEmbedding.from_variance("near", [0.0, 0.0], [0.5, 0.5]),
        GaussianEmbedding.from_variance("far", [10.0, 10.0], [0.5, 0.5]),
    ]
    points = rng.standard_normal((100, 2)) * math.sqrt(0.5)
    return prompts, Observations(points)


def grid_argmax(log_dens: np.ndarray, alpha: float, resolution: float = 1e-3) -> float:
    """pi_1 maximizing the penalized log-likelihood over a two-component simplex grid"""
    best_value, best_pi = -math.inf, 0.0
    for pi1 in np.arange(resolution, 1.0, resolution):
        value = penalized_log_posterior(log_dens, PromptWeights("grid", [pi1, 1.0 - pi1]), alpha)
        if value > best_value:
            best_value, best_pi = value, float(pi1)
    return best_pi


def check_em(seed: int, instances: int = 20) -> CheckResult:
    gamma = make_rng(seed, _STREAM_EM).dirichlet(np.ones(3), size=40)
    counts = gamma.sum(axis=0)
    ml_exact = bool(np.all(m_step(gamma, 1.0).pi == counts / gamma.shape[0]))

    rng = make_rng(seed, _STREAM_EM + 100)
    worst_drop = 0.0
    for i in range(instances):
        n_prompts = int(rng.integers(2, 5))
        prompts = [_random_embedding(rng, f"c{i}/{n}", 3, log_var_range=(-1.0, 0.5)) for n in range(n_prompts)]
        points = rng.standard_normal((30, 3)) * 1.5
        for alpha in (2.0, 5.0):
            result = run_bprw(prompts, Observations(points), BprwConfig(alpha=alpha, max_iters=100))
            steps = np.diff(result.log_posterior)
            if steps.size:
                worst_drop = max(worst_drop, float(-steps.min()))

    prompts, obs = separated_instance(seed)
    cfg = BprwConfig(alpha=2.0)
    result = run_bprw(prompts, obs, cfg)
    grid_pi = grid_argmax(log_densities(obs, [
        GaussianEmbedding.from_variance(z.id, z.mu, z.variance + cfg.eps_cov) for z in prompts
    ]), cfg.alpha)
    em_pi = float(result.weights.pi[0])
    passed = ml_exact and worst_drop <= 1e-9 and em_pi > 0.9 and abs(em_pi - grid_pi) <= 1e-3
    return CheckResult("bprw_em", passed,
                       f"ml_exact={ml_exact} max_drop={worst_drop:.1e} pi1={em_pi:.4f} grid={grid_pi:.3f}")


def run_suite(seed: int = 0, mc_samples: int = 1_000_000) -> List[CheckResult]:
    """Run every check and return its record, timing each"""
    checks: List[Callable[[], CheckResult]] = [
        lambda: check_inclusion_oracle(seed),
        check_quadrature_convergence,
        lambda: check_hypothesis_signs(seed),
        lambda: check_gradients(seed),
        lambda: check_loss_algebra(seed),
        lambda: check_csd_monte_carlo(seed, mc_samples),
        lambda: check_vib_monte_carlo(seed, mc_samples),
        lambda: check_em(seed),
    ]
    results = []
    for check in checks:
        start = time.perf_counter()
        result = check()
        elapsed = time.perf_counter() - start
        result = CheckResult(result.name, result.passed, result.detail, round(elapsed, 3))
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"{result.name}: {'PASS' if result.passed else 'FAIL'} ({result.detail})")
        results.append(result)
    return results
