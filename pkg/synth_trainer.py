#!/usr/bin/env python3
"""
Synthetic corpora and free-parameter training.

Images and texts are sets of latent attributes; a text matches an image
when its attributes are a subset of the image's, which gives the
many-to-many regime (general texts match many images, attribute-rich
images match many texts). Masked variants drop most of an item's
attributes. The trainer fits one Gaussian per item by plain gradient
descent on the composite objective; no encoder is involved.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import CorpusGenerationError, InvalidArgumentError, NumericError
from gauss_core import LOG_VAR_FLOOR, GaussianEmbedding, LossParams, make_rng, pairwise_csd
from prob_losses import PairBatch, inclusion_hypothesis, objective_and_grad

logger = logging.getLogger(__name__)

IMAGE = "image"
TEXT = "text"
MASKED_SUFFIX = "#masked"

MIN_DENSITY = 0.02
MAX_DENSITY = 0.5
MAX_ATTEMPTS = 100
A_FLOOR = 1e-3
# fraction of steps allowed to raise the loss before the monitor warns
UPTICK_TOLERANCE = 0.05


@dataclass(frozen=True)
class CorpusItem:
    id: str
    attributes: Tuple[int, ...]


@dataclass(frozen=True)
class MaskedLink:
    original_id: str
    masked_id: str
    modality: str


@dataclass(frozen=True, eq=False)
class SyntheticCorpus:
    """
    Attribute-set corpus.

    `match[i, j]` is True iff the attributes of texts[j] are a subset of
    those of images[i]. `masked_items` holds the masked variants named by
    `masked_links`, in the same order.
    """
    images: List[CorpusItem]
    texts: List[CorpusItem]
    match: np.ndarray
    masked_items: List[CorpusItem] = field(default_factory=list)
    masked_links: List[MaskedLink] = field(default_factory=list)
    n_attributes: int = 0
    mask_pair_fraction: float = 0.125
    mask_ratio: float = 0.75
    seed: int = 0

    def __post_init__(self):
        match = np.array(self.match, dtype=bool)
        if match.shape != (len(self.images), len(self.texts)):
            raise InvalidArgumentError(
                f"match shape {match.shape} != ({len(self.images)}, {len(self.texts)})"
            )
        if len(self.masked_items) != len(self.masked_links):
            raise InvalidArgumentError("masked_items and masked_links differ in length")
        match.setflags(write=False)
        object.__setattr__(self, "match", match)

    @property
    def density(self) -> float:
        return float(self.match.mean())

    @property
    def null_text_ids(self) -> List[str]:
        return [t.id for t in self.texts if not t.attributes]

    def item_ids(self) -> List[str]:
        """Row order of an embedding table: images, texts, then masked variants"""
        return [i.id for i in self.images] + [t.id for t in self.texts] + [m.id for m in self.masked_items]

    def modalities(self) -> List[str]:
        by_id = {link.masked_id: link.modality for link in self.masked_links}
        return [IMAGE] * len(self.images) + [TEXT] * len(self.texts) + [by_id[m.id] for m in self.masked_items]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_attributes": self.n_attributes,
            "seed": self.seed,
            "mask_pair_fraction": self.mask_pair_fraction,
            "mask_ratio": self.mask_ratio,
            "images": [{"id": i.id, "attributes": list(i.attributes)} for i in self.images],
            "texts": [{"id": t.id, "attributes": list(t.attributes)} for t in self.texts],
            "masked": [
                {"id": m.id, "original_id": link.original_id, "modality": link.modality,
                 "attributes": list(m.attributes)}
                for m, link in zip(self.masked_items, self.masked_links)
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SyntheticCorpus":
        images = [CorpusItem(d["id"], tuple(d["attributes"])) for d in data["images"]]
        texts = [CorpusItem(d["id"], tuple(d["attributes"])) for d in data["texts"]]
        masked = data.get("masked", [])
        return cls(
            images=images,
            texts=texts,
            match=containment_matrix(images, texts),
            masked_items=[CorpusItem(d["id"], tuple(d["attributes"])) for d in masked],
            masked_links=[MaskedLink(d["original_id"], d["id"], d["modality"]) for d in masked],
            n_attributes=int(data.get("n_attributes", 0)),
            mask_pair_fraction=float(data.get("mask_pair_fraction", 0.125)),
            mask_ratio=float(data.get("mask_ratio", 0.75)),
            seed=int(data.get("seed", 0)),
        )


def containment_matrix(images: Sequence[CorpusItem], texts: Sequence[CorpusItem]) -> np.ndarray:
    """match[i, j] = attributes(texts[j]) is a subset of attributes(images[i])"""
    return np.array([[set(t.attributes) <= set(i.attributes) for t in texts] for i in images],
                    dtype=bool).reshape(len(images), len(texts))


def _draw_image(rng: np.random.Generator, n_attributes: int) -> Tuple[int, ...]:
    chosen = np.flatnonzero(rng.uniform(size=n_attributes) < 0.5)
    if chosen.size < 2:
        chosen = np.sort(rng.choice(n_attributes, size=2, replace=False))
    return tuple(int(a) for a in chosen)


def _draw_text(rng: np.random.Generator, images: Sequence[CorpusItem]) -> Tuple[int, ...]:
    source = images[int(rng.integers(len(images)))].attributes
    size = int(rng.integers(1, min(3, len(source)) + 1))
    return tuple(sorted(int(a) for a in rng.choice(source, size=size, replace=False)))


def _mask(rng: np.random.Generator, attributes: Tuple[int, ...], mask_ratio: float) -> Tuple[int, ...]:
    keep = min(int(math.floor(len(attributes) * (1.0 - mask_ratio))), len(attributes) - 1)
    if keep <= 0:
        return ()
    return tuple(sorted(int(a) for a in rng.choice(attributes, size=keep, replace=False)))


def _masked_variants(rng: np.random.Generator, items: Sequence[CorpusItem], modality: str,
                     mask_pair_fraction: float, mask_ratio: float):
    eligible = [i for i, item in enumerate(items) if item.attributes]
    if not eligible:
        return [], []
    count = min(len(eligible), max(1, math.ceil(mask_pair_fraction * len(items))))
    chosen = sorted(int(i) for i in rng.choice(eligible, size=count, replace=False))
    masked, links = [], []
    for index in chosen:
        original = items[index]
        masked_id = original.id + MASKED_SUFFIX
        masked.append(CorpusItem(masked_id, _mask(rng, original.attributes, mask_ratio)))
        links.append(MaskedLink(original.id, masked_id, modality))
    return masked, links


def _is_many_to_many(match: np.ndarray) -> bool:
    return bool(np.any(match.sum(axis=0) >= 2) and np.any(match.sum(axis=1) >= 2))


def generate_corpus(n_images: int, n_texts: int, n_attributes: int, seed: int,
                    mask_pair_fraction: float = 0.125, mask_ratio: float = 0.75,
                    include_null_text: bool = False) -> SyntheticCorpus:
    """
    Generate a many-to-many attribute corpus.

    Each image holds every attribute with probability 1/2 (at least two);
    each text copies one to three attributes of a random image, so it
    matches that image and any other image holding them. Attempt k draws
    from stream (seed, k); the first attempt whose match density lies in
    [0.02, 0.5] and which is many-to-many is returned.

    Args:
        n_images: Number of images, at least 2
        n_texts: Number of texts, at least 2
        n_attributes: Size of the attribute vocabulary, at least 4
        seed: Generation seed
        mask_pair_fraction: Share of items per modality given a masked variant
        mask_ratio: Share of attributes a masked variant drops
        include_null_text: Make the first text the empty (maximally general) text

    Raises:
        CorpusGenerationError: no valid corpus within 100 attempts
    """
    if n_attributes < 4:
        raise InvalidArgumentError(f"n_attributes must be >= 4, got {n_attributes}")
    if n_images < 2 or n_texts < 2:
        raise InvalidArgumentError(f"need at least 2 images and 2 texts, got {n_images}, {n_texts}")
    for name, value in (("mask_pair_fraction", mask_pair_fraction), ("mask_ratio", mask_ratio)):
        if not 0 < value <= 1:
            raise InvalidArgumentError(f"{name} must be in (0, 1], got {value}")

    for attempt in range(MAX_ATTEMPTS):
        rng = make_rng(seed, offset=attempt)
        images = [CorpusItem(f"img{i:03d}", _draw_image(rng, n_attributes)) for i in range(n_images)]
        texts = []
        for j in range(n_texts):
            attributes = () if include_null_text and j == 0 else _draw_text(rng, images)
            texts.append(CorpusItem(f"txt{j:03d}", attributes))
        match = containment_matrix(images, texts)
        density = float(match.mean())
        if not (MIN_DENSITY <= density <= MAX_DENSITY and _is_many_to_many(match)):
            logger.debug(f"corpus attempt {attempt}: density {density:.3f} rejected")
            continue
        masked_images, image_links = _masked_variants(rng, images, IMAGE, mask_pair_fraction, mask_ratio)
        masked_texts, text_links = _masked_variants(rng, texts, TEXT, mask_pair_fraction, mask_ratio)
        logger.info(f"corpus: {n_images} images, {n_texts} texts, density {density:.3f}, "
                    f"{len(image_links) + len(text_links)} masked links (attempt {attempt})")
        return SyntheticCorpus(
            images=images,
            texts=texts,
            match=match,
            masked_items=masked_images + masked_texts,
            masked_links=image_links + text_links,
            n_attributes=n_attributes,
            mask_pair_fraction=mask_pair_fraction,
            mask_ratio=mask_ratio,
            seed=seed,
        )
    raise CorpusGenerationError(
        f"no corpus with density in [{MIN_DENSITY}, {MAX_DENSITY}] and many-to-many matches "
        f"after {MAX_ATTEMPTS} attempts"
    )


@dataclass(frozen=True)
class TrainerConfig:
    """
    Gradient-descent settings for the free-parameter trainer.

    `steps=0` returns the initialization unchanged.
    """
    dim: int = 16
    learning_rate: float = 1e-3
    steps: int = 200
    batch_size: int = 32
    mask_pair_fraction: float = 0.125
    mask_ratio: float = 0.75
    init_log_var: float = -10.0
    init_a: float = 10.0
    init_b: float = -10.0
    loss: LossParams = field(default_factory=LossParams)
    seed: int = 0
    name: str = "default"

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim must be >= 1, got {self.dim}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InvalidArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.steps < 0:
            raise InvalidArgumentError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise InvalidArgumentError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("mask_pair_fraction", "mask_ratio"):
            if not 0 < getattr(self, name) <= 1:
                raise InvalidArgumentError(f"{name} must be in (0, 1], got {getattr(self, name)}")
        if not self.init_a > 0:
            raise InvalidArgumentError(f"init_a must be positive, got {self.init_a}")

    @classmethod
    def from_dict(cls, config: Dict[str, Any], loss: Optional[LossParams] = None) -> "TrainerConfig":
        config = config or {}
        casts = {"dim": int, "learning_rate": float, "steps": int, "batch_size": int,
                 "mask_pair_fraction": float, "mask_ratio": float, "init_log_var": float,
                 "init_a": float, "init_b": float, "seed": int, "name": str}
        kwargs = {k: cast(config[k]) for k, cast in casts.items() if config.get(k) is not None}
        if loss is not None:
            kwargs["loss"] = loss
        return cls(**kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name, "dim": self.dim, "learning_rate": self.learning_rate,
            "steps": self.steps, "batch_size": self.batch_size,
            "mask_pair_fraction": self.mask_pair_fraction, "mask_ratio": self.mask_ratio,
            "init_log_var": self.init_log_var, "init_a": self.init_a, "init_b": self.init_b,
            "seed": self.seed, "loss": self.loss.to_dict(),
        }


@dataclass(eq=False)
class EmbeddingTable:
    """
    Trainable parameters: one raw mean and log-variance row per item plus
    the contrastive scalars a and b. Rows follow `ids`.
    """
    ids: List[str]
    modalities: List[str]
    raw_mu: np.ndarray
    log_var: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        self.raw_mu = np.array(self.raw_mu, dtype=np.float64)
        self.log_var = np.array(self.log_var, dtype=np.float64)
        if self.raw_mu.shape != self.log_var.shape or self.raw_mu.shape[0] != len(self.ids):
            raise InvalidArgumentError("table arrays do not match the id list")
        if len(self.modalities) != len(self.ids):
            raise InvalidArgumentError("one modality per id is required")
        self._rows = {item_id: row for row, item_id in enumerate(self.ids)}
        if len(self._rows) != len(self.ids):
            raise InvalidArgumentError("duplicate ids in embedding table")

    @property
    def dim(self) -> int:
        return int(self.raw_mu.shape[1])

    def row(self, item_id: str) -> int:
        try:
            return self._rows[item_id]
        except KeyError:
            raise InvalidArgumentError(f"unknown item id '{item_id}'") from None

    def rows(self, item_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.row(i) for i in item_ids], dtype=int)

    def embedding(self, item_id: str) -> GaussianEmbedding:
        """L2-normalized view of one row"""
        r = self.row(item_id)
        return GaussianEmbedding.l2_normalized(item_id, self.raw_mu[r], self.log_var[r])

    def embeddings(self, item_ids: Optional[Sequence[str]] = None) -> List[GaussianEmbedding]:
        return [self.embedding(i) for i in (self.ids if item_ids is None else item_ids)]


@dataclass(frozen=True)
class TraceRecord:
    """Objective terms at the start of a step, before its update"""
    step: int
    total: float
    ppcl: float
    inc_vt: float
    inc_mask: float
    vib: float

    def as_dict(self) -> Dict[str, float]:
        return {"step": self.step, "total": self.total, "ppcl": self.ppcl,
                "inc_vt": self.inc_vt, "inc_mask": self.inc_mask, "vib": self.vib}


TRACE_COLUMNS = ["step", "total", "ppcl", "inc_vt", "inc_mask", "vib"]


@dataclass
class TrainingResult:
    table: EmbeddingTable
    trace: List[TraceRecord] = field(default_factory=list)
    upticks: int = 0


def init_table(corpus: SyntheticCorpus, cfg: TrainerConfig) -> EmbeddingTable:
    """Raw means from N(0, I) on stream (seed, 0); log-variances at cfg.init_log_var"""
    ids = corpus.item_ids()
    rng = make_rng(cfg.seed, offset=0)
    return EmbeddingTable(
        ids=ids,
        modalities=corpus.modalities(),
        raw_mu=rng.standard_normal((len(ids), cfg.dim)),
        log_var=np.full((len(ids), cfg.dim), float(cfg.init_log_var)),
        a=float(cfg.init_a),
        b=float(cfg.init_b),
    )


def _check_compatible(corpus: SyntheticCorpus, cfg: TrainerConfig) -> None:
    if (abs(corpus.mask_pair_fraction - cfg.mask_pair_fraction) > 1e-12
            or abs(corpus.mask_ratio - cfg.mask_ratio) > 1e-12):
        raise InvalidArgumentError(
            f"config '{cfg.name}' masks {cfg.mask_pair_fraction}/{cfg.mask_ratio} but the corpus was "
            f"generated with {corpus.mask_pair_fraction}/{corpus.mask_ratio}"
        )


def minibatches(corpus: SyntheticCorpus, cfg: TrainerConfig, epoch: int):
    """
    Index chunks of one epoch.

    Images and texts are shuffled on stream (seed, 1 + epoch) and split into
    the same number of chunks, about `batch_size` items each.

    Returns:
        List of (image index array, text index array)
    """
    n_img, n_txt = len(corpus.images), len(corpus.texts)
    chunks = min(max(1, math.ceil(max(n_img, n_txt) / cfg.batch_size)), n_img, n_txt)
    rng = make_rng(cfg.seed, offset=1 + epoch)
    image_perm = rng.permutation(n_img)
    text_perm = rng.permutation(n_txt)
    return list(zip(np.array_split(image_perm, chunks), np.array_split(text_perm, chunks)))


def build_batch(table: EmbeddingTable, corpus: SyntheticCorpus, image_idx: np.ndarray,
                text_idx: np.ndarray) -> Tuple[PairBatch, np.ndarray]:
    """
    PairBatch over a sub-table holding the chosen items and the masked
    variants of those items.

    Returns:
        (batch, table rows backing the batch rows)
    """
    image_ids = [corpus.images[i].id for i in image_idx]
    text_ids = [corpus.texts[j].id for j in text_idx]
    in_batch = set(image_ids) | set(text_ids)
    links = [link for link in corpus.masked_links if link.original_id in in_batch]
    rows = np.concatenate([
        table.rows(image_ids), table.rows(text_ids), table.rows([link.masked_id for link in links])
    ]).astype(int)
    local = {item_id: k for k, item_id in enumerate(image_ids + text_ids + [link.masked_id for link in links])}
    labels = np.where(corpus.match[np.ix_(image_idx, text_idx)], 1.0, -1.0)
    batch = PairBatch(
        raw_mu=table.raw_mu[rows],
        log_var=table.log_var[rows],
        image_rows=np.arange(len(image_ids)),
        text_rows=np.arange(len(image_ids), len(image_ids) + len(text_ids)),
        labels=labels,
        masked=np.array([[local[link.original_id], local[link.masked_id]] for link in links], dtype=int).reshape(-1, 2),
    )
    return batch, rows


def _loss_params(cfg: TrainerConfig, a: float, b: float) -> LossParams:
    return replace(cfg.loss, a=a, b=b)


def _first_bad_term(breakdown) -> str:
    for name, value in breakdown.as_dict().items():
        if name != "total" and not math.isfinite(value):
            return name
    return "total"


def train(corpus: SyntheticCorpus, cfg: TrainerConfig) -> TrainingResult:
    """
    Plain gradient descent on the composite objective.

    Each step evaluates one minibatch, records its loss terms, then moves
    every parameter by -learning_rate * gradient. a is clamped to >= 1e-3
    and log-variances to the floor.

    Raises:
        NumericError: non-finite loss; index is the step, the message names the term
    """
    _check_compatible(corpus, cfg)
    table = init_table(corpus, cfg)
    result = TrainingResult(table=table)
    if cfg.steps == 0:
        return result

    logger.info(f"training '{cfg.name}': {cfg.steps} steps, lr={cfg.learning_rate}, dim={cfg.dim}")
    schedule: List[Tuple[np.ndarray, np.ndarray]] = []
    epoch = 0
    previous = math.inf
    for step in range(cfg.steps):
        if not schedule:
            schedule = minibatches(corpus, cfg, epoch)
            epoch += 1
        image_idx, text_idx = schedule.pop(0)
        batch, rows = build_batch(table, corpus, image_idx, text_idx)
        breakdown, grad = objective_and_grad(batch, _loss_params(cfg, table.a, table.b))
        if not math.isfinite(breakdown.total):
            term = _first_bad_term(breakdown)
            raise NumericError(f"non-finite loss at step {step} (term '{term}')", index=step)
        result.trace.append(TraceRecord(step=step, **breakdown.as_dict()))
        if breakdown.total > previous:
            result.upticks += 1
            logger.debug(f"step {step}: loss rose {previous:.6g} -> {breakdown.total:.6g}")
        previous = breakdown.total

        table.raw_mu[rows] -= cfg.learning_rate * grad.raw_mu
        table.log_var[rows] = np.maximum(table.log_var[rows] - cfg.learning_rate * grad.log_var, LOG_VAR_FLOOR)
        table.a = max(table.a - cfg.learning_rate * grad.a, A_FLOOR)
        table.b = table.b - cfg.learning_rate * grad.b

        if step % 100 == 0:
            logger.debug(f"step {step}: total={breakdown.total:.6g} a={table.a:.4g} b={table.b:.4g}")

    if result.upticks > UPTICK_TOLERANCE * cfg.steps:
        logger.warning(f"'{cfg.name}': loss increased on {result.upticks} of {cfg.steps} steps")
    logger.info(f"'{cfg.name}' done: final step loss {result.trace[-1].total:.6g}")
    return result


def full_objective(table: EmbeddingTable, corpus: SyntheticCorpus, params: LossParams):
    """Objective over the whole corpus at the table's current a and b"""
    batch, _ = build_batch(table, corpus, np.arange(len(corpus.images)), np.arange(len(corpus.texts)))
    breakdown, _ = objective_and_grad(batch, replace(params, a=table.a, b=table.b), with_grad=False)
    return breakdown


def mean_variance(table: EmbeddingTable, item_ids: Sequence[str]) -> float:
    """Mean over items of the mean per-dimension variance"""
    if not item_ids:
        return 0.0
    return float(np.mean(np.exp(table.log_var[table.rows(item_ids)])))


def masked_inclusion_fraction(table: EmbeddingTable, corpus: SyntheticCorpus, eps_inc: float) -> float:
    """Share of masked links with H(original in masked) > 0"""
    if not corpus.masked_links:
        return 0.0
    hits = sum(
        inclusion_hypothesis(table.embedding(link.original_id), table.embedding(link.masked_id), eps_inc) > 0
        for link in corpus.masked_links
    )
    return hits / len(corpus.masked_links)


def retrieval_accuracy(table: EmbeddingTable, corpus: SyntheticCorpus) -> float:
    """Top-1 nearest text by CSD is a match, over images with at least one match"""
    has_match = np.flatnonzero(corpus.match.any(axis=1))
    if has_match.size == 0:
        return 0.0
    images = table.embeddings([corpus.images[i].id for i in has_match])
    texts = table.embeddings([t.id for t in corpus.texts])
    nearest = np.argmin(pairwise_csd(images, texts), axis=1)
    return float(np.mean(corpus.match[has_match, nearest]))


SPECIFICITY_COLUMNS = ["n_attributes", "n_texts", "mean_var_text"]


def variance_by_specificity(table: EmbeddingTable, corpus: SyntheticCorpus) -> List[Dict[str, Any]]:
    """
    Mean text variance grouped by attribute count, fewest attributes first.

    Fewer attributes means a more general text; the null text, if any,
    forms the zero-attribute group. Masked variants are left out.
    """
    groups: Dict[int, List[str]] = {}
    for text in corpus.texts:
        groups.setdefault(len(text.attributes), []).append(text.id)
    return [{"n_attributes": n, "n_texts": len(ids), "mean_var_text": mean_variance(table, ids)}
            for n, ids in sorted(groups.items())]


@dataclass(frozen=True)
class AblationRow:
    name: str
    final_loss: float
    mean_var_image: float
    mean_var_text: float
    mask_satisfaction: float
    retrieval_accuracy: float
    steps: int

    def as_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "final_loss": self.final_loss, "mean_var_image": self.mean_var_image,
                "mean_var_text": self.mean_var_text, "mask_satisfaction": self.mask_satisfaction,
                "retrieval_accuracy": self.retrieval_accuracy, "steps": self.steps}


ABLATION_COLUMNS = ["name", "final_loss", "mean_var_image", "mean_var_text",
                    "mask_satisfaction", "retrieval_accuracy", "steps"]


def summarize_run(corpus: SyntheticCorpus, cfg: TrainerConfig, result: TrainingResult) -> AblationRow:
    table = result.table
    return AblationRow(
        name=cfg.name,
        final_loss=full_objective(table, corpus, cfg.loss).total,
        mean_var_image=mean_variance(table, [i.id for i in corpus.images]),
        mean_var_text=mean_variance(table, [t.id for t in corpus.texts]),
        mask_satisfaction=masked_inclusion_fraction(table, corpus, cfg.loss.eps_inc),
        retrieval_accuracy=retrieval_accuracy(table, corpus),
        steps=cfg.steps,
    )


def ablation_report(corpus: SyntheticCorpus, cfg_list: Sequence[TrainerConfig]) -> List[AblationRow]:
    """
    Train once per config on the same corpus and summarize each run.

    Raises:
        InvalidArgumentError: fewer than two configs, or a config whose
            masking parameters differ from the corpus's
    """
    if len(cfg_list) < 2:
        raise InvalidArgumentError(f"ablation needs at least 2 configs, got {len(cfg_list)}")
    for cfg in cfg_list:
        _check_compatible(corpus, cfg)
    rows = []
    for cfg in cfg_list:
        rows.append(summarize_run(corpus, cfg, train(corpus, cfg)))
        logger.info(f"ablation '{cfg.name}': {rows[-1].as_dict()}")
    return rows


@dataclass(frozen=True)
class HierarchyCorpus:
    """
    Nested caption levels with one image per most specific caption.

    `ground_truth[image_id]` lists caption ids from most general to most
    specific; `pairs` are (specific, general) caption embeddings of
    adjacent levels.
    """
    captions: List[GaussianEmbedding]
    images: List[GaussianEmbedding]
    null_text: GaussianEmbedding
    ground_truth: Dict[str, List[str]]
    pairs: List[Tuple[GaussianEmbedding, GaussianEmbedding]]


HIERARCHY_VARIANCE = {"general": 0.05, "mid": 0.025, "specific": 0.0125, "image": 0.00625, "null": 0.5}


def generate_hierarchy(branches: int = 2, leaves: int = 2) -> HierarchyCorpus:
    """
    Three caption levels on orthogonal basis directions.

    With D = 2 + branches + branches * leaves: the general caption sits
    on e0, mid caption m on normalize(e0 + e_m), specific caption (m, j)
    on normalize(e0 + e_m + e_(m, j)); the null text sits on the last
    axis. Variances halve at each level down, and each image shares its
    specific caption's mean with half that variance.
    """
    if branches < 1 or leaves < 1:
        raise InvalidArgumentError(f"branches and leaves must be >= 1, got {branches}, {leaves}")
    dim = 2 + branches + branches * leaves
    eye = np.eye(dim)

    def caption(id: str, mu: np.ndarray, level: str) -> GaussianEmbedding:
        return GaussianEmbedding.l2_normalized(id, mu, np.full(dim, math.log(HIERARCHY_VARIANCE[level])))

    general = caption("general", eye[0], "general")
    mids, specifics, images = [], [], []
    ground_truth: Dict[str, List[str]] = {}
    pairs = []
    for m in range(branches):
        mid = caption(f"mid{m}", eye[0] + eye[1 + m], "mid")
        mids.append(mid)
        pairs.append((mid, general))
        for j in range(leaves):
            axis = 1 + branches + m * leaves + j
            spec = caption(f"spec{m}.{j}", eye[0] + eye[1 + m] + eye[axis], "specific")
            specifics.append(spec)
            pairs.append((spec, mid))
            image = GaussianEmbedding(id=f"image{m}.{j}", mu=spec.mu,
                                      log_var=np.full(dim, math.log(HIERARCHY_VARIANCE["image"])),
                                      normalized=True)
            images.append(image)
            ground_truth[image.id] = [general.id, mid.id, spec.id]
    null_text = caption("null", eye[dim - 1], "null")
    return HierarchyCorpus(captions=[general] + mids + specifics, images=images,
                           null_text=null_text, ground_truth=ground_truth, pairs=pairs)
