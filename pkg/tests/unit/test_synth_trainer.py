#!/usr/bin/env python3
"""
Unit tests for synthetic corpora and the free-parameter trainer.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from errors import CorpusGenerationError, InvalidArgumentError
from gauss_core import LossParams, total_uncertainty
from prob_losses import objective_and_grad
from synth_trainer import (
    ABLATION_COLUMNS,
    HIERARCHY_VARIANCE,
    SPECIFICITY_COLUMNS,
    EmbeddingTable,
    SyntheticCorpus,
    TrainerConfig,
    ablation_report,
    build_batch,
    containment_matrix,
    generate_corpus,
    generate_hierarchy,
    init_table,
    masked_inclusion_fraction,
    mean_variance,
    minibatches,
    retrieval_accuracy,
    train,
    variance_by_specificity,
)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(32, 32, 8, seed=0)


def attribute_sets(items):
    return {item.id: set(item.attributes) for item in items}


class TestGenerateCorpus:
    def test_deterministic(self, corpus):
        again = generate_corpus(32, 32, 8, seed=0)
        assert again.to_dict() == corpus.to_dict()
        np.testing.assert_array_equal(again.match, corpus.match)

    def test_seed_changes_corpus(self, corpus):
        assert generate_corpus(32, 32, 8, seed=1).to_dict() != corpus.to_dict()

    def test_match_is_attribute_containment(self, corpus):
        images = attribute_sets(corpus.images)
        texts = attribute_sets(corpus.texts)
        for i, image in enumerate(corpus.images):
            for j, text in enumerate(corpus.texts):
                assert corpus.match[i, j] == (texts[text.id] <= images[image.id])

    def test_density_and_many_to_many(self, corpus):
        assert 0.02 <= corpus.density <= 0.5
        assert corpus.match.sum(axis=0).max() >= 2
        assert corpus.match.sum(axis=1).max() >= 2

    def test_masked_variants_are_strict_subsets(self, corpus):
        originals = {**attribute_sets(corpus.images), **attribute_sets(corpus.texts)}
        assert corpus.masked_links
        for item, link in zip(corpus.masked_items, corpus.masked_links):
            assert link.masked_id == item.id
            assert set(item.attributes) < originals[link.original_id]
        modalities = {link.modality for link in corpus.masked_links}
        assert modalities == {"image", "text"}

    def test_mask_pair_fraction(self, corpus):
        image_links = [link for link in corpus.masked_links if link.modality == "image"]
        assert len(image_links) == math.ceil(0.125 * 32)

    def test_null_text_matches_every_image(self):
        corpus = generate_corpus(16, 8, 6, seed=3, include_null_text=True)
        assert corpus.null_text_ids == ["txt000"]
        assert corpus.match[:, 0].all()

    def test_dict_round_trip(self, corpus):
        restored = SyntheticCorpus.from_dict(corpus.to_dict())
        assert restored.to_dict() == corpus.to_dict()
        np.testing.assert_array_equal(restored.match, corpus.match)

    @pytest.mark.parametrize("args", [(1, 8, 8), (8, 1, 8), (8, 8, 3)])
    def test_invalid_sizes(self, args):
        with pytest.raises(InvalidArgumentError):
            generate_corpus(*args, seed=0)

    def test_infeasible_density(self):
        # two images and two texts cannot be many-to-many below density 0.5
        with pytest.raises(CorpusGenerationError):
            generate_corpus(2, 2, 4, seed=0)


class TestContainment:
    def test_empty_text_matches_all(self, corpus):
        from synth_trainer import CorpusItem
        match = containment_matrix(corpus.images, [CorpusItem("empty", ())])
        assert match.all()


class TestTrainerConfig:
    def test_defaults(self):
        cfg = TrainerConfig()
        assert (cfg.init_log_var, cfg.init_a, cfg.init_b) == (-10.0, 10.0, -10.0)
        assert (cfg.mask_pair_fraction, cfg.mask_ratio) == (0.125, 0.75)

    def test_from_dict(self):
        loss = LossParams(alpha1=0.5)
        cfg = TrainerConfig.from_dict({"steps": "5", "dim": 4, "unknown": 1}, loss=loss)
        assert cfg.steps == 5 and cfg.dim == 4 and cfg.loss is loss

    @pytest.mark.parametrize("kwargs", [{"dim": 0}, {"learning_rate": 0.0}, {"steps": -1},
                                        {"mask_ratio": 0.0}, {"mask_pair_fraction": 1.5}, {"init_a": 0.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            TrainerConfig(**kwargs)


class TestTable:
    def test_init(self, corpus):
        table = init_table(corpus, TrainerConfig(dim=6))
        assert table.ids == corpus.item_ids()
        assert table.log_var.shape == (len(table.ids), 6)
        z = table.embedding("img000")
        assert z.normalized
        np.testing.assert_allclose(z.variance, math.exp(-10.0))

    def test_unknown_id(self, corpus):
        with pytest.raises(InvalidArgumentError):
            init_table(corpus, TrainerConfig()).row("nope")

    def test_duplicate_ids(self):
        with pytest.raises(InvalidArgumentError):
            EmbeddingTable(["a", "a"], ["image", "text"], np.ones((2, 2)), np.zeros((2, 2)), 1.0, 0.0)


class TestTraining:
    def test_zero_steps_returns_initialization(self, corpus):
        result = train(corpus, TrainerConfig(steps=0))
        assert result.trace == []
        np.testing.assert_array_equal(result.table.log_var, -10.0)
        assert total_uncertainty(result.table.embedding("txt000")) == pytest.approx(16 * math.exp(-10))

    def test_deterministic(self, corpus):
        cfg = TrainerConfig(steps=20)
        first, second = train(corpus, cfg), train(corpus, cfg)
        np.testing.assert_array_equal(first.table.raw_mu, second.table.raw_mu)
        np.testing.assert_array_equal(first.table.log_var, second.table.log_var)
        assert [r.as_dict() for r in first.trace] == [r.as_dict() for r in second.trace]

    def test_trace_terms_sum_to_total(self, corpus):
        result = train(corpus, TrainerConfig(steps=10, loss=LossParams(alpha1=0.5, alpha2=0.5, beta=0.1)))
        assert len(result.trace) == 10
        for record in result.trace:
            parts = record.ppcl + record.inc_vt + record.inc_mask + record.vib
            assert record.total == pytest.approx(parts, abs=1e-8)

    def test_single_step_is_plain_gradient_descent(self, corpus):
        cfg = TrainerConfig(steps=1, batch_size=8, learning_rate=1e-2)
        start = init_table(corpus, cfg)
        image_idx, text_idx = minibatches(corpus, cfg, 0)[0]
        batch, rows = build_batch(start, corpus, image_idx, text_idx)
        _, grad = objective_and_grad(batch, replace(cfg.loss, a=start.a, b=start.b))

        table = train(corpus, cfg).table
        expected_mu = start.raw_mu.copy()
        expected_mu[rows] -= cfg.learning_rate * grad.raw_mu
        expected_lv = start.log_var.copy()
        expected_lv[rows] -= cfg.learning_rate * grad.log_var
        np.testing.assert_array_equal(table.raw_mu, expected_mu)
        np.testing.assert_array_equal(table.log_var, expected_lv)
        assert table.a == start.a - cfg.learning_rate * grad.a
        assert table.b == start.b - cfg.learning_rate * grad.b

    def test_minibatches_cover_epoch(self, corpus):
        chunks = minibatches(corpus, TrainerConfig(batch_size=8), 0)
        assert len(chunks) == 4
        assert sorted(np.concatenate([i for i, _ in chunks]).tolist()) == list(range(32))
        assert sorted(np.concatenate([j for _, j in chunks]).tolist()) == list(range(32))

    def test_loss_mostly_decreases(self, corpus):
        result = train(corpus, TrainerConfig(steps=200, learning_rate=1e-3))
        assert result.upticks <= 0.05 * 200
        assert result.trace[-1].total < result.trace[0].total

    def test_matched_inclusion_widens_texts(self, corpus):
        cfg = TrainerConfig(steps=200, loss=LossParams(alpha1=1.0))
        table = train(corpus, cfg).table
        images = mean_variance(table, [i.id for i in corpus.images])
        texts = mean_variance(table, [t.id for t in corpus.texts])
        assert texts > images

    def test_masked_inclusion_is_learned(self, corpus):
        without = train(corpus, TrainerConfig(steps=200, loss=LossParams(alpha2=0.0))).table
        with_mask = train(corpus, TrainerConfig(steps=200, loss=LossParams(alpha2=1.0))).table
        eps = LossParams().eps_inc
        baseline = masked_inclusion_fraction(without, corpus, eps)
        learned = masked_inclusion_fraction(with_mask, corpus, eps)
        assert learned > baseline
        assert learned >= 0.7

    def test_mismatched_masking_rejected(self, corpus):
        with pytest.raises(InvalidArgumentError):
            train(corpus, TrainerConfig(steps=1, mask_ratio=0.5))


class TestAblation:
    def test_rows(self, corpus):
        configs = [TrainerConfig(steps=5, name="a"), TrainerConfig(steps=5, name="b", loss=LossParams(alpha1=1.0))]
        rows = ablation_report(corpus, configs)
        assert [r.name for r in rows] == ["a", "b"]
        assert list(rows[0].as_dict()) == ABLATION_COLUMNS
        assert 0.0 <= rows[0].retrieval_accuracy <= 1.0

    def test_identical_configs_identical_rows(self, corpus):
        cfg = TrainerConfig(steps=5)
        rows = ablation_report(corpus, [cfg, cfg])
        assert rows[0] == rows[1]

    def test_needs_two_configs(self, corpus):
        with pytest.raises(InvalidArgumentError):
            ablation_report(corpus, [TrainerConfig(steps=1)])


class TestVarianceBySpecificity:
    def test_groups_by_attribute_count(self, corpus):
        table = init_table(corpus, TrainerConfig())
        for text in corpus.texts:
            table.log_var[table.row(text.id)] = -float(len(text.attributes))
        rows = variance_by_specificity(table, corpus)
        assert list(rows[0]) == SPECIFICITY_COLUMNS
        counts = [r["n_attributes"] for r in rows]
        assert counts == sorted(set(len(t.attributes) for t in corpus.texts))
        assert sum(r["n_texts"] for r in rows) == len(corpus.texts)
        for row in rows:
            assert row["mean_var_text"] == pytest.approx(math.exp(-row["n_attributes"]))

    def test_null_text_is_its_own_group(self):
        corpus = generate_corpus(16, 8, 6, seed=3, include_null_text=True)
        rows = variance_by_specificity(init_table(corpus, TrainerConfig()), corpus)
        assert rows[0]["n_attributes"] == 0
        assert rows[0]["n_texts"] == 1


@pytest.mark.slow
class TestPinnedTraining:
    """2000-step runs on the 32x32 seed-0 corpus"""

    @pytest.fixture(scope="class")
    def runs(self, corpus):
        return {alpha1: train(corpus, TrainerConfig(steps=2000, loss=LossParams(alpha1=alpha1))).table
                for alpha1 in (0.0, 1.0)}

    @staticmethod
    def ratio(table, corpus):
        texts = mean_variance(table, [t.id for t in corpus.texts])
        return texts / mean_variance(table, [i.id for i in corpus.images])

    def test_matched_inclusion_widens_texts(self, runs, corpus):
        assert self.ratio(runs[1.0], corpus) > 1.0

    def test_baseline_ratio_not_larger(self, runs, corpus):
        assert self.ratio(runs[0.0], corpus) <= self.ratio(runs[1.0], corpus)

    def test_masked_links_included(self, runs, corpus):
        assert masked_inclusion_fraction(runs[1.0], corpus, LossParams().eps_inc) >= 0.7

    def test_general_texts_are_wider(self, runs, corpus):
        rows = variance_by_specificity(runs[1.0], corpus)
        assert len(rows) >= 2
        assert rows[0]["mean_var_text"] > rows[-1]["mean_var_text"]

    def test_retrieval_beats_chance(self, corpus):
        table = train(corpus, TrainerConfig(steps=2000, learning_rate=5e-3)).table
        assert retrieval_accuracy(table, corpus) >= 3 * corpus.density


class TestHierarchy:
    def test_structure(self):
        h = generate_hierarchy(2, 3)
        assert [c.id for c in h.captions][:3] == ["general", "mid0", "mid1"]
        assert len(h.captions) == 1 + 2 + 6
        assert len(h.images) == 6
        assert h.ground_truth["image1.2"] == ["general", "mid1", "spec1.2"]
        assert len(h.pairs) == 2 + 6

    def test_variances_halve_down_the_levels(self):
        h = generate_hierarchy()
        by_id = {c.id: c for c in h.captions}
        assert by_id["general"].variance[0] == pytest.approx(HIERARCHY_VARIANCE["general"])
        assert by_id["spec0.1"].variance[0] == pytest.approx(HIERARCHY_VARIANCE["specific"])
        assert h.images[0].variance[0] == pytest.approx(HIERARCHY_VARIANCE["image"])
        assert all(z.normalized for z in h.captions + h.images)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            generate_hierarchy(0, 2)
