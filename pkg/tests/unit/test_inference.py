#!/usr/bin/env python3
"""
Unit tests for zero-shot classification, prompt filtering and traversal.
"""

import numpy as np
import pytest

from errors import InvalidArgumentError
from gauss_core import GaussianEmbedding
from inference import (
    ROOT_INCLUSION,
    ROOT_NULL,
    SIGMA_STATS,
    TOP_K,
    ClassPromptSet,
    blend_root,
    eval_hierarchy_inclusion,
    filter_prompts,
    find_root,
    inclusion_scores,
    traversal_metrics,
    traverse,
    zsc_classify,
)
from synth_trainer import TrainerConfig, generate_corpus, generate_hierarchy, train


def unit(id, mu, variance):
    mu = np.asarray(mu, dtype=float)
    return GaussianEmbedding.from_variance(id, mu / np.linalg.norm(mu), np.full(mu.size, variance),
                                           normalized=True)


@pytest.fixture(scope="module")
def hierarchy():
    return generate_hierarchy(2, 2)


class TestZsc:
    def test_nearest_class(self):
        cat = ClassPromptSet.from_prompts("cat", [unit("c0", [1, 0.1, 0], 0.01), unit("c1", [1, -0.1, 0], 0.01)])
        dog = ClassPromptSet.from_prompts("dog", [unit("d0", [0, 1, 0], 0.01)])
        result = zsc_classify(unit("img", [0.9, 0.1, 0.1], 0.001), [cat, dog])
        assert (result.class_id, result.index) == ("cat", 0)
        assert set(result.scores) == {"cat", "dog"}
        assert result.scores["cat"] < result.scores["dog"]

    def test_class_variance_counts(self):
        # equal mean distance, so the tighter class wins
        wide = ClassPromptSet.from_prompts("wide", [unit("w", [1, 1], 0.5)])
        tight = ClassPromptSet.from_prompts("tight", [unit("t", [1, -1], 0.01)])
        assert zsc_classify(unit("img", [1, 0], 0.01), [wide, tight]).class_id == "tight"

    def test_tie_goes_to_lowest_index(self):
        a = ClassPromptSet.from_prompts("a", [unit("a", [1, 1], 0.1)])
        b = ClassPromptSet.from_prompts("b", [unit("b", [1, -1], 0.1)])
        assert zsc_classify(unit("img", [1, 0], 0.1), [a, b]).class_id == "a"

    def test_weighted_class(self):
        prompts = [unit("p0", [1, 0], 0.1), unit("p1", [0, 1], 0.1)]
        leaning = ClassPromptSet.from_weights("x", prompts, [0.9, 0.1])
        np.testing.assert_allclose(leaning.mixed.mu, [0.9, 0.1])
        assert leaning.mixed.id == "x"

    def test_no_classes(self):
        with pytest.raises(InvalidArgumentError):
            zsc_classify(unit("img", [1, 0], 0.1), [])

    def test_dimension_mismatch(self):
        c = ClassPromptSet.from_prompts("c", [unit("p", [1, 0, 0], 0.1)])
        with pytest.raises(InvalidArgumentError):
            zsc_classify(unit("img", [1, 0], 0.1), [c])


class TestFilterPrompts:
    @pytest.fixture
    def prompts(self):
        return [unit(f"p{i}", [1.0], v) for i, v in enumerate([0.1, 0.1, 0.1, 1.0])]

    def test_sigma_stats_drops_outlier(self, prompts):
        kept = filter_prompts(prompts, SIGMA_STATS)
        assert [z.id for z in kept] == ["p0", "p1", "p2"]

    def test_sigma_stats_equal_uncertainty_keeps_all(self):
        prompts = [unit(f"p{i}", [1.0], 0.3) for i in range(4)]
        assert [z.id for z in filter_prompts(prompts)] == ["p0", "p1", "p2", "p3"]

    def test_never_empty(self, prompts):
        kept = filter_prompts(prompts, SIGMA_STATS, n_std=-10.0)
        assert [z.id for z in kept] == ["p0"]

    def test_top_k_preserves_order(self):
        prompts = [unit(f"p{i}", [1.0], v) for i, v in enumerate([0.3, 0.1, 0.2])]
        assert [z.id for z in filter_prompts(prompts, TOP_K, k=2)] == ["p1", "p2"]

    @pytest.mark.parametrize("k", [None, 0, 5])
    def test_top_k_range(self, prompts, k):
        with pytest.raises(InvalidArgumentError):
            filter_prompts(prompts, TOP_K, k=k)

    def test_unknown_strategy(self, prompts):
        with pytest.raises(InvalidArgumentError):
            filter_prompts(prompts, "median")

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            filter_prompts([])


class TestRoot:
    def test_general_caption_is_root(self, hierarchy):
        for image in hierarchy.images:
            assert find_root(image, hierarchy.captions) == "general"

    def test_root_ignores_pool_order(self, hierarchy):
        image = hierarchy.images[3]
        assert find_root(image, list(reversed(hierarchy.captions))) == find_root(image, hierarchy.captions)

    def test_scores_follow_pool(self, hierarchy):
        scores = inclusion_scores(hierarchy.images[0], hierarchy.captions)
        assert scores.shape == (len(hierarchy.captions),)
        assert int(np.argmax(scores)) == 0

    def test_empty_pool(self, hierarchy):
        with pytest.raises(InvalidArgumentError):
            find_root(hierarchy.images[0], [])

    def test_blend(self, hierarchy):
        general = hierarchy.captions[0]
        blended = blend_root(general, hierarchy.null_text)
        assert blended.id == "general+null"
        np.testing.assert_allclose(blended.mu, (general.mu + hierarchy.null_text.mu) / 2)
        np.testing.assert_allclose(blended.variance, (general.variance + hierarchy.null_text.variance) / 2)


class TestTraverse:
    def test_two_steps(self, hierarchy):
        path = traverse(hierarchy.images[0], hierarchy.captions, hierarchy.null_text, steps=2)
        assert [t for t, _ in path.steps] == [0.0, 1.0]
        assert path.steps[-1][1] == path.target_id == "spec0.0"
        assert path.root_id == "general"

    def test_path_runs_general_to_specific(self, hierarchy):
        for image in hierarchy.images:
            path = traverse(image, hierarchy.captions, hierarchy.null_text)
            truth = hierarchy.ground_truth[image.id]
            assert len(path.steps) == 50
            assert path.unique_captions[-1] == truth[-1]
            positions = [truth.index(c) for c in path.unique_captions]
            assert positions == sorted(positions)

    def test_duplicates_kept_in_steps(self, hierarchy):
        path = traverse(hierarchy.images[0], hierarchy.captions, hierarchy.null_text, steps=20)
        assert len(path.steps) == 20
        assert len(path.unique_captions) < 20
        assert path.unique_captions == list(dict.fromkeys(c for _, c in path.steps))

    def test_null_root(self, hierarchy):
        path = traverse(hierarchy.images[0], hierarchy.captions, hierarchy.null_text, root_mode=ROOT_NULL)
        assert path.root_id == "null"

    def test_antipodal_root_and_target(self):
        # t=0.5 interpolates to a zero mean
        captions = [unit("cap", [1, 0], 0.01), unit("other", [-1, 0], 0.01)]
        path = traverse(unit("img", [1, 0], 0.01), captions, unit("null", [-1, 0], 0.01),
                        steps=3, root_mode=ROOT_NULL)
        assert path.steps == [(0.0, "other"), (0.5, "other"), (1.0, "cap")]
        assert path.unique_captions == ["other", "cap"]

    def test_to_dict(self, hierarchy):
        data = traverse(hierarchy.images[1], hierarchy.captions, hierarchy.null_text, steps=3).to_dict()
        assert data["image_id"] == "image0.1"
        assert data["steps"][0] == [0.0, data["unique_captions"][0]]

    @pytest.mark.parametrize("kwargs", [{"steps": 1}, {"root_mode": "random"}])
    def test_invalid(self, hierarchy, kwargs):
        with pytest.raises(InvalidArgumentError):
            traverse(hierarchy.images[0], hierarchy.captions, hierarchy.null_text, **kwargs)


class TestTraversalMetrics:
    def paths(self, hierarchy, root_mode):
        return [traverse(image, hierarchy.captions, hierarchy.null_text, root_mode=root_mode)
                for image in hierarchy.images]

    def test_inclusion_root_beats_null_root(self, hierarchy):
        with_root = traversal_metrics(self.paths(hierarchy, ROOT_INCLUSION), hierarchy.ground_truth)
        null_only = traversal_metrics(self.paths(hierarchy, ROOT_NULL), hierarchy.ground_truth)
        assert with_root.precision == pytest.approx(1.0)
        assert with_root.root_recall == 1.0
        assert null_only.root_recall == 0.0
        assert with_root.precision > null_only.precision

    def test_hand_built_path(self):
        from inference import TraversalPath
        path = TraversalPath("img", [(0.0, "a"), (0.5, "x"), (1.0, "c")], ["a", "x", "c"], "a", "c")
        metrics = traversal_metrics([path], {"img": ["a", "b", "c"]})
        assert metrics.as_dict() == {"precision": pytest.approx(2 / 3), "recall": pytest.approx(2 / 3),
                                     "root_recall": 1.0}

    def test_missing_ground_truth(self, hierarchy):
        paths = self.paths(hierarchy, ROOT_INCLUSION)
        with pytest.raises(InvalidArgumentError):
            traversal_metrics(paths, {})


class TestHierarchyInclusion:
    def test_specific_included_in_general(self, hierarchy):
        result = eval_hierarchy_inclusion(hierarchy.pairs)
        assert result.fraction == 1.0
        assert len(result.h_values) == len(hierarchy.pairs)
        assert sum(result.histogram_counts) == len(hierarchy.pairs)
        assert len(result.histogram_edges) == 11

    def test_reversed_pairs_fail(self, hierarchy):
        result = eval_hierarchy_inclusion([(general, specific) for specific, general in hierarchy.pairs])
        assert result.fraction == 0.0

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            eval_hierarchy_inclusion([])


@pytest.mark.slow
def test_zero_shot_on_trained_corpus_beats_chance():
    corpus = generate_corpus(32, 32, 8, seed=0)
    table = train(corpus, TrainerConfig(steps=2000, learning_rate=5e-3)).table
    classes = [ClassPromptSet.from_prompts(t.id, [table.embedding(t.id)]) for t in corpus.texts]
    correct = []
    for i, image in enumerate(corpus.images):
        if corpus.match[i].any():
            result = zsc_classify(table.embedding(image.id), classes)
            correct.append(bool(corpus.match[i, result.index]))
    assert np.mean(correct) >= 3 * corpus.density
