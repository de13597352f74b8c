"""Experiment folds, outlet-disjoint splitting, and the pipeline evaluation."""

import dataclasses

import numpy as np
import pytest

from breathline.errors import ConfigError, InputError, ValidationError
from breathline.evaluation import (
    Corpus,
    CorpusItem,
    ExperimentResult,
    SplitPlan,
    digest_config,
    digest_model_params,
    fold_seed,
    load_sample_corpus,
    outlet_disjoint_split,
    parse_experiment_config,
    run_pipeline_eval,
)
from breathline.evaluation import test1_contiguous_kfold as contiguous_kfold
from breathline.evaluation import test2_leave_one_podcast as leave_one_podcast
from breathline.evaluation import test3_leave_one_speaker as leave_one_speaker
from breathline.nn import BreathDetectorModel, ModelConfig, TrainConfig, train

FAST_MODEL = ModelConfig(lstm_units=8, seed=0)
FAST_TRAIN = TrainConfig(epochs=2, seed=0)


def test_fold_seed_is_distinct_per_fold():
    assert fold_seed(0, 0) == 1
    seeds = [fold_seed(7, i) for i in range(10)]
    assert len(set(seeds)) == 10


def test_corpus_validation():
    item = CorpusItem(id="a", speaker_id="spk0")
    with pytest.raises(ValidationError, match="unique"):
        Corpus([item, CorpusItem(id="a", speaker_id="spk1")], "podcast")
    with pytest.raises(ValidationError, match="speaker_id"):
        Corpus([CorpusItem(id="b")], "podcast")
    with pytest.raises(ValidationError, match="outlet"):
        Corpus([CorpusItem(id="b")], "news")
    with pytest.raises(ConfigError):
        Corpus([item], "interview")
    corpus = Corpus([item], "podcast")
    assert corpus.item("a") is item
    with pytest.raises(InputError):
        corpus.item("missing")


def test_config_digest_is_stable():
    a = digest_config({"x": 1, "y": [2, 3]})
    b = digest_config({"y": [2, 3], "x": 1})
    assert a == b and len(a) == 16
    assert digest_config({"x": 2, "y": [2, 3]}) != a


def test_model_param_digest():
    small = ModelConfig(
        input_dim=6, conv_filters=(4, 3), conv_kernels=(3, 1), pool_strides=(4, 5),
        lstm_units=4, chunk_frames=40, seed=0,
    )
    assert digest_model_params(BreathDetectorModel(small)) == digest_model_params(BreathDetectorModel(small))
    other = dataclasses.replace(small, seed=1)
    assert digest_model_params(BreathDetectorModel(other)) != digest_model_params(BreathDetectorModel(small))


def test_fold_models_are_freshly_initialized():
    # two folds of the same experiment must not share parameters
    small = ModelConfig(
        input_dim=6, conv_filters=(4, 3), conv_kernels=(3, 1), pool_strides=(4, 5),
        lstm_units=4, chunk_frames=40, seed=0,
    )
    rng = np.random.default_rng(0)
    digests = []
    for fold in range(2):
        model = BreathDetectorModel(dataclasses.replace(small, seed=fold_seed(3, fold)))
        items = [(rng.normal(size=(80, 6)), rng.uniform(size=80) < 0.3)]
        train(model, items, TrainConfig(epochs=1, seed=fold_seed(3, fold)))
        digests.append(digest_model_params(model))
    assert digests[0] != digests[1]


def test_test1_reproducible_iterations(frame_corpus):
    result = contiguous_kfold(frame_corpus, FAST_MODEL, FAST_TRAIN, iterations=2, seed=5)
    assert result.experiment == "test1"
    assert result.fold_labels == ["0", "1"]
    assert len(result.values) == 2
    assert all(0.0 <= v <= 1.0 for v in result.values)
    again = contiguous_kfold(frame_corpus, FAST_MODEL, FAST_TRAIN, iterations=2, seed=5)
    assert result.values == again.values
    other = contiguous_kfold(frame_corpus, FAST_MODEL, FAST_TRAIN, iterations=2, seed=6)
    assert result.values != other.values
    assert result.to_dict()["mean"] == pytest.approx(np.mean(result.values))


def test_test1_rejects_bad_iteration_count(frame_corpus):
    with pytest.raises(ConfigError):
        contiguous_kfold(frame_corpus, FAST_MODEL, FAST_TRAIN, iterations=0)


def test_test2_one_fold_per_podcast(frame_corpus):
    result = leave_one_podcast(frame_corpus, FAST_MODEL, FAST_TRAIN, seed=1)
    assert result.fold_labels == [item.id for item in frame_corpus]
    assert len(result.values) == len(frame_corpus)

    solo = Corpus([frame_corpus.items[0]], "podcast")
    with pytest.raises(ConfigError, match="at least 2"):
        leave_one_podcast(solo, FAST_MODEL, FAST_TRAIN)


def test_test2_duplicate_podcast_scores_at_least_mean(frame_corpus):
    base = frame_corpus.items
    twin = dataclasses.replace(base[0], id="twin")
    corpus = Corpus(base + [twin], "podcast")
    result = leave_one_podcast(corpus, FAST_MODEL, TrainConfig(epochs=6, seed=0), seed=2)
    twin_value = result.values[result.fold_labels.index("twin")]
    assert twin_value >= result.mean - 1e-12


def test_test3_one_fold_per_speaker(frame_corpus):
    result = leave_one_speaker(frame_corpus, FAST_MODEL, FAST_TRAIN, seed=3)
    speakers = sorted({item.speaker_id for item in frame_corpus})
    assert result.fold_labels == speakers
    assert len(result.values) == len(speakers)

    mono = Corpus(
        [dataclasses.replace(item, speaker_id="only") for item in frame_corpus.items], "podcast"
    )
    with pytest.raises(ConfigError, match="at least 2"):
        leave_one_speaker(mono, FAST_MODEL, FAST_TRAIN)


def test_outlet_split_two_by_two(news_dir):
    corpus = load_sample_corpus(news_dir / "manifest.csv")
    split = outlet_disjoint_split(corpus, seed=4)
    assert not set(split.train_ids) & set(split.test_ids)
    assert not set(split.train_outlets) & set(split.test_outlets)
    # 2 real + 2 fake outlets: each side gets one of each
    labels = {item.outlet: item.label for item in corpus}
    for side in (split.train_outlets, split.test_outlets):
        assert len(side) == 2
        assert {labels[o] for o in side} == {"real", "fake"}
    assert set(split.train_ids) | set(split.test_ids) == {item.id for item in corpus}

    again = outlet_disjoint_split(corpus, seed=4)
    assert (again.train_ids, again.test_ids) == (split.train_ids, split.test_ids)


def test_outlet_split_needs_two_outlets(news_dir):
    corpus = load_sample_corpus(news_dir / "manifest.csv")
    mono = Corpus(
        [dataclasses.replace(i, outlet="one") for i in corpus.items], "news"
    )
    with pytest.raises(ConfigError):
        outlet_disjoint_split(mono)


def test_split_plan_rejects_overlap():
    with pytest.raises(ValidationError):
        SplitPlan(train_ids=["a", "b"], test_ids=["b"], strategy="s", rng_seed=0)
    with pytest.raises(ValidationError):
        SplitPlan(
            train_ids=["a"], test_ids=["b"], strategy="s", rng_seed=0,
            train_outlets=["x"], test_outlets=["x"],
        )


def test_pipeline_eval_threshold(news_dir, detector):
    model, _ = detector
    corpus = load_sample_corpus(news_dir / "manifest.csv")
    split = outlet_disjoint_split(corpus, seed=0)
    result = run_pipeline_eval(corpus, split, "threshold", model)
    report = result.report
    assert report.positive_label == "real"
    assert report.num_samples == len(split.test_ids)
    assert report.auprc is None and result.scored is None
    assert set(result.predictions) == set(split.test_ids)
    assert report.extra["outlet_overlap"] == 0
    assert report.extra["train_size"] == len(split.train_ids)
    assert len(result.stats) == len(split.train_ids) + len(split.test_ids)
    point = report.point
    assert point.tp + point.fp + point.tn + point.fn == report.num_samples


def test_pipeline_eval_svc_with_cache_and_kwargs(news_dir, detector):
    model, _ = detector
    corpus = load_sample_corpus(news_dir / "manifest.csv")
    split = outlet_disjoint_split(corpus, seed=0)
    cache = {}
    first = run_pipeline_eval(corpus, split, "svc", model, stats_cache=cache, classifier_kwargs={"coef0": 1.0})
    assert first.scored is not None
    assert first.report.auprc is not None and first.report.eer is not None
    assert len(cache) == len(split.train_ids) + len(split.test_ids)

    # a warm cache skips detection entirely and reuses the same stats objects
    second = run_pipeline_eval(corpus, split, "svc", model, stats_cache=cache, classifier_kwargs={"coef0": 1.0})
    assert second.stats[0][2] is first.stats[0][2]
    assert second.report.auprc == first.report.auprc

    default = run_pipeline_eval(corpus, split, "svc", model, stats_cache=cache)
    assert default.report.config_digest != first.report.config_digest

    tree = run_pipeline_eval(corpus, split, "tree", model, stats_cache=cache)
    assert tree.scored is not None and tree.classifier_model is not None

    with pytest.raises(ConfigError):
        run_pipeline_eval(corpus, split, "forest", model, stats_cache=cache)


def test_parse_experiment_config(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(
        "# pipeline experiment\n"
        "experiment = test1\n"
        "iterations = 5   # per-podcast blocks\n"
        "seed = 3\n"
        "learning_rate = 0.001\n"
        "\n"
    )
    assert parse_experiment_config(path) == {
        "experiment": "test1",
        "iterations": 5,
        "seed": 3,
        "learning_rate": 0.001,
    }

    bad = tmp_path / "bad.cfg"
    bad.write_text("iterations = 5\nwat\n")
    with pytest.raises(ConfigError, match=":2:"):
        parse_experiment_config(bad)
    bad.write_text("volume = 11\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_experiment_config(bad)
    bad.write_text("iterations = many\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_experiment_config(bad)


def test_experiment_result_stats():
    result = ExperimentResult("test2", ["a", "b"], [0.8, 0.6], seed=0)
    assert result.mean == pytest.approx(0.7)
    assert result.std == pytest.approx(0.1)
    d = result.to_dict()
    assert d["values"] == [0.8, 0.6] and d["seed"] == 0
