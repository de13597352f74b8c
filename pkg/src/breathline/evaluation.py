"""Experiment orchestration: detector generalizability tests and the
end-to-end sample-level pipeline evaluation.

Three frame-level tests probe how the breath detector generalizes:
per-podcast held-out blocks (test1), leave-one-podcast-out (test2), and
leave-one-speaker-out (test3). Every fold retrains from a fresh
seed-derived initialization. The pipeline evaluation runs audio ->
breath intervals -> statistics -> sample classifier over an
outlet-disjoint train/test split.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .annotations import frames_from_intervals, load_annotations, steps_from_frames
from .audio_io import CANONICAL_RATE, AudioBuffer, load_wav, resample
from .breath_stats import BreathStats, compute_stats
from .classifiers import (
    LabeledSample,
    svc_classify,
    svc_score,
    svc_train,
    threshold_classify,
    tree_classify,
    tree_score,
    tree_train,
)
from .errors import ConfigError, InputError, ValidationError
from .features import FeatureConfig, extract_features
from .manifest import load_manifest
from .metrics import EvalReport, ScoredPredictions, auprc, eer, point_metrics
from .nn import BreathDetectorModel, ModelConfig, TrainConfig, train
from .postprocess import DetectionConfig, detect_breaths

CORPUS_KINDS = ("podcast", "news", "synthetic")
CLASSIFIER_KINDS = ("threshold", "svc", "tree")


@dataclass
class CorpusItem:
    id: str
    speaker_id: Optional[str] = None
    outlet: Optional[str] = None
    label: Optional[str] = None
    features: Optional[np.ndarray] = None  # (frames, dim)
    frame_labels: Optional[np.ndarray] = None  # (frames,) bool
    audio: Optional[object] = None  # AudioBuffer or a path to a WAV file


@dataclass
class Corpus:
    items: list[CorpusItem]
    kind: str
    name: str = ""

    def __post_init__(self):
        if self.kind not in CORPUS_KINDS:
            raise ConfigError(f"corpus kind must be one of {CORPUS_KINDS}, got {self.kind!r}")
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValidationError("corpus items must have unique ids")
        for item in self.items:
            if self.kind == "podcast" and item.speaker_id is None:
                raise ValidationError(f"podcast item {item.id!r} needs a speaker_id")
            if self.kind == "news" and item.outlet is None:
                raise ValidationError(f"news item {item.id!r} needs an outlet")

    def __iter__(self):
        return iter(self.items)

    def __len__(self):
        return len(self.items)

    def item(self, item_id: str) -> CorpusItem:
        for candidate in self.items:
            if candidate.id == item_id:
                return candidate
        raise InputError(f"no corpus item with id {item_id!r}")

    def digest(self) -> str:
        payload = [(i.id, i.label, i.speaker_id, i.outlet) for i in self.items]
        return digest_config({"kind": self.kind, "items": payload})


@dataclass
class SplitPlan:
    train_ids: list[str]
    test_ids: list[str]
    strategy: str
    rng_seed: int
    train_outlets: list[str] = field(default_factory=list)
    test_outlets: list[str] = field(default_factory=list)

    def __post_init__(self):
        overlap = set(self.train_ids) & set(self.test_ids)
        if overlap:
            raise ValidationError(f"train and test share ids: {sorted(overlap)}")
        if set(self.train_outlets) & set(self.test_outlets):
            raise ValidationError("train and test share outlets")


@dataclass
class ExperimentResult:
    experiment: str
    fold_labels: list[str]
    values: list[float]
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "fold_labels": self.fold_labels,
            "values": self.values,
            "mean": self.mean,
            "std": self.std,
            "seed": self.seed,
        }


def digest_config(obj) -> str:
    """Short stable digest of a JSON-representable object."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        obj = dataclasses.asdict(obj)
    blob = json.dumps(obj, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def digest_model_params(model: BreathDetectorModel) -> str:
    h = hashlib.sha256()
    tensors = dict(model.parameters())
    tensors.update(model.buffers())
    for name in sorted(tensors):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def fold_seed(seed: int, fold_index: int) -> int:
    """Per-fold derived seed; fresh initialization for every fold."""
    return seed ^ (fold_index + 1)


def _require_frame_items(corpus: Corpus):
    for item in corpus:
        if item.features is None or item.frame_labels is None:
            raise InputError(f"item {item.id!r} is missing features or frame labels")


def _train_fold_detector(
    items: list[tuple[np.ndarray, np.ndarray]],
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
) -> BreathDetectorModel:
    model = BreathDetectorModel(dataclasses.replace(model_config, seed=seed))
    train(model, items, dataclasses.replace(train_config, seed=seed))
    return model


def _pooled_frame_auprc(model: BreathDetectorModel, pairs: list[tuple[np.ndarray, np.ndarray]]) -> float:
    scores, truths = [], []
    for features, labels in pairs:
        scores.append(model.predict_file(features))
        truths.append(steps_from_frames(labels, model.config.frames_per_step))
    pooled = ScoredPredictions(np.concatenate(scores), np.concatenate(truths), "breath")
    return auprc(pooled)


def test1_contiguous_kfold(
    corpus: Corpus,
    model_config: ModelConfig = ModelConfig(),
    train_config: TrainConfig = TrainConfig(),
    iterations: int = 100,
    seed: int = 0,
) -> ExperimentResult:
    """Per iteration, hold out one uniformly-placed contiguous block of
    1/x of each podcast's frames (x = podcast count), train on the rest,
    and record the pooled validation AUPRC."""
    _require_frame_items(corpus)
    if iterations < 1:
        raise ConfigError("iterations must be >= 1")
    x = len(corpus)
    if x < 1:
        raise ConfigError("test1 needs a non-empty corpus")
    rng = np.random.default_rng(seed)
    values = []
    for iteration in range(iterations):
        train_pairs, val_pairs = [], []
        for item in corpus:
            num_frames = item.features.shape[0]
            block = int(round(num_frames / x))
            if block < 1 or block > num_frames:
                raise ConfigError(f"item {item.id!r}: cannot hold out {block} of {num_frames} frames")
            start = int(rng.integers(0, num_frames - block + 1))
            val_pairs.append((item.features[start : start + block], item.frame_labels[start : start + block]))
            if start > 0:
                train_pairs.append((item.features[:start], item.frame_labels[:start]))
            if start + block < num_frames:
                train_pairs.append((item.features[start + block :], item.frame_labels[start + block :]))
        model = _train_fold_detector(train_pairs, model_config, train_config, fold_seed(seed, iteration))
        values.append(_pooled_frame_auprc(model, val_pairs))
    return ExperimentResult("test1", [str(i) for i in range(iterations)], values, seed)


def test2_leave_one_podcast(
    corpus: Corpus,
    model_config: ModelConfig = ModelConfig(),
    train_config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> ExperimentResult:
    """Hold out each podcast in turn, training on the remaining ones."""
    _require_frame_items(corpus)
    if len(corpus) < 2:
        raise ConfigError("test2 needs at least 2 podcasts")
    values, labels = [], []
    for index, held_out in enumerate(corpus):
        train_pairs = [
            (item.features, item.frame_labels) for item in corpus if item.id != held_out.id
        ]
        model = _train_fold_detector(train_pairs, model_config, train_config, fold_seed(seed, index))
        values.append(_pooled_frame_auprc(model, [(held_out.features, held_out.frame_labels)]))
        labels.append(held_out.id)
    return ExperimentResult("test2", labels, values, seed)


def test3_leave_one_speaker(
    corpus: Corpus,
    model_config: ModelConfig = ModelConfig(),
    train_config: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> ExperimentResult:
    """Hold out all podcasts of each speaker in turn."""
    _require_frame_items(corpus)
    speakers = sorted({item.speaker_id for item in corpus})
    if len(speakers) < 2:
        raise ConfigError("test3 needs at least 2 speakers")
    values = []
    for index, speaker in enumerate(speakers):
        train_pairs = [
            (item.features, item.frame_labels) for item in corpus if item.speaker_id != speaker
        ]
        val_pairs = [
            (item.features, item.frame_labels) for item in corpus if item.speaker_id == speaker
        ]
        model = _train_fold_detector(train_pairs, model_config, train_config, fold_seed(seed, index))
        values.append(_pooled_frame_auprc(model, val_pairs))
    return ExperimentResult("test3", speakers, values, seed)


def outlet_disjoint_split(corpus: Corpus, seed: int = 0) -> SplitPlan:
    """Assign whole outlets to train or test.

    Outlets are bucketed by the labels they carry (real-only, fake-only,
    mixed); each bucket is shuffled and dealt alternately so that, when
    an outlet bucket has at least two members, both sides receive one.
    Real-only buckets start on the train side and fake-only on the test
    side, which balances sizes for the common two-by-two layout.
    """
    outlets = sorted({item.outlet for item in corpus})
    if len(outlets) < 2:
        raise ConfigError("outlet-disjoint split needs at least 2 outlets")
    labels_by_outlet = {o: set() for o in outlets}
    for item in corpus:
        if item.label is None:
            raise InputError(f"item {item.id!r} has no label")
        labels_by_outlet[item.outlet].add(item.label)
    buckets = {
        "real_only": [o for o in outlets if labels_by_outlet[o] == {"real"}],
        "fake_only": [o for o in outlets if labels_by_outlet[o] == {"fake"}],
        "mixed": [o for o in outlets if len(labels_by_outlet[o]) > 1],
    }
    rng = np.random.default_rng(seed)
    assignment = {}
    for bucket_name, bucket in buckets.items():
        shuffled = [bucket[i] for i in rng.permutation(len(bucket))]
        first_train = bucket_name != "fake_only"
        for position, outlet in enumerate(shuffled):
            train_side = (position % 2 == 0) == first_train
            assignment[outlet] = "train" if train_side else "test"
    train_ids = [item.id for item in corpus if assignment[item.outlet] == "train"]
    test_ids = [item.id for item in corpus if assignment[item.outlet] == "test"]
    if not train_ids or not test_ids:
        raise ConfigError("outlet-disjoint split left one side empty")
    return SplitPlan(
        train_ids=train_ids,
        test_ids=test_ids,
        strategy="outlet-disjoint",
        rng_seed=seed,
        train_outlets=sorted(o for o, side in assignment.items() if side == "train"),
        test_outlets=sorted(o for o, side in assignment.items() if side == "test"),
    )


def _item_audio(item: CorpusItem) -> AudioBuffer:
    audio = item.audio
    if audio is None:
        raise InputError(f"item {item.id!r} has no audio")
    if not isinstance(audio, AudioBuffer):
        audio = load_wav(os.fspath(audio))
    if audio.sample_rate != CANONICAL_RATE:
        audio = resample(audio, CANONICAL_RATE)
    return audio


@dataclass
class PipelineResult:
    report: EvalReport
    scored: Optional[ScoredPredictions]
    stats: list[tuple[str, str, BreathStats]]
    predictions: dict[str, str]
    classifier_model: object = None


def run_pipeline_eval(
    corpus: Corpus,
    split: SplitPlan,
    classifier_kind: str,
    detector: BreathDetectorModel,
    feature_config: FeatureConfig = FeatureConfig(),
    detection_config: DetectionConfig = DetectionConfig(),
    stats_cache: Optional[dict[str, BreathStats]] = None,
    classifier_kwargs: Optional[dict] = None,
) -> PipelineResult:
    """Detect breaths per sample, train the chosen sample classifier on
    the split's train side (thresholding needs no training), and report
    test-side metrics with real as the positive class.

    `classifier_kwargs` forwards extra keyword arguments (e.g. C, gamma,
    coef0, max_depth) to the chosen trainer."""
    if classifier_kind not in CLASSIFIER_KINDS:
        raise ConfigError(f"classifier must be one of {CLASSIFIER_KINDS}, got {classifier_kind!r}")
    wanted = set(split.train_ids) | set(split.test_ids)
    stats: dict[str, BreathStats] = {}
    stat_rows = []
    for item in corpus:
        if item.id not in wanted:
            continue
        if stats_cache is not None and item.id in stats_cache:
            stats[item.id] = stats_cache[item.id]
        else:
            audio = _item_audio(item)
            intervals = detect_breaths(detector, audio, feature_config, detection_config)
            stats[item.id] = compute_stats(intervals, audio.duration_ms)
            if stats_cache is not None:
                stats_cache[item.id] = stats[item.id]
        stat_rows.append((item.id, item.label, stats[item.id]))

    model = None
    scores: Optional[list[float]] = None
    kwargs = classifier_kwargs or {}
    if classifier_kind == "threshold":
        predict = threshold_classify
    else:
        train_samples = [
            LabeledSample(i, stats[i], corpus.item(i).label) for i in split.train_ids
        ]
        if classifier_kind == "svc":
            model = svc_train(train_samples, **kwargs)
            predict = lambda s: svc_classify(model, s)
            scores = [svc_score(model, stats[i]) for i in split.test_ids]
        else:
            model = tree_train(train_samples, **kwargs)
            predict = lambda s: tree_classify(model, s)
            scores = [tree_score(model, stats[i]) for i in split.test_ids]

    predictions = {i: predict(stats[i]) for i in split.test_ids}
    truths = np.array([corpus.item(i).label == "real" for i in split.test_ids])
    predicted = np.array([predictions[i] == "real" for i in split.test_ids])
    point = point_metrics(predicted, truths)

    scored = None
    auprc_value = eer_value = None
    if scores is not None:
        scored = ScoredPredictions(np.array(scores), truths, "real", list(split.test_ids))
        auprc_value = auprc(scored)
        eer_value = eer(scored)

    config_digest = digest_config(
        {
            "classifier": classifier_kind,
            "classifier_kwargs": kwargs,
            "features": dataclasses.asdict(feature_config),
            "detection": dataclasses.asdict(detection_config),
            "split": dataclasses.asdict(split),
        }
    )
    report = EvalReport(
        dataset_id=corpus.name or corpus.digest(),
        model_id=f"{classifier_kind}+detector:{digest_model_params(detector)}",
        config_digest=config_digest,
        positive_label="real",
        num_samples=len(split.test_ids),
        point=point,
        auprc=auprc_value,
        eer=eer_value,
        extra={
            "strategy": split.strategy,
            "seed": split.rng_seed,
            "train_size": len(split.train_ids),
            "test_size": len(split.test_ids),
            "train_outlets": list(split.train_outlets),
            "test_outlets": list(split.test_outlets),
            "outlet_overlap": len(set(split.train_outlets) & set(split.test_outlets)),
        },
    )
    return PipelineResult(report, scored, stat_rows, predictions, model)


def load_frame_corpus(
    manifest_path, feature_config: FeatureConfig = FeatureConfig(), kind: str = "podcast"
) -> Corpus:
    """Manifest -> corpus with extracted features and frame labels.

    Sources and annotation paths are resolved relative to the manifest's
    directory. Every entry needs an annotation file.
    """
    entries = load_manifest(manifest_path)
    base = os.path.dirname(os.fspath(manifest_path))
    items = []
    for entry in entries:
        if entry.annotation_path is None:
            raise InputError(f"manifest entry {entry.id!r} has no annotation_path")
        audio = load_wav(os.path.join(base, entry.source))
        if audio.sample_rate != CANONICAL_RATE:
            audio = resample(audio, CANONICAL_RATE)
        features = extract_features(audio, feature_config)
        intervals = load_annotations(os.path.join(base, entry.annotation_path), audio.duration_ms)
        frame_labels = frames_from_intervals(
            intervals, feature_config.window_ms, feature_config.hop_ms, features.num_frames
        )
        items.append(
            CorpusItem(
                id=entry.id,
                speaker_id=entry.speaker_id,
                outlet=entry.outlet,
                label=entry.label,
                features=features.data,
                frame_labels=frame_labels.labels,
            )
        )
    return Corpus(items, kind, name=os.path.basename(os.fspath(manifest_path)))


def load_sample_corpus(manifest_path, kind: str = "news") -> Corpus:
    """Manifest -> corpus of labeled samples with lazily-loaded audio paths."""
    entries = load_manifest(manifest_path)
    base = os.path.dirname(os.fspath(manifest_path))
    items = [
        CorpusItem(
            id=entry.id,
            speaker_id=entry.speaker_id,
            outlet=entry.outlet,
            label=entry.label,
            audio=os.path.join(base, entry.source),
        )
        for entry in entries
    ]
    return Corpus(items, kind, name=os.path.basename(os.fspath(manifest_path)))


# experiment config files: `key = value` lines, '#' comments
_EXPERIMENT_KEYS = {
    "experiment": str,
    "iterations": int,
    "seed": int,
    "classifier": str,
    "window_ms": float,
    "hop_ms": float,
    "n_mels": int,
    "threshold": float,
    "min_breath_ms": float,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "lstm_units": int,
    "chunk_frames": int,
}


def parse_experiment_config(path) -> dict:
    out = {}
    with open(path) as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"{path}:{line_no}: unknown key {key!r}")
            try:
                out[key] = _EXPERIMENT_KEYS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: bad value for {key!r}: {exc}") from exc
    return out
