"""Retrieval-as-classification evaluation.

The protocol is leave-one-out over the store: each case queries the
rest (itself excluded, optionally its patient's other cases too), the
neighbors' labels are collapsed into a ranking of distinct labels, and
a prediction at cutoff k is correct when the ground-truth label appears
among the first k distinct labels. Accuracies are reported per model
(every encoder plus both fusion modes) at k in {1, 3, 5} for two tasks:
the confirmed diagnosis string and the Bethesda category.

ROC curves need a continuous score, which categorical top-k output does
not provide, so the engine uses a similarity-weighted malignant vote
over the top-k neighbors: weights are the similarities floored at zero,
falling back to the unweighted malignant fraction when all weights
vanish. AUC is the trapezoidal area, which equals the Mann-Whitney
pair-counting statistic with ties worth one half.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ensemble import FusionMode, ensemble_top_k
from .errors import (
    DegenerateLabelsError,
    EmptyEvaluationSetError,
    MissingEmbeddingError,
    NoEligibleNeighborsError,
)
from .records import CaseRecord, MalignancyLabel, normalize_label
from .retrieval import ExclusionFilter, ExclusionMode, top_k
from .store import StoreSnapshot

ENSEMBLE_RAW = "ensemble_raw"
ENSEMBLE_RRF = "ensemble_rrf"


class PredictionTask(Enum):
    SURGICAL_DIAGNOSIS = "surgical_diagnosis"
    BETHESDA = "bethesda"

    @classmethod
    def parse(cls, value: str | PredictionTask) -> PredictionTask:
        if isinstance(value, cls):
            return value
        name = str(value).strip().lower()
        if name in ("diagnosis", "surgical_diagnosis", "surgical"):
            return cls.SURGICAL_DIAGNOSIS
        if name in ("bethesda", "tbsrtc"):
            return cls.BETHESDA
        raise ValueError(f"unknown task {value!r}; expected diagnosis|bethesda")


def task_label(record: CaseRecord, task: PredictionTask) -> str | None:
    """Normalized ground-truth label, or None when the case has none."""
    if task is PredictionTask.SURGICAL_DIAGNOSIS:
        label = normalize_label(record.metadata.surgical_diagnosis)
        return label or None
    return record.metadata.bethesda.value


@dataclass(frozen=True)
class LabelScore:
    label: str
    support: float
    first_rank: int


@dataclass(frozen=True)
class LabelRanking:
    """Distinct labels ordered by max supporting similarity, then first rank."""

    entries: tuple[LabelScore, ...]

    def labels(self) -> tuple[str, ...]:
        return tuple(entry.label for entry in self.entries)

    def top(self, k: int) -> tuple[str, ...]:
        return self.labels()[:k]


def rank_labels(labeled_hits: Sequence[tuple[str, float]]) -> LabelRanking:
    """Collapse (label, similarity) hits in rank order into distinct labels."""
    by_label: dict[str, LabelScore] = {}
    for position, (label, score) in enumerate(labeled_hits, start=1):
        existing = by_label.get(label)
        if existing is None:
            by_label[label] = LabelScore(label=label, support=score, first_rank=position)
        elif score > existing.support:
            by_label[label] = LabelScore(label=label, support=score, first_rank=existing.first_rank)
    entries = sorted(by_label.values(), key=lambda e: (-e.support, e.first_rank))
    return LabelRanking(entries=tuple(entries))


# --- retrieval plumbing shared by the metric functions ---------------------

def _is_ensemble(model: str) -> bool:
    return model in (ENSEMBLE_RAW, ENSEMBLE_RRF, "ensemble")


def _fusion_for(model: str, fusion: FusionMode) -> FusionMode:
    if model == ENSEMBLE_RAW:
        return FusionMode.RAW_SCORE_POOL
    if model == ENSEMBLE_RRF:
        return FusionMode.RECIPROCAL_RANK
    return fusion


def case_hits(
    record: CaseRecord,
    model: str,
    k: int,
    snapshot: StoreSnapshot,
    exclusion_mode: ExclusionMode = ExclusionMode.SAME_CASE,
    fusion: FusionMode = FusionMode.RAW_SCORE_POOL,
    pool_k: int | None = None,
) -> list[tuple[str, float]]:
    """Top-k (case_id, similarity) pairs for one query under one model.

    ``model`` is an encoder id, ``ensemble``, ``ensemble_raw``, or
    ``ensemble_rrf``. Raises ``MissingEmbeddingError`` when the query
    lacks the vectors the model needs.
    """
    exclusion = ExclusionFilter.for_case(record, exclusion_mode)
    if _is_ensemble(model):
        if not record.embeddings:
            raise MissingEmbeddingError(
                f"case {record.case_id!r} has no embeddings to query with"
            )
        fused = ensemble_top_k(
            record.embeddings, k, snapshot, _fusion_for(model, fusion), exclusion, pool_k
        )
        return [(f.case_id, f.fused_score) for f in fused]
    embedding = record.embeddings.get(model)
    if embedding is None:
        raise MissingEmbeddingError(
            f"case {record.case_id!r} has no embedding under encoder {model!r}"
        )
    neighbors = top_k(embedding, k, snapshot, exclusion)
    return [(n.case_id, n.score) for n in neighbors]


def predict_labels(
    record: CaseRecord,
    model: str,
    k: int,
    task: PredictionTask,
    snapshot: StoreSnapshot,
    exclusion_mode: ExclusionMode = ExclusionMode.SAME_CASE,
    fusion: FusionMode = FusionMode.RAW_SCORE_POOL,
    pool_k: int | None = None,
) -> LabelRanking:
    """Ranked distinct labels predicted for one query case."""
    hits = case_hits(record, model, k, snapshot, exclusion_mode, fusion, pool_k)
    if not hits:
        raise NoEligibleNeighborsError(
            f"no eligible neighbors for case {record.case_id!r} under model {model!r}"
        )
    labeled = []
    for case_id, score in hits:
        label = task_label(snapshot.case(case_id), task)
        if label is not None:
            labeled.append((label, score))
    return rank_labels(labeled)


def malignancy_score_from_hits(
    hits: Iterable[tuple[float, MalignancyLabel]],
) -> float:
    """Similarity-weighted malignant vote in [0, 1].

    ``hits`` are (similarity, label) pairs; UNKNOWN labels are ignored.
    Weights are ``max(similarity, 0)``; if every weight is zero the vote
    degrades to the unweighted malignant fraction.
    """
    weights = []
    flags = []
    for similarity, label in hits:
        if label is MalignancyLabel.UNKNOWN:
            continue
        weights.append(max(float(similarity), 0.0))
        flags.append(1.0 if label is MalignancyLabel.MALIGNANT else 0.0)
    if not flags:
        raise NoEligibleNeighborsError("no neighbors with a known malignancy label")
    total = sum(weights)
    if total == 0.0:
        return sum(flags) / len(flags)
    return sum(w * f for w, f in zip(weights, flags)) / total


def malignancy_score(
    record: CaseRecord,
    model: str,
    k: int,
    snapshot: StoreSnapshot,
    exclusion_mode: ExclusionMode = ExclusionMode.SAME_CASE,
    fusion: FusionMode = FusionMode.RAW_SCORE_POOL,
    pool_k: int | None = None,
) -> float:
    """Continuous malignancy score for one query case."""
    hits = case_hits(record, model, k, snapshot, exclusion_mode, fusion, pool_k)
    if not hits:
        raise NoEligibleNeighborsError(
            f"no eligible neighbors for case {record.case_id!r} under model {model!r}"
        )
    return malignancy_score_from_hits(
        (score, snapshot.case(case_id).metadata.malignancy) for case_id, score in hits
    )


def topk_accuracy(
    snapshot: StoreSnapshot,
    model: str,
    task: PredictionTask,
    k: int,
    exclusion_mode: ExclusionMode = ExclusionMode.SAME_CASE,
    fusion: FusionMode = FusionMode.RAW_SCORE_POOL,
    pool_k: int | None = None,
) -> float:
    """Leave-one-out accuracy at cutoff k over all evaluable cases.

    A case is evaluable when it has the model's embedding(s), a ground
    truth label for the task, and at least one eligible neighbor.
    """
    correct = 0
    evaluated = 0
    for case_id in snapshot.case_ids():
        record = snapshot.case(case_id)
        truth = task_label(record, task)
        if truth is None:
            continue
        try:
            ranking = predict_labels(
                record, model, k, task, snapshot, exclusion_mode, fusion, pool_k
            )
        except (MissingEmbeddingError, NoEligibleNeighborsError):
            continue
        evaluated += 1
        if truth in ranking.top(k):
            correct += 1
    if evaluated == 0:
        raise EmptyEvaluationSetError(
            f"no evaluable cases for model {model!r} and task {task.value!r}"
        )
    return correct / evaluated


# --- ROC / AUC --------------------------------------------------------------

@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep over distinct scores, from (0,0) to (1,1).

    ``thresholds[i]`` is the score cutoff that yields point i; the first
    point uses max(score) + 1 (nothing predicted positive). Both
    coordinate sequences are non-decreasing.
    """

    fpr: tuple[float, ...]
    tpr: tuple[float, ...]
    thresholds: tuple[float, ...]


def roc_and_auc(
    scores: Sequence[float], labels: Sequence[int]
) -> tuple[RocCurve, float]:
    """ROC curve and trapezoidal AUC for binary labels.

    Scores are swept over their distinct values in descending order;
    equal scores move together, which makes the trapezoidal area equal
    to the Mann-Whitney statistic with ties counted 0.5. Raises
    ``DegenerateLabelsError`` unless both classes are present.
    """
    y = np.asarray(labels, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape or y.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary (0 or 1)")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(
            f"ROC needs both classes; got {n_pos} positive / {n_neg} negative"
        )
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # Indices closing each group of equal scores.
    boundary = np.nonzero(np.diff(s_sorted))[0]
    closes = np.concatenate([boundary, [s_sorted.size - 1]])
    tps = np.cumsum(y_sorted)[closes]
    fps = closes + 1 - tps
    fpr = np.concatenate([[0.0], fps / n_neg])
    tpr = np.concatenate([[0.0], tps / n_pos])
    thresholds = np.concatenate([[s_sorted[0] + 1.0], s_sorted[closes]])
    auc = 0.0
    for i in range(1, fpr.size):
        auc += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0
    curve = RocCurve(
        fpr=tuple(float(x) for x in fpr),
        tpr=tuple(float(x) for x in tpr),
        thresholds=tuple(float(x) for x in thresholds),
    )
    return curve, float(auc)


# --- whole-store evaluation -------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    """Run configuration recorded into every report."""

    ks: tuple[int, ...] = (1, 3, 5)
    tasks: tuple[PredictionTask, ...] = (
        PredictionTask.SURGICAL_DIAGNOSIS,
        PredictionTask.BETHESDA,
    )
    exclusion_mode: ExclusionMode = ExclusionMode.SAME_CASE
    pool_k: int | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.ks or any(k < 1 for k in self.ks):
            raise ValueError(f"ks must be positive, got {self.ks}")
        object.__setattr__(self, "ks", tuple(sorted(set(int(k) for k in self.ks))))
        object.__setattr__(
            self, "tasks", tuple(PredictionTask.parse(t) for t in self.tasks)
        )
        object.__setattr__(self, "exclusion_mode", ExclusionMode(self.exclusion_mode))

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "tasks": [t.value for t in self.tasks],
            "exclusion_mode": self.exclusion_mode.value,
            "pool_k": self.pool_k,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RocResult:
    curve: RocCurve
    auc: float
    n_cases: int


@dataclass(frozen=True)
class EvalReport:
    """Accuracies, ROC results, and the configuration that produced them.

    ``accuracy[task][model][k]`` and ``roc[model][k]`` cover every
    registered encoder plus both ensemble fusion modes. The content
    hash is computed over the canonical JSON payload (see reporting).
    """

    config: EvalConfig
    store_version: int
    n_cases: int
    models: tuple[str, ...]
    accuracy: Mapping[str, Mapping[str, Mapping[int, float]]]
    evaluated: Mapping[str, Mapping[str, int]]
    roc: Mapping[str, Mapping[int, RocResult]]
    content_hash: str = field(default="", compare=False)

    def check_invariants(self) -> None:
        """Assert prefix monotonicity and [0, 1] bounds; raises on violation."""
        for task, by_model in self.accuracy.items():
            for model, by_k in by_model.items():
                ordered = [by_k[k] for k in sorted(by_k)]
                for value in ordered:
                    if not (0.0 <= value <= 1.0):
                        raise AssertionError(
                            f"accuracy out of range for {task}/{model}: {value}"
                        )
                for lo, hi in zip(ordered, ordered[1:]):
                    if lo > hi + 1e-12:
                        raise AssertionError(
                            f"top-k accuracy not monotone for {task}/{model}: {ordered}"
                        )
        for model, by_k in self.roc.items():
            for k, result in by_k.items():
                if not (0.0 <= result.auc <= 1.0):
                    raise AssertionError(f"AUC out of range for {model}@k={k}: {result.auc}")


def report_models(snapshot: StoreSnapshot) -> tuple[str, ...]:
    return tuple(sorted(snapshot.encoders)) + (ENSEMBLE_RAW, ENSEMBLE_RRF)


def evaluate_all(snapshot: StoreSnapshot, config: EvalConfig = EvalConfig()) -> EvalReport:
    """Evaluate every model at every configured cutoff on one snapshot.

    Deterministic: repeated runs over the same snapshot and config
    produce identical reports and identical content hashes.
    """
    from .reporting import attach_content_hash

    if len(snapshot) == 0:
        raise EmptyEvaluationSetError("store is empty")
    models = report_models(snapshot)
    ks = config.ks
    kmax = max(ks)
    accuracy: dict[str, dict[str, dict[int, float]]] = {
        task.value: {model: {} for model in models} for task in config.tasks
    }
    evaluated: dict[str, dict[str, int]] = {
        task.value: {model: 0 for model in models} for task in config.tasks
    }
    roc: dict[str, dict[int, RocResult]] = {model: {} for model in models}

    for model in models:
        # hits per case per cutoff; encoder lists at smaller cutoffs are
        # prefixes of the kmax list, ensemble pools are rebuilt per k.
        hits_by_case: dict[str, dict[int, list[tuple[str, float]]]] = {}
        for case_id in snapshot.case_ids():
            record = snapshot.case(case_id)
            try:
                if _is_ensemble(model):
                    per_k = {
                        k: case_hits(
                            record, model, k, snapshot,
                            config.exclusion_mode, pool_k=config.pool_k,
                        )
                        for k in ks
                    }
                else:
                    full = case_hits(
                        record, model, kmax, snapshot,
                        config.exclusion_mode, pool_k=config.pool_k,
                    )
                    per_k = {k: full[:k] for k in ks}
            except MissingEmbeddingError:
                continue
            if not per_k[kmax]:
                continue
            hits_by_case[case_id] = per_k

        for task in config.tasks:
            counts = {k: 0 for k in ks}
            n_eval = 0
            for case_id, per_k in hits_by_case.items():
                truth = task_label(snapshot.case(case_id), task)
                if truth is None:
                    continue
                n_eval += 1
                for k in ks:
                    labeled = [
                        (label, score)
                        for cid, score in per_k[k]
                        if (label := task_label(snapshot.case(cid), task)) is not None
                    ]
                    if truth in rank_labels(labeled).top(k):
                        counts[k] += 1
            if n_eval == 0:
                raise EmptyEvaluationSetError(
                    f"no evaluable cases for model {model!r} and task {task.value!r}"
                )
            evaluated[task.value][model] = n_eval
            for k in ks:
                accuracy[task.value][model][k] = counts[k] / n_eval

        for k in ks:
            scores = []
            labels = []
            for case_id, per_k in hits_by_case.items():
                record = snapshot.case(case_id)
                if record.metadata.malignancy is MalignancyLabel.UNKNOWN:
                    continue
                try:
                    score = malignancy_score_from_hits(
                        (s, snapshot.case(cid).metadata.malignancy) for cid, s in per_k[k]
                    )
                except NoEligibleNeighborsError:
                    continue
                scores.append(score)
                labels.append(1 if record.metadata.malignancy is MalignancyLabel.MALIGNANT else 0)
            curve, auc = roc_and_auc(scores, labels)
            roc[model][k] = RocResult(curve=curve, auc=auc, n_cases=len(scores))

    report = EvalReport(
        config=config,
        store_version=snapshot.version,
        n_cases=len(snapshot),
        models=models,
        accuracy=accuracy,
        evaluated=evaluated,
        roc=roc,
    )
    report.check_invariants()
    return attach_content_hash(report)
