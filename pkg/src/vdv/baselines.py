"""Competing class-imbalance strategies and the head-to-head harness.

Class weights are kept in exact rational arithmetic so the defining identity
weight_c * count_c = n_samples / 2 holds with no float error; floats are
derived only at the solver boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .dataset import FeatureSet, partition_by_class
from .ensemble import block_predict, block_scores, train_block
from .errors import DataError
from .metrics import EvalReport, evaluate
from .svm import KernelSpec, TrainConfig, decision_values, predict, train_svm


@dataclass(frozen=True)
class ClassWeights:
    """Per-class cost multipliers, exact rationals: n / (2 * count_c)."""

    weight_0: Fraction
    weight_1: Fraction

    def as_floats(self) -> tuple[float, float]:
        return float(self.weight_0), float(self.weight_1)


def compute_class_weights(labels) -> ClassWeights:
    """Inverse-frequency weights over binary labels, both classes required."""
    arr = np.asarray(labels)
    if arr.ndim != 1 or (arr.size and not np.all((arr == 0) | (arr == 1))):
        raise DataError("labels must be a 1-D 0/1 vector")
    n = int(arr.size)
    n1 = int(arr.sum())
    n0 = n - n1
    if n0 == 0 or n1 == 0:
        raise DataError("class weights need both classes present")
    return ClassWeights(weight_0=Fraction(n, 2 * n0), weight_1=Fraction(n, 2 * n1))


def undersample(train: FeatureSet, seed: int) -> FeatureSet:
    """Drop majority rows (seeded, uniform, without replacement) until the
    classes balance; the minority class is untouched. Original row order is
    kept, so an already balanced set comes back unchanged."""
    maj, mino = partition_by_class(train)
    rng = np.random.default_rng(seed)
    maj_rows = np.flatnonzero(train.labels == maj.labels[0])
    chosen = rng.choice(maj_rows.shape[0], size=mino.n_samples, replace=False)
    keep = np.ones(train.n_samples, dtype=bool)
    keep[maj_rows] = False
    keep[maj_rows[chosen]] = True
    return train.take(np.flatnonzero(keep))


def oversample(train: FeatureSet, seed: int, jitter_sigma: float = 0.0) -> FeatureSet:
    """Append minority replicas until the classes balance.

    Whole copies come first (each minority sample appears floor(n_maj/n_min)
    times), then the remainder is drawn seeded without replacement, so an
    exactly divisible ratio replicates every sample the same number of times.
    Originals stay bit-exact; with jitter_sigma > 0 each replica gets
    zero-mean Gaussian noise scaled by jitter_sigma times the minority
    per-feature standard deviation. Replica ids get "#oN" suffixes.
    """
    if not (np.isfinite(jitter_sigma) and jitter_sigma >= 0):
        raise DataError(f"jitter_sigma must be finite and >= 0, got {jitter_sigma}")
    maj, mino = partition_by_class(train)
    reps = maj.n_samples // mino.n_samples
    rem = maj.n_samples % mino.n_samples
    rng = np.random.default_rng(seed)

    src: list[int] = []
    copy_no: list[int] = []
    for copy in range(1, reps):
        src.extend(range(mino.n_samples))
        copy_no.extend([copy] * mino.n_samples)
    if rem:
        extra = np.sort(rng.choice(mino.n_samples, size=rem, replace=False))
        src.extend(int(i) for i in extra)
        copy_no.extend([reps] * rem)

    rep_feats = mino.features[np.asarray(src, dtype=np.intp)].astype(np.float64)
    if jitter_sigma > 0 and rep_feats.size:
        scale = jitter_sigma * mino.features.astype(np.float64).std(axis=0)
        rep_feats = rep_feats + rng.normal(0.0, 1.0, rep_feats.shape) * scale
    rep_ids = tuple(
        f"{mino.sample_ids[i]}#o{c}" for i, c in zip(src, copy_no)
    )
    rep_pids = (
        None
        if train.patient_ids is None
        else tuple(mino.patient_ids[i] for i in src)
    )
    minority_label = int(mino.labels[0]) if mino.n_samples else 1
    return FeatureSet(
        features=np.vstack([train.features, rep_feats.astype(np.float32)]),
        labels=np.concatenate(
            [train.labels, np.full(len(src), minority_label, dtype=np.uint8)]
        ),
        sample_ids=train.sample_ids + rep_ids,
        patient_ids=None
        if train.patient_ids is None
        else train.patient_ids + rep_pids,
    )


@dataclass(frozen=True)
class StrategyResult:
    """One comparison row: the strategy, its training class counts, and the
    evaluation on the shared test set."""

    strategy: str
    n_train_neg: int
    n_train_pos: int
    report: EvalReport


STRATEGY_NAMES = (
    "weight-balancing",
    "under-sampling",
    "over-sampling",
    "data-level-ensemble",
)


def run_comparison(
    train: FeatureSet,
    test: FeatureSet,
    spec: KernelSpec,
    cfg: TrainConfig,
    jitter_sigma: float = 0.0,
    score_rule: str = "vote-fraction",
) -> list[StrategyResult]:
    """Train all four strategies on train and evaluate each on the untouched
    test set. Single-SVM rows score by decision value; the ensemble row
    scores by score_rule."""

    def svm_row(name: str, train_set: FeatureSet, row_cfg: TrainConfig) -> StrategyResult:
        model = train_svm(train_set, spec, row_cfg)
        report = evaluate(
            test.labels,
            predict(model, test.features),
            decision_values(model, test.features),
            score_rule="decision-value",
        )
        n0, n1 = train_set.class_counts()
        return StrategyResult(name, n0, n1, report)

    weights = compute_class_weights(train.labels)
    rows = [
        svm_row(
            "weight-balancing",
            train,
            replace(cfg, per_class_weight=weights.as_floats()),
        ),
        svm_row("under-sampling", undersample(train, cfg.seed), cfg),
        svm_row("over-sampling", oversample(train, cfg.seed, jitter_sigma), cfg),
    ]

    block = train_block(train, "data-level-ensemble", spec, cfg, use_pca=False)
    report = evaluate(
        test.labels,
        block_predict(block, test.features),
        block_scores(block, test.features, score_rule),
        score_rule=score_rule,
    )
    _, mino = partition_by_class(train)
    per_subset = mino.n_samples  # each mini-set holds this many of each class
    rows.append(StrategyResult("data-level-ensemble", per_subset, per_subset, report))
    return rows
