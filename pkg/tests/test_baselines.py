"""Class weights, resampling strategies, and the comparison harness."""

from fractions import Fraction

import numpy as np
import pytest

from vdv.baselines import (
    STRATEGY_NAMES,
    compute_class_weights,
    oversample,
    run_comparison,
    undersample,
)
from vdv.dataset import FeatureSet, synth_imbalanced
from vdv.errors import DataError
from vdv.svm import KernelSpec, TrainConfig

LINEAR = KernelSpec(family="linear")


class TestClassWeights:
    def test_inverse_frequency_identity(self):
        labels = np.concatenate([np.zeros(3, np.uint8), np.ones(1, np.uint8)])
        w = compute_class_weights(labels)
        assert w.weight_0 == Fraction(4, 6) == Fraction(2, 3)
        assert w.weight_1 == Fraction(4, 2) == Fraction(2, 1)

    def test_identity_holds_exactly_for_random_counts(self, rng):
        for _ in range(20):
            n0 = int(rng.integers(1, 4000))
            n1 = int(rng.integers(1, 4000))
            labels = np.concatenate(
                [np.zeros(n0, np.uint8), np.ones(n1, np.uint8)]
            )
            w = compute_class_weights(labels)
            n = n0 + n1
            # the defining identity in exact rational arithmetic
            assert w.weight_0 * n0 == Fraction(n, 2)
            assert w.weight_1 * n1 == Fraction(n, 2)

    def test_published_counts(self):
        labels = np.concatenate(
            [np.zeros(8296, np.uint8), np.ones(2379, np.uint8)]
        )
        w = compute_class_weights(labels)
        assert w.weight_0 * 8296 == Fraction(10675, 2)
        assert w.weight_1 * 2379 == Fraction(10675, 2)

    def test_balanced_weights_are_one(self):
        w = compute_class_weights(np.array([0, 1, 0, 1], np.uint8))
        assert w.weight_0 == w.weight_1 == Fraction(1)
        assert w.as_floats() == (1.0, 1.0)

    def test_needs_both_classes(self):
        with pytest.raises(DataError):
            compute_class_weights(np.zeros(5, np.uint8))


class TestUndersample:
    def test_balances_counts(self, rng):
        for trial in range(5):
            fs = synth_imbalanced(
                int(rng.integers(10, 60)), int(rng.integers(3, 10)), 3, 1.0, trial
            )
            out = undersample(fs, seed=trial)
            n0, n1 = out.class_counts()
            assert n0 == n1 == fs.class_counts()[1]

    def test_minority_untouched_and_subset_of_original(self):
        fs = synth_imbalanced(30, 8, 3, 1.0, seed=4)
        out = undersample(fs, seed=1)
        kept = set(out.sample_ids)
        assert kept <= set(fs.sample_ids)
        minority_ids = {
            sid for sid, lab in zip(fs.sample_ids, fs.labels) if lab == 1
        }
        assert minority_ids <= kept

    def test_preserves_row_order(self):
        fs = synth_imbalanced(20, 5, 2, 1.0, seed=0)
        out = undersample(fs, seed=3)
        pos = {sid: i for i, sid in enumerate(fs.sample_ids)}
        order = [pos[sid] for sid in out.sample_ids]
        assert order == sorted(order)

    def test_balanced_input_unchanged(self):
        fs = synth_imbalanced(6, 6, 2, 1.0, seed=1)
        assert undersample(fs, seed=9) == fs

    def test_deterministic(self):
        fs = synth_imbalanced(25, 6, 3, 1.0, seed=2)
        assert undersample(fs, seed=5) == undersample(fs, seed=5)


class TestOversample:
    def test_balances_counts(self, rng):
        for trial in range(5):
            fs = synth_imbalanced(
                int(rng.integers(10, 60)), int(rng.integers(3, 10)), 3, 1.0, trial
            )
            out = oversample(fs, seed=trial)
            n0, n1 = out.class_counts()
            assert n0 == n1 == fs.class_counts()[0]

    def test_exact_ratio_replicates_uniformly(self):
        # 9:3 means every minority sample appears exactly 3 times
        fs = synth_imbalanced(9, 3, 2, 1.0, seed=1)
        out = oversample(fs, seed=0)
        minority_ids = [
            sid for sid, lab in zip(fs.sample_ids, fs.labels) if lab == 1
        ]
        for sid in minority_ids:
            copies = [s for s in out.sample_ids if s == sid or s.startswith(sid + "#o")]
            assert len(copies) == 3

    def test_replicas_are_bit_exact_without_jitter(self):
        fs = synth_imbalanced(10, 3, 4, 1.0, seed=2)
        out = oversample(fs, seed=1)
        rows = {sid: out.features[i] for i, sid in enumerate(out.sample_ids)}
        for sid in out.sample_ids:
            if "#o" in sid:
                base = sid.split("#o")[0]
                assert np.array_equal(rows[sid], rows[base])

    def test_originals_exact_under_jitter(self):
        fs = synth_imbalanced(12, 4, 3, 1.0, seed=3)
        out = oversample(fs, seed=2, jitter_sigma=0.1)
        n = fs.n_samples
        assert out.sample_ids[:n] == fs.sample_ids
        assert np.array_equal(out.features[:n], fs.features)
        # replicas moved
        replica_rows = out.features[n:]
        base_rows = np.array(
            [
                out.features[out.sample_ids.index(sid.split("#o")[0])]
                for sid in out.sample_ids[n:]
            ]
        )
        assert not np.array_equal(replica_rows, base_rows)

    def test_patient_ids_follow_replicas(self):
        fs = synth_imbalanced(8, 4, 2, 1.0, seed=5)
        out = oversample(fs, seed=0)
        pid_of = dict(zip(fs.sample_ids, fs.patient_ids))
        for sid, pid in zip(out.sample_ids, out.patient_ids):
            base = sid.split("#o")[0]
            assert pid == pid_of[base]

    def test_rejects_bad_jitter(self):
        fs = synth_imbalanced(6, 3, 2, 1.0, seed=0)
        with pytest.raises(DataError):
            oversample(fs, seed=0, jitter_sigma=-1.0)

    def test_deterministic(self):
        fs = synth_imbalanced(17, 5, 3, 1.0, seed=7)
        a = oversample(fs, seed=4, jitter_sigma=0.05)
        b = oversample(fs, seed=4, jitter_sigma=0.05)
        assert a == b


class TestComparison:
    def test_rows_and_counts(self):
        fs = synth_imbalanced(60, 15, 3, 3.0, seed=1)
        train = fs.take([i for i in range(75) if i % 5 != 0])
        test = fs.take([i for i in range(75) if i % 5 == 0])
        rows = run_comparison(train, test, LINEAR, TrainConfig(c=1.0, seed=0))
        assert tuple(r.strategy for r in rows) == STRATEGY_NAMES
        n0, n1 = train.class_counts()
        by_name = {r.strategy: r for r in rows}
        assert (by_name["weight-balancing"].n_train_neg,
                by_name["weight-balancing"].n_train_pos) == (n0, n1)
        assert by_name["under-sampling"].n_train_neg == n1
        assert by_name["under-sampling"].n_train_pos == n1
        assert by_name["over-sampling"].n_train_neg == n0
        assert by_name["over-sampling"].n_train_pos == n0
        assert by_name["data-level-ensemble"].n_train_neg == n1
        assert by_name["data-level-ensemble"].n_train_pos == n1

    def test_score_rules_recorded(self):
        fs = synth_imbalanced(40, 10, 3, 3.0, seed=2)
        train = fs.take([i for i in range(50) if i % 5 != 0])
        test = fs.take([i for i in range(50) if i % 5 == 0])
        rows = run_comparison(
            train, test, LINEAR, TrainConfig(c=1.0, seed=0),
            score_rule="mean-decision",
        )
        by_name = {r.strategy: r for r in rows}
        assert by_name["weight-balancing"].report.score_rule == "decision-value"
        assert by_name["data-level-ensemble"].report.score_rule == "mean-decision"

    def test_deterministic(self):
        fs = synth_imbalanced(40, 12, 3, 3.0, seed=3)
        train = fs.take([i for i in range(52) if i % 4 != 0])
        test = fs.take([i for i in range(52) if i % 4 == 0])
        a = run_comparison(train, test, LINEAR, TrainConfig(c=1.0, seed=1))
        b = run_comparison(train, test, LINEAR, TrainConfig(c=1.0, seed=1))
        assert a == b
