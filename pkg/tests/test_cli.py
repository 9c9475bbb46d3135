"""End-to-end command-line runs on temp files, exit codes, output formats."""

import numpy as np
import pytest

from vdv.cli import main
from vdv.dataset import load_feature_set, save_feature_set, synth_imbalanced
from vdv.ensemble import load_model


def run(args):
    return main([str(a) for a in args])


@pytest.fixture
def workdir(tmp_path):
    """Synth data plus a train/test split, ready for the model commands."""
    assert run(
        ["synth", "--n-majority", 60, "--n-minority", 20, "--dim", 4,
         "--separation", 3.0, "--seed", 1, "--out", tmp_path / "all.fvec"]
    ) == 0
    assert run(
        ["split", "--features", tmp_path / "all.fvec", "--test-fraction", 0.25,
         "--seed", 2, "--train-out", tmp_path / "train.fvec",
         "--test-out", tmp_path / "test.fvec"]
    ) == 0
    return tmp_path


def train_model(workdir, out="model.vdv", extra=()):
    args = [
        "train-vdv", "--features", f"t1={workdir / 'train.fvec'}",
        "--kernel", "linear", "--c", 1.0, "--seed", 0,
        "--pca-tags", "", "--out", workdir / out,
    ]
    assert run(args + list(extra)) == 0
    return workdir / out


class TestSynthAndSplit:
    def test_synth_writes_loadable_file(self, tmp_path):
        assert run(
            ["synth", "--n-majority", 12, "--n-minority", 4, "--dim", 3,
             "--out", tmp_path / "s.fvec"]
        ) == 0
        fs = load_feature_set(tmp_path / "s.fvec")
        assert fs.class_counts() == (12, 4)

    def test_split_partitions(self, workdir):
        train = load_feature_set(workdir / "train.fvec")
        test = load_feature_set(workdir / "test.fvec")
        assert train.n_samples == 60
        assert test.n_samples == 20

    def test_patient_wise_flag(self, workdir, tmp_path):
        assert run(
            ["split", "--features", workdir / "all.fvec", "--patient-wise",
             "--test-fraction", 0.3, "--seed", 0,
             "--train-out", tmp_path / "ptr.fvec",
             "--test-out", tmp_path / "pte.fvec"]
        ) == 0
        train = load_feature_set(tmp_path / "ptr.fvec")
        test = load_feature_set(tmp_path / "pte.fvec")
        assert not (set(train.patient_ids) & set(test.patient_ids))


class TestSubsets:
    def test_writes_k_files(self, workdir):
        out = workdir / "minis"
        assert run(
            ["subsets", "--features", workdir / "train.fvec",
             "--seed", 3, "--out-dir", out]
        ) == 0
        files = sorted(out.glob("mini_*.fvec"))
        train = load_feature_set(workdir / "train.fvec")
        n0, n1 = train.class_counts()
        assert len(files) == n0 // n1
        for f in files:
            mini = load_feature_set(f)
            assert mini.class_counts() == (n1, n1)


class TestTraining:
    def test_train_vdv_and_reload(self, workdir):
        path = train_model(workdir)
        model = load_model(path)
        assert model.tags == ("t1",)

    def test_train_block_writes_block_container(self, workdir):
        out = workdir / "block.blk"
        assert run(
            ["train-block", "--features", f"t1={workdir / 'train.fvec'}",
             "--kernel", "linear", "--c", 1.0, "--pca", "off", "--out", out]
        ) == 0
        block = load_model(out)
        assert block.extractor_tag == "t1"

    def test_pca_auto_matches_tag(self, workdir):
        out = workdir / "dn.blk"
        assert run(
            ["train-block", "--features", f"densenet121={workdir / 'train.fvec'}",
             "--kernel", "linear", "--c", 1.0, "--out", out]
        ) == 0
        assert load_model(out).pcas is not None
        out2 = workdir / "vg.blk"
        assert run(
            ["train-block", "--features", f"vgg16={workdir / 'train.fvec'}",
             "--kernel", "linear", "--c", 1.0, "--out", out2]
        ) == 0
        assert load_model(out2).pcas is None

    def test_training_deterministic_bytes(self, workdir):
        p1 = train_model(workdir, "m1.vdv")
        p2 = train_model(workdir, "m2.vdv")
        assert p1.read_bytes() == p2.read_bytes()


class TestPredictEvaluateRoc:
    def test_predict_csv_shape(self, workdir):
        model = train_model(workdir)
        out = workdir / "preds.csv"
        assert run(
            ["predict", "--model", model,
             "--features", f"t1={workdir / 'test.fvec'}", "--out", out]
        ) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "sample_id,prediction,score"
        assert len(lines) == 21
        for line in lines[1:]:
            sid, pred, score = line.split(",")
            assert pred in ("0", "1")
            assert 0.0 <= float(score) <= 1.0

    def test_predict_on_unlabeled_file(self, workdir):
        model = train_model(workdir)
        test = load_feature_set(workdir / "test.fvec")
        # strip the label block by rewriting header flags by hand
        raw = bytearray((workdir / "test.fvec").read_bytes())
        n, dim = test.n_samples, test.dim
        raw[14] &= ~0x01
        body_end = 15 + 4 * n * dim
        unlabeled = bytes(raw[:body_end]) + bytes(raw[body_end + n:])
        (workdir / "unlabeled.fvec").write_bytes(unlabeled)
        out = workdir / "u.csv"
        assert run(
            ["predict", "--model", model,
             "--features", f"t1={workdir / 'unlabeled.fvec'}", "--out", out]
        ) == 0
        assert len(out.read_text().strip().split("\n")) == n + 1

    def test_labels_csv_identity_override_matches(self, workdir):
        model = train_model(workdir)
        test = load_feature_set(workdir / "test.fvec")
        labels_csv = workdir / "labels.csv"
        labels_csv.write_text(
            "sample_id,label\n"
            + "\n".join(f"{sid},{lab}" for sid, lab in zip(test.sample_ids, test.labels))
            + "\n"
        )
        plain, overridden = workdir / "ev_a.csv", workdir / "ev_b.csv"
        base = ["evaluate", "--model", model,
                "--features", f"t1={workdir / 'test.fvec'}"]
        assert run(base + ["--out", plain]) == 0
        assert run(base + ["--labels", labels_csv, "--out", overridden]) == 0
        assert plain.read_bytes() == overridden.read_bytes()

    def test_labels_csv_all_positive_makes_metrics_undefined(self, workdir, capsys):
        model = train_model(workdir)
        test = load_feature_set(workdir / "test.fvec")
        labels_csv = workdir / "ones.csv"
        labels_csv.write_text(
            "sample_id,label\n"
            + "\n".join(f"{sid},1" for sid in test.sample_ids)
            + "\n"
        )
        code = run(
            ["evaluate", "--model", model,
             "--features", f"t1={workdir / 'test.fvec'}",
             "--labels", labels_csv, "--out", workdir / "ev_ones.csv"]
        )
        assert code == 3
        assert "undefined" in capsys.readouterr().err.lower()

    def test_evaluate_csv(self, workdir):
        model = train_model(workdir)
        out = workdir / "eval.csv"
        roc = workdir / "roc.csv"
        assert run(
            ["evaluate", "--model", model,
             "--features", f"t1={workdir / 'test.fvec'}",
             "--out", out, "--roc-out", roc]
        ) == 0
        lines = out.read_text().strip().split("\n")
        header = "model,accuracy,recall,specificity,precision,f1,f2,g_mean,auc,score_rule"
        assert lines[0] == header
        assert lines[1].startswith("t1,")
        assert lines[-1].startswith("vdv,")
        roc_lines = roc.read_text().strip().split("\n")
        assert roc_lines[0] == "threshold,fpr,tpr"
        assert roc_lines[1].startswith("inf,0,0")

    def test_roc_command(self, workdir):
        model = train_model(workdir)
        out = workdir / "sweep.csv"
        assert run(
            ["roc", "--model", model,
             "--features", f"t1={workdir / 'test.fvec'}", "--out", out]
        ) == 0
        lines = out.read_text().strip().split("\n")
        last = lines[-1].split(",")
        assert float(last[1]) == 1.0 and float(last[2]) == 1.0

    def test_rerun_byte_identical(self, workdir):
        model = train_model(workdir)
        a, b = workdir / "e1.csv", workdir / "e2.csv"
        for out in (a, b):
            assert run(
                ["evaluate", "--model", model,
                 "--features", f"t1={workdir / 'test.fvec'}", "--out", out]
            ) == 0
        assert a.read_bytes() == b.read_bytes()


class TestCompare:
    def test_compare_table(self, workdir):
        out = workdir / "cmp.csv"
        assert run(
            ["compare", "--train", workdir / "train.fvec",
             "--test", workdir / "test.fvec", "--c", 1.0, "--out", out]
        ) == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].startswith("strategy,n_train_neg,n_train_pos,")
        strategies = [line.split(",")[0] for line in lines[1:]]
        assert strategies == [
            "weight-balancing", "under-sampling", "over-sampling",
            "data-level-ensemble",
        ]


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            run(["train-vdv"])  # missing required arguments
        assert exc_info.value.code == 2

    def test_unknown_command_is_2(self):
        with pytest.raises(SystemExit) as exc_info:
            run(["frobnicate"])
        assert exc_info.value.code == 2

    def test_missing_file_is_3(self, tmp_path, capsys):
        code = run(
            ["train-vdv", "--features", f"t1={tmp_path / 'nope.fvec'}",
             "--out", tmp_path / "m.vdv"]
        )
        assert code == 3
        assert "error:" in capsys.readouterr().err

    def test_corrupt_file_is_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.fvec"
        bad.write_bytes(b"not a feature file")
        code = run(
            ["train-vdv", "--features", f"t1={bad}", "--out", tmp_path / "m.vdv"]
        )
        assert code == 3

    def test_bad_tag_format_is_3(self, workdir, capsys):
        code = run(
            ["train-vdv", "--features", "no-equals-sign",
             "--out", workdir / "m.vdv"]
        )
        assert code == 3

    def test_duplicate_tag_is_3(self, workdir, capsys):
        f = workdir / "train.fvec"
        code = run(
            ["train-vdv", "--features", f"t1={f}", "--features", f"t1={f}",
             "--out", workdir / "m.vdv"]
        )
        assert code == 3

    def test_convergence_failure_is_4(self, workdir, capsys):
        code = run(
            ["train-vdv", "--features", f"t1={workdir / 'train.fvec'}",
             "--kernel", "linear", "--c", 100.0,
             "--tol", 1e-16, "--max-passes", 1,
             "--pca-tags", "", "--out", workdir / "m.vdv"]
        )
        assert code == 4
        assert "error:" in capsys.readouterr().err

    def test_wrong_feature_tag_on_predict_is_3(self, workdir):
        model = train_model(workdir)
        code = run(
            ["predict", "--model", model,
             "--features", f"wrong={workdir / 'test.fvec'}",
             "--out", workdir / "p.csv"]
        )
        assert code == 3
