"""Command line interface.

Every command is deterministic given its inputs and --seed: rerunning writes
byte-identical outputs. Exit codes: 0 success, 2 usage error, 3 data or file
error, 4 solver convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .baselines import run_comparison
from .dataset import (
    FeatureSet,
    build_balanced_subsets,
    feature_file_info,
    load_feature_set,
    patient_wise_split,
    random_split,
    save_feature_set,
    synth_imbalanced,
)
from .ensemble import (
    SCORE_RULES,
    BlockModel,
    VdvModel,
    block_predict,
    block_scores,
    load_model,
    save_block,
    save_vdv,
    train_block,
    train_vdv,
    vdv_predict,
    vdv_scores,
)
from .errors import ConvergenceError, DataError, MissingLabelsError, VdvError
from .metrics import EvalReport, evaluate, roc_points
from .svm import KernelSpec, TrainConfig

PCA_DEFAULT_TAG = "densenet121"


def _add_solver_args(p: argparse.ArgumentParser, default_kernel: str) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--kernel", choices=("linear", "poly"), default=default_kernel)
    g.add_argument("--gamma", type=float, default=0.002)
    g.add_argument("--degree", type=int, default=3)
    g.add_argument("--coef0", type=float, default=1.0)
    g.add_argument("--c", type=float, default=100.0)
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--max-passes", type=int, default=10)


def _spec_of(args) -> KernelSpec:
    if args.kernel == "linear":
        return KernelSpec(family="linear")
    return KernelSpec(
        family="polynomial", degree=args.degree, gamma=args.gamma, coef0=args.coef0
    )


def _cfg_of(args) -> TrainConfig:
    return TrainConfig(
        c=args.c, tolerance=args.tol, max_passes=args.max_passes, seed=args.seed
    )


def _parse_tagged(pairs: list[str]) -> list[tuple[str, str]]:
    out = []
    seen = set()
    for item in pairs:
        tag, sep, path = item.partition("=")
        if not sep or not tag or not path:
            raise DataError(f"--features needs TAG=PATH, got {item!r}")
        if tag in seen:
            raise DataError(f"duplicate feature tag {tag!r}")
        seen.add(tag)
        out.append((tag, path))
    return out


def _read_labels_csv(path) -> dict[str, int]:
    table = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "label"]:
            raise DataError(f"labels file needs header sample_id,label, got {header}")
        for row in reader:
            if len(row) != 2:
                raise DataError(f"bad labels row: {row}")
            sid, val = row
            if val not in ("0", "1"):
                raise DataError(f"label for {sid!r} must be 0 or 1, got {val!r}")
            if sid in table:
                raise DataError(f"duplicate sample_id {sid!r} in labels file")
            table[sid] = int(val)
    return table


def _load_tagged_features(
    args, need_labels: bool
) -> list[tuple[str, FeatureSet]]:
    """Load every --features file; harmonize labels across them.

    With --labels, the CSV assigns labels by sample id (and overrides any
    label block). Without it, label-less files are allowed only when labels
    are not needed (predict), where they load as all-zero placeholders.
    """
    pairs = _parse_tagged(args.features)
    label_map = _read_labels_csv(args.labels) if getattr(args, "labels", None) else None
    out = []
    for tag, path in pairs:
        try:
            fs = load_feature_set(path)
        except MissingLabelsError:
            if label_map is None and need_labels:
                raise
            n, _, _, _ = feature_file_info(path)
            fs = load_feature_set(path, labels=np.zeros(n, dtype=np.uint8))
        if label_map is not None:
            try:
                mapped = [label_map[sid] for sid in fs.sample_ids]
            except KeyError as exc:
                raise DataError(f"labels file is missing sample_id {exc.args[0]!r}")
            fs = FeatureSet(
                features=fs.features,
                labels=np.asarray(mapped, dtype=np.uint8),
                sample_ids=fs.sample_ids,
                patient_ids=fs.patient_ids,
            )
        out.append((tag, fs))
    first = out[0][1]
    for tag, fs in out[1:]:
        if fs.sample_ids != first.sample_ids:
            raise DataError(f"feature file for {tag!r} lists different sample_ids")
        if not np.array_equal(fs.labels, first.labels):
            raise DataError(f"feature file for {tag!r} carries different labels")
    return out


def _as_vdv(model) -> VdvModel:
    return VdvModel(blocks=(model,)) if isinstance(model, BlockModel) else model


def _write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _print_training_log(model: VdvModel) -> None:
    for b in model.blocks:
        print(f"block={b.extractor_tag} k={b.k} pca={int(b.pcas is not None)}")
        for i, m in enumerate(b.svms):
            d = m.diagnostics
            print(
                f"block={b.extractor_tag} subset={i} n_sv={m.n_support} "
                f"objective={d.objective:.6f} passes={d.n_passes} "
                f"updates={d.n_updates} max_kkt={d.max_kkt_violation:.3e}"
            )


def cmd_synth(args) -> int:
    fs = synth_imbalanced(args.n_majority, args.n_minority, args.dim, args.separation, args.seed)
    save_feature_set(fs, args.out)
    n0, n1 = fs.class_counts()
    print(f"wrote {args.out}: n={fs.n_samples} dim={fs.dim} neg={n0} pos={n1}")
    return 0


def cmd_split(args) -> int:
    fs = load_feature_set(args.features)
    split = patient_wise_split if args.patient_wise else random_split
    train, test = split(fs, args.test_fraction, args.seed)
    save_feature_set(train, args.train_out)
    save_feature_set(test, args.test_out)
    print(f"wrote {args.train_out}: n={train.n_samples}")
    print(f"wrote {args.test_out}: n={test.n_samples}")
    return 0


def cmd_subsets(args) -> int:
    fs = load_feature_set(args.features)
    minis = build_balanced_subsets(fs, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    print(f"k={len(minis)} subset_size={minis[0].n_samples}")
    for mini in minis:
        path = os.path.join(args.out_dir, f"mini_{mini.subset_index:03d}.fvec")
        save_feature_set(mini, path)
        print(f"wrote {path}: n={mini.n_samples}")
    return 0


def _use_pca(args, tag: str) -> bool:
    if args.pca == "on":
        return True
    if args.pca == "off":
        return False
    return tag == PCA_DEFAULT_TAG


def cmd_train_block(args) -> int:
    pairs = _load_tagged_features(args, need_labels=True)
    if len(pairs) != 1:
        raise DataError("train-block takes exactly one --features TAG=PATH")
    tag, fs = pairs[0]
    block = train_block(fs, tag, _spec_of(args), _cfg_of(args), _use_pca(args, tag))
    save_block(block, args.out)
    _print_training_log(VdvModel(blocks=(block,)))
    print(f"wrote {args.out}")
    return 0


def cmd_train_vdv(args) -> int:
    pairs = _load_tagged_features(args, need_labels=True)
    pca_tags = tuple(t for t in args.pca_tags.split(",") if t)
    model = train_vdv(pairs, _spec_of(args), _cfg_of(args), pca_tags)
    save_vdv(model, args.out)
    _print_training_log(model)
    print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = _as_vdv(load_model(args.model))
    pairs = _load_tagged_features(args, need_labels=False)
    feats = {tag: fs.features for tag, fs in pairs}
    preds = vdv_predict(model, feats)
    scores = vdv_scores(model, feats, args.score_rule)
    sids = pairs[0][1].sample_ids
    lines = ["sample_id,prediction,score"]
    lines.extend(
        f"{sid},{int(p)},{s:.10g}" for sid, p, s in zip(sids, preds, scores)
    )
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}: n={len(sids)} positive={int(preds.sum())}")
    return 0


def cmd_evaluate(args) -> int:
    model = _as_vdv(load_model(args.model))
    pairs = _load_tagged_features(args, need_labels=True)
    feats = {tag: fs.features for tag, fs in pairs}
    labels = pairs[0][1].labels
    rows = []
    for block in model.blocks:
        x = feats.get(block.extractor_tag)
        if x is None:
            raise DataError(f"missing --features for block {block.extractor_tag!r}")
        report = evaluate(
            labels,
            block_predict(block, x),
            block_scores(block, x, args.score_rule),
            score_rule=args.score_rule,
        )
        rows.append((block.extractor_tag, report))
    vdv_report = evaluate(
        labels,
        vdv_predict(model, feats),
        vdv_scores(model, feats, args.score_rule),
        score_rule=args.score_rule,
    )
    rows.append(("vdv", vdv_report))
    lines = ["model," + EvalReport.CSV_HEADER + ",score_rule"]
    lines.extend(f"{name},{r.csv_row()},{r.score_rule}" for name, r in rows)
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.roc_out:
        _write_roc(args.roc_out, vdv_scores(model, feats, args.score_rule), labels)
    print(f"wrote {args.out}")
    return 0


def _write_roc(path, scores, labels) -> None:
    pts = roc_points(scores, labels)
    lines = ["threshold,fpr,tpr"]
    lines.extend(f"{t:.10g},{f:.10g},{r:.10g}" for t, f, r in pts)
    _write_text(path, "\n".join(lines) + "\n")


def cmd_roc(args) -> int:
    model = _as_vdv(load_model(args.model))
    pairs = _load_tagged_features(args, need_labels=True)
    feats = {tag: fs.features for tag, fs in pairs}
    _write_roc(args.out, vdv_scores(model, feats, args.score_rule), pairs[0][1].labels)
    print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    train = load_feature_set(args.train)
    test = load_feature_set(args.test)
    rows = run_comparison(
        train,
        test,
        _spec_of(args),
        _cfg_of(args),
        jitter_sigma=args.jitter_sigma,
        score_rule=args.score_rule,
    )
    lines = [
        "strategy,n_train_neg,n_train_pos,"
        "accuracy,recall,specificity,auc,precision,f1,f2,g_mean,score_rule"
    ]
    for row in rows:
        r = row.report
        vals = (r.accuracy, r.recall, r.specificity, r.auc, r.precision, r.f1, r.f2, r.g_mean)
        lines.append(
            f"{row.strategy},{row.n_train_neg},{row.n_train_pos},"
            + ",".join(f"{100.0 * v:.2f}" for v in vals)
            + f",{r.score_rule}"
        )
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vdv",
        description="Voting ensembles of kernel SVMs over feature-vector files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, kernel=None):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=0)
        if kernel is not None:
            _add_solver_args(p, kernel)
        return p

    p = add("synth", cmd_synth, "generate an imbalanced Gaussian feature file")
    p.add_argument("--n-majority", type=int, required=True)
    p.add_argument("--n-minority", type=int, required=True)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = add("split", cmd_split, "split a feature file into train and test")
    p.add_argument("--features", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--patient-wise", action="store_true")
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)

    p = add("subsets", cmd_subsets, "write the balanced mini-training-sets")
    p.add_argument("--features", required=True)
    p.add_argument("--out-dir", required=True)

    p = add("train-block", cmd_train_block, "train one block of subset SVMs", kernel="poly")
    p.add_argument("--features", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--labels", help="CSV sample_id,label supplying or overriding labels")
    p.add_argument("--pca", choices=("auto", "on", "off"), default="auto")
    p.add_argument("--out", required=True)

    p = add("train-vdv", cmd_train_vdv, "train a block per feature space", kernel="poly")
    p.add_argument("--features", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--labels", help="CSV sample_id,label supplying or overriding labels")
    p.add_argument(
        "--pca-tags",
        default=PCA_DEFAULT_TAG,
        help="comma-separated tags trained behind per-subset PCA",
    )
    p.add_argument("--out", required=True)

    p = add("predict", cmd_predict, "predict labels for feature files")
    p.add_argument("--model", required=True)
    p.add_argument("--features", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--score-rule", choices=SCORE_RULES, default="vote-fraction")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "score a model against labeled features")
    p.add_argument("--model", required=True)
    p.add_argument("--features", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--labels", help="CSV sample_id,label supplying or overriding labels")
    p.add_argument("--score-rule", choices=SCORE_RULES, default="vote-fraction")
    p.add_argument("--out", required=True)
    p.add_argument("--roc-out")

    p = add("roc", cmd_roc, "write the ROC sweep for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--labels", help="CSV sample_id,label supplying or overriding labels")
    p.add_argument("--score-rule", choices=SCORE_RULES, default="vote-fraction")
    p.add_argument("--out", required=True)

    p = add("compare", cmd_compare, "compare the four imbalance strategies", kernel="linear")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--jitter-sigma", type=float, default=0.0)
    p.add_argument("--score-rule", choices=SCORE_RULES, default="vote-fraction")
    p.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except VdvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
