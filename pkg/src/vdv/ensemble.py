"""Two-level voting ensembles of kernel SVMs.

A BlockModel holds K SVMs, one per balanced mini-training-set of a single
feature space (one extractor tag), optionally each behind its own full PCA.
A VdvModel stacks several blocks, one per feature space, and majority-votes
across them. Ties predict the positive class at both levels; that is the
recall-first stance of the whole design.

Containers ("BLK1", "VDV1") are little-endian, with u64 length prefixes in
front of every nested blob so they can be sliced without parsing the blobs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .dataset import FeatureSet, build_balanced_subsets
from .errors import DataError, ModelFileError
from .pca import PcaModel, fit_pca, pca_from_bytes, pca_to_bytes, pca_transform
from .svm import (
    KernelSpec,
    TrainConfig,
    TrainedSvm,
    decision_values,
    svm_from_bytes,
    svm_to_bytes,
    train_svm,
)

BLOCK_MAGIC = b"BLK1"
VDV_MAGIC = b"VDV1"

SCORE_RULES = ("vote-fraction", "mean-decision")


def majority_vote(votes) -> int:
    """Majority label of a non-empty 0/1 vote list; a tie returns 1."""
    arr = np.asarray(votes)
    if arr.ndim != 1 or arr.size == 0:
        raise DataError("majority_vote needs a non-empty 1-D vote list")
    if not np.all((arr == 0) | (arr == 1)):
        raise DataError("votes must be 0 or 1")
    return int(2 * int(arr.sum()) >= arr.size)


def _features(data) -> np.ndarray:
    x = data.features if isinstance(data, FeatureSet) else data
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class BlockModel:
    """K per-subset SVMs over one feature space, with optional per-subset PCA.

    All SVMs share one kernel spec; with PCA, svm i consumes pca i's
    coordinates, so svm i's dim equals pca i's component count.
    """

    extractor_tag: str
    svms: tuple[TrainedSvm, ...]
    pcas: tuple[PcaModel, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.extractor_tag, str) or not self.extractor_tag:
            raise DataError("extractor_tag must be a non-empty string")
        svms = tuple(self.svms)
        if not svms:
            raise DataError("BlockModel needs at least one SVM")
        spec = svms[0].kernel
        if any(m.kernel != spec for m in svms):
            raise DataError("all SVMs in a block must share one kernel spec")
        pcas = None if self.pcas is None else tuple(self.pcas)
        if pcas is not None:
            if len(pcas) != len(svms):
                raise DataError(f"{len(pcas)} PCAs for {len(svms)} SVMs")
            dims = {p.dim for p in pcas}
            if len(dims) != 1:
                raise DataError(f"PCA input dims differ across subsets: {sorted(dims)}")
            for i, (p, m) in enumerate(zip(pcas, svms)):
                if p.n_components != m.dim:
                    raise DataError(
                        f"subset {i}: PCA keeps {p.n_components} components "
                        f"but its SVM expects dim {m.dim}"
                    )
        else:
            dims = {m.dim for m in svms}
            if len(dims) != 1:
                raise DataError(f"SVM dims differ across subsets: {sorted(dims)}")
        object.__setattr__(self, "svms", svms)
        object.__setattr__(self, "pcas", pcas)

    @property
    def k(self) -> int:
        return len(self.svms)

    @property
    def input_dim(self) -> int:
        return self.pcas[0].dim if self.pcas is not None else self.svms[0].dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockModel):
            return NotImplemented
        return (
            self.extractor_tag == other.extractor_tag
            and self.svms == other.svms
            and self.pcas == other.pcas
        )


def train_block(
    train: FeatureSet,
    extractor_tag: str,
    spec: KernelSpec,
    cfg: TrainConfig,
    use_pca: bool = False,
) -> BlockModel:
    """Build the balanced subsets of train (seeded by cfg.seed) and fit one
    SVM per subset, each behind a full per-subset PCA when use_pca is set."""
    minis = build_balanced_subsets(train, cfg.seed)
    svms = []
    pcas = [] if use_pca else None
    for mini in minis:
        sub_cfg = replace(cfg, seed=cfg.seed + mini.subset_index)
        x = np.asarray(mini.features, dtype=np.float64)
        if use_pca:
            p = fit_pca(x, "full")
            pcas.append(p)
            x = pca_transform(p, x)
        svms.append(train_svm((x, mini.labels), spec, sub_cfg))
    return BlockModel(
        extractor_tag=extractor_tag,
        svms=tuple(svms),
        pcas=None if pcas is None else tuple(pcas),
    )


def _check_block_input(block: BlockModel, x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != block.input_dim:
        raise DataError(
            f"block {block.extractor_tag!r} expects dim {block.input_dim}, "
            f"got shape {x.shape}"
        )


def block_votes(block: BlockModel, data) -> np.ndarray:
    """(n, k) matrix of per-subset-model votes on raw feature rows."""
    x = _features(data)
    _check_block_input(block, x)
    cols = []
    for i, svm in enumerate(block.svms):
        xi = pca_transform(block.pcas[i], x) if block.pcas is not None else x
        cols.append(decision_values(svm, xi) >= 0.0)
    return np.stack(cols, axis=1).astype(np.uint8)


def block_predict(block: BlockModel, data) -> np.ndarray:
    """Per-row majority over the K votes; ties go to 1."""
    votes = block_votes(block, data)
    return (2 * votes.sum(axis=1) >= block.k).astype(np.uint8)


def block_score(block: BlockModel, data) -> np.ndarray:
    """Fraction of the K models voting positive, in [0, 1]."""
    return block_votes(block, data).mean(axis=1)


def block_decision_scores(block: BlockModel, data) -> np.ndarray:
    """Mean decision value across the K models (the alternative score rule)."""
    x = _features(data)
    _check_block_input(block, x)
    acc = np.zeros(x.shape[0])
    for i, svm in enumerate(block.svms):
        xi = pca_transform(block.pcas[i], x) if block.pcas is not None else x
        acc += decision_values(svm, xi)
    return acc / block.k


def block_scores(block: BlockModel, data, score_rule: str = "vote-fraction") -> np.ndarray:
    if score_rule == "vote-fraction":
        return block_score(block, data)
    if score_rule == "mean-decision":
        return block_decision_scores(block, data)
    raise DataError(f"unknown score rule {score_rule!r}; pick one of {SCORE_RULES}")


@dataclass(frozen=True, eq=False)
class VdvModel:
    """Ordered blocks, one per feature space, majority-voted per sample."""

    blocks: tuple[BlockModel, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise DataError("VdvModel needs at least one block")
        tags = [b.extractor_tag for b in blocks]
        if len(set(tags)) != len(tags):
            raise DataError(f"duplicate block tags: {tags}")
        object.__setattr__(self, "blocks", blocks)

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(b.extractor_tag for b in self.blocks)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VdvModel):
            return NotImplemented
        return self.blocks == other.blocks


def _per_block_features(model: VdvModel, features_by_tag) -> list[np.ndarray]:
    given = set(features_by_tag)
    want = set(model.tags)
    if given != want:
        raise DataError(
            f"feature tags {sorted(given)} do not match model blocks {sorted(want)}"
        )
    out = []
    n = None
    for block in model.blocks:
        x = _features(features_by_tag[block.extractor_tag])
        _check_block_input(block, x)
        if n is None:
            n = x.shape[0]
        elif x.shape[0] != n:
            raise DataError("per-block feature files disagree on sample count")
        out.append(x)
    return out


def vdv_predict(model: VdvModel, features_by_tag) -> np.ndarray:
    """Majority over the per-block predictions; ties go to 1."""
    xs = _per_block_features(model, features_by_tag)
    preds = np.stack(
        [block_predict(b, x) for b, x in zip(model.blocks, xs)], axis=1
    )
    return (2 * preds.sum(axis=1) >= len(model.blocks)).astype(np.uint8)


def vdv_score(model: VdvModel, features_by_tag) -> np.ndarray:
    """Mean of the per-block positive-vote fractions, in [0, 1]."""
    xs = _per_block_features(model, features_by_tag)
    cols = [block_score(b, x) for b, x in zip(model.blocks, xs)]
    return np.mean(np.stack(cols, axis=1), axis=1)


def vdv_decision_scores(model: VdvModel, features_by_tag) -> np.ndarray:
    """Mean of the per-block mean decision values."""
    xs = _per_block_features(model, features_by_tag)
    cols = [block_decision_scores(b, x) for b, x in zip(model.blocks, xs)]
    return np.mean(np.stack(cols, axis=1), axis=1)


def vdv_scores(model: VdvModel, features_by_tag, score_rule: str = "vote-fraction") -> np.ndarray:
    if score_rule == "vote-fraction":
        return vdv_score(model, features_by_tag)
    if score_rule == "mean-decision":
        return vdv_decision_scores(model, features_by_tag)
    raise DataError(f"unknown score rule {score_rule!r}; pick one of {SCORE_RULES}")


def train_vdv(
    named_features,
    spec: KernelSpec,
    cfg: TrainConfig,
    pca_tags: tuple[str, ...] = ("densenet121",),
) -> VdvModel:
    """Train one block per (tag, FeatureSet) pair, in the given order.

    The feature sets must describe the same samples: identical sample_ids and
    labels. PCA is enabled for blocks whose tag is listed in pca_tags.
    """
    pairs = list(named_features)
    if not pairs:
        raise DataError("train_vdv needs at least one (tag, features) pair")
    first = pairs[0][1]
    for tag, fs in pairs[1:]:
        if fs.sample_ids != first.sample_ids:
            raise DataError(f"block {tag!r} lists different sample_ids")
        if not np.array_equal(fs.labels, first.labels):
            raise DataError(f"block {tag!r} carries different labels")
    blocks = tuple(
        train_block(fs, tag, spec, cfg, use_pca=tag in pca_tags) for tag, fs in pairs
    )
    return VdvModel(blocks=blocks)


def _pack_blob(blob: bytes) -> bytes:
    return struct.pack("<Q", len(blob)) + blob


class _Cursor:
    def __init__(self, buf: bytes, what: str):
        self.buf = buf
        self.off = 0
        self.what = what

    def take(self, size: int, field: str) -> bytes:
        if len(self.buf) < self.off + size:
            raise ModelFileError(
                f"truncated {self.what}: {field} needs {size} bytes at byte {self.off}"
            )
        out = self.buf[self.off : self.off + size]
        self.off += size
        return out

    def u32(self, field: str) -> int:
        return struct.unpack("<I", self.take(4, field))[0]

    def u64(self, field: str) -> int:
        return struct.unpack("<Q", self.take(8, field))[0]

    def blob(self, field: str) -> bytes:
        return self.take(self.u64(field + " length"), field)

    def done(self) -> None:
        if self.off != len(self.buf):
            raise ModelFileError(f"trailing bytes in {self.what} after byte {self.off}")


def block_to_bytes(block: BlockModel) -> bytes:
    tag = block.extractor_tag.encode("utf-8")
    parts = [
        BLOCK_MAGIC,
        struct.pack("<I", len(tag)),
        tag,
        struct.pack("<IB", block.k, 1 if block.pcas is not None else 0),
    ]
    if block.pcas is not None:
        parts.extend(_pack_blob(pca_to_bytes(p)) for p in block.pcas)
    parts.extend(_pack_blob(svm_to_bytes(m)) for m in block.svms)
    return b"".join(parts)


def block_from_bytes(buf: bytes) -> BlockModel:
    cur = _Cursor(buf, "block container")
    if cur.take(4, "magic") != BLOCK_MAGIC:
        raise ModelFileError(f"bad block magic at byte 0: {buf[:4].hex()}")
    tag = cur.take(cur.u32("tag length"), "tag").decode("utf-8")
    k = cur.u32("k")
    flags = cur.take(1, "pca flag")[0]
    if flags not in (0, 1):
        raise ModelFileError(f"bad pca flag byte: {flags}")
    pcas = None
    if flags:
        pcas = tuple(pca_from_bytes(cur.blob(f"pca {i}")) for i in range(k))
    svms = tuple(svm_from_bytes(cur.blob(f"svm {i}")) for i in range(k))
    cur.done()
    return BlockModel(extractor_tag=tag, svms=svms, pcas=pcas)


def vdv_to_bytes(model: VdvModel) -> bytes:
    parts = [VDV_MAGIC, struct.pack("<I", len(model.blocks))]
    parts.extend(_pack_blob(block_to_bytes(b)) for b in model.blocks)
    return b"".join(parts)


def vdv_from_bytes(buf: bytes) -> VdvModel:
    cur = _Cursor(buf, "vdv container")
    if cur.take(4, "magic") != VDV_MAGIC:
        raise ModelFileError(f"bad vdv magic at byte 0: {buf[:4].hex()}")
    n = cur.u32("block count")
    blocks = tuple(block_from_bytes(cur.blob(f"block {i}")) for i in range(n))
    cur.done()
    return VdvModel(blocks=blocks)


def save_block(block: BlockModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(block_to_bytes(block))


def load_block(path) -> BlockModel:
    with open(path, "rb") as fh:
        return block_from_bytes(fh.read())


def save_vdv(model: VdvModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(vdv_to_bytes(model))


def load_vdv(path) -> VdvModel:
    with open(path, "rb") as fh:
        return vdv_from_bytes(fh.read())


def load_model(path) -> VdvModel | BlockModel:
    """Load either container, telling them apart by magic."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] == VDV_MAGIC:
        return vdv_from_bytes(buf)
    if buf[:4] == BLOCK_MAGIC:
        return block_from_bytes(buf)
    raise ModelFileError(f"unknown model magic at byte 0: {buf[:4].hex()}")
