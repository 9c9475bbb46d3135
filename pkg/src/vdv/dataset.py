"""Labeled feature-vector datasets: container type, binary file format, splits.

The on-disk format is a flat little-endian layout:

    bytes 0..5   magic 46 56 45 43 00 01 ("FVEC" + version 0.1)
    bytes 6..9   u32 n_samples
    bytes 10..13 u32 dim
    byte  14     flags (bit0 = label block present, bit1 = id table present)
    then         n_samples*dim f32 feature values, row-major
    then         n_samples label bytes (0 or 1), if bit0
    then         u32 byte length + that many bytes of text, if bit1;
                 one "sample_id,patient_id\\n" line per sample, empty
                 patient field meaning no patient id

Everything in this module is deterministic given (inputs, seed).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FeatureFileError, MissingLabelsError

MAGIC = b"FVEC\x00\x01"
_FLAG_LABELS = 0x01
_FLAG_TABLE = 0x02
_HEADER_LEN = 15

_ID_BAD_CHARS = (",", "\n", "\r")


def _check_id(kind: str, value: str, row: int) -> None:
    if not isinstance(value, str) or not value:
        raise DataError(f"{kind} for row {row} must be a non-empty string")
    if any(ch in value for ch in _ID_BAD_CHARS):
        raise DataError(f"{kind} {value!r} (row {row}) contains a comma or newline")


def _default_ids(n: int) -> tuple[str, ...]:
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Immutable bundle of feature rows, binary labels, and sample identity.

    features: (n, dim) float32, finite. labels: (n,) uint8 in {0, 1}.
    sample_ids are unique; patient_ids, when present, group samples by source
    patient. Arrays are stored read-only.
    """

    features: np.ndarray
    labels: np.ndarray
    sample_ids: tuple[str, ...] = None
    patient_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {feats.shape}")
        n, dim = feats.shape
        if dim < 1:
            raise DataError("features must have at least one column")
        if not np.all(np.isfinite(feats)):
            raise DataError("features contain non-finite values")
        labels = np.asarray(self.labels)
        if labels.shape != (n,):
            raise DataError(
                f"labels shape {labels.shape} does not match {n} feature rows"
            )
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise DataError("labels must all be 0 or 1")
        labels = labels.astype(np.uint8)

        sids = self.sample_ids
        sids = _default_ids(n) if sids is None else tuple(str(s) for s in sids)
        if len(sids) != n:
            raise DataError(f"{len(sids)} sample_ids for {n} rows")
        for i, sid in enumerate(sids):
            _check_id("sample_id", sid, i)
        if len(set(sids)) != n:
            raise DataError("sample_ids are not unique")

        pids = self.patient_ids
        if pids is not None:
            pids = tuple(str(p) for p in pids)
            if len(pids) != n:
                raise DataError(f"{len(pids)} patient_ids for {n} rows")
            for i, pid in enumerate(pids):
                _check_id("patient_id", pid, i)

        feats.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", sids)
        object.__setattr__(self, "patient_ids", pids)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> tuple[int, int]:
        """(count of label 0, count of label 1)."""
        ones = int(np.sum(self.labels))
        return self.n_samples - ones, ones

    def take(self, indices) -> "FeatureSet":
        """Row subset, identity columns kept aligned."""
        idx = np.asarray(indices, dtype=np.intp)
        return FeatureSet(
            features=self.features[idx],
            labels=self.labels[idx],
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            patient_ids=None
            if self.patient_ids is None
            else tuple(self.patient_ids[i] for i in idx),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and self.sample_ids == other.sample_ids
            and self.patient_ids == other.patient_ids
        )


@dataclass(frozen=True, eq=False)
class MiniTrainingSet(FeatureSet):
    """One balanced slice of a training set: a majority slice plus the whole
    minority class. subset_index is its position within the block."""

    subset_index: int = 0


def save_feature_set(fs: FeatureSet, path) -> None:
    """Write fs in the binary layout above. Byte-identical for equal inputs."""
    n, dim = fs.features.shape
    has_table = fs.patient_ids is not None or fs.sample_ids != _default_ids(n)
    flags = _FLAG_LABELS | (_FLAG_TABLE if has_table else 0)
    parts = [MAGIC, struct.pack("<IIB", n, dim, flags)]
    parts.append(np.ascontiguousarray(fs.features, dtype="<f4").tobytes())
    parts.append(fs.labels.astype(np.uint8).tobytes())
    if has_table:
        pids = fs.patient_ids or ("",) * n
        blob = "".join(
            f"{sid},{pid}\n" for sid, pid in zip(fs.sample_ids, pids)
        ).encode("utf-8")
        parts.append(struct.pack("<I", len(blob)))
        parts.append(blob)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def feature_file_info(path) -> tuple[int, int, bool, bool]:
    """Header summary without loading the body:
    (n_samples, dim, has_labels, has_id_table)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER_LEN)
    _need(head, 0, _HEADER_LEN, "header")
    if head[:6] != MAGIC:
        raise FeatureFileError(f"bad magic at byte 0: {head[:6].hex()} != {MAGIC.hex()}")
    n, dim, flags = struct.unpack_from("<IIB", head, 6)
    if flags & ~(_FLAG_LABELS | _FLAG_TABLE):
        raise FeatureFileError(f"unknown flag bits at byte 14: 0x{flags:02x}")
    return n, dim, bool(flags & _FLAG_LABELS), bool(flags & _FLAG_TABLE)


def _need(buf: bytes, offset: int, size: int, what: str) -> None:
    if len(buf) < offset + size:
        raise FeatureFileError(
            f"truncated file: {what} needs {size} bytes at byte {offset}, "
            f"file ends at {len(buf)}"
        )


def load_feature_set(path, labels=None) -> FeatureSet:
    """Read a feature file.

    labels fills in for a file whose label block is absent; passing it for a
    file that already has labels is an error (no silent override).
    """
    with open(path, "rb") as fh:
        buf = fh.read()

    _need(buf, 0, _HEADER_LEN, "header")
    if buf[:6] != MAGIC:
        raise FeatureFileError(f"bad magic at byte 0: {buf[:6].hex()} != {MAGIC.hex()}")
    n, dim, flags = struct.unpack_from("<IIB", buf, 6)
    if dim == 0:
        raise FeatureFileError("dim field at byte 10 is zero")
    if flags & ~(_FLAG_LABELS | _FLAG_TABLE):
        raise FeatureFileError(f"unknown flag bits at byte 14: 0x{flags:02x}")

    offset = _HEADER_LEN
    feat_bytes = 4 * n * dim
    _need(buf, offset, feat_bytes, "feature block")
    feats = np.frombuffer(buf, dtype="<f4", count=n * dim, offset=offset)
    feats = feats.reshape(n, dim)
    if not np.all(np.isfinite(feats)):
        raise FeatureFileError(f"non-finite feature values in block at byte {offset}")
    offset += feat_bytes

    if flags & _FLAG_LABELS:
        if labels is not None:
            raise DataError("file already carries labels; do not pass labels=")
        _need(buf, offset, n, "label block")
        labels = np.frombuffer(buf, dtype=np.uint8, count=n, offset=offset)
        if labels.size and labels.max(initial=0) > 1:
            raise FeatureFileError(f"label byte > 1 in block at byte {offset}")
        offset += n
    elif labels is None:
        raise MissingLabelsError(
            "file has no label block (flag bit0 clear); pass labels= to supply them"
        )

    sample_ids = None
    patient_ids = None
    if flags & _FLAG_TABLE:
        _need(buf, offset, 4, "id table length")
        (blob_len,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        _need(buf, offset, blob_len, "id table")
        try:
            text = buf[offset : offset + blob_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FeatureFileError(f"id table at byte {offset} is not utf-8") from exc
        offset += blob_len
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) != n:
            raise FeatureFileError(
                f"id table has {len(lines)} lines for {n} samples"
            )
        sids, pids = [], []
        for i, line in enumerate(lines):
            sid, sep, pid = line.partition(",")
            if not sep:
                raise FeatureFileError(f"id table line {i} has no comma: {line!r}")
            sids.append(sid)
            pids.append(pid)
        sample_ids = tuple(sids)
        empties = sum(1 for p in pids if p == "")
        if empties == 0:
            patient_ids = tuple(pids)
        elif empties != n:
            raise FeatureFileError("id table mixes empty and non-empty patient ids")

    if offset != len(buf):
        raise FeatureFileError(f"trailing bytes after offset {offset}")

    return FeatureSet(
        features=feats, labels=labels, sample_ids=sample_ids, patient_ids=patient_ids
    )


def partition_by_class(fs: FeatureSet) -> tuple[FeatureSet, FeatureSet]:
    """Split into (majority, minority) by label count; a tie makes label 0 the
    majority. Both classes must be present."""
    n0, n1 = fs.class_counts()
    if n0 == 0 or n1 == 0:
        raise DataError("partition_by_class needs both classes present")
    maj_label = 0 if n0 >= n1 else 1
    maj_idx = np.flatnonzero(fs.labels == maj_label)
    min_idx = np.flatnonzero(fs.labels != maj_label)
    return fs.take(maj_idx), fs.take(min_idx)


def build_balanced_subsets(train: FeatureSet, seed: int) -> list[MiniTrainingSet]:
    """Cut the majority class into K = floor(n_maj/n_min) disjoint slices of
    size n_min (after seeded uniform removal of the excess) and pair each
    slice with the whole minority class.

    One seeded permutation does both jobs: its first K*n_min entries are the
    kept majority rows, and consecutive n_min chunks are the slices.
    """
    maj, mino = partition_by_class(train)
    k = maj.n_samples // mino.n_samples
    rng = np.random.default_rng(seed)
    perm = rng.permutation(maj.n_samples)
    slices = perm[: k * mino.n_samples].reshape(k, mino.n_samples)
    out = []
    for idx in range(k):
        part = maj.take(np.sort(slices[idx]))
        both_pids = part.patient_ids is not None and mino.patient_ids is not None
        out.append(
            MiniTrainingSet(
                features=np.vstack([part.features, mino.features]),
                labels=np.concatenate([part.labels, mino.labels]),
                sample_ids=part.sample_ids + mino.sample_ids,
                patient_ids=(part.patient_ids + mino.patient_ids)
                if both_pids
                else None,
                subset_index=idx,
            )
        )
    return out


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _check_fraction(test_fraction: float) -> None:
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")


def random_split(
    fs: FeatureSet, test_fraction: float, seed: int
) -> tuple[FeatureSet, FeatureSet]:
    """Seeded sample-level split; test gets round(n * test_fraction) rows.
    Returns (train, test), each keeping the original row order."""
    _check_fraction(test_fraction)
    n_test = _round_half_up(fs.n_samples * test_fraction)
    perm = np.random.default_rng(seed).permutation(fs.n_samples)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return fs.take(train_idx), fs.take(test_idx)


def patient_wise_split(
    fs: FeatureSet, test_fraction: float, seed: int
) -> tuple[FeatureSet, FeatureSet]:
    """Seeded split that keeps every patient's samples on one side.

    Whole patient groups are assigned to the test side until it reaches the
    sample target, so the achieved fraction is within one group of the
    requested one. Fewer than two patients, or a split leaving a side empty,
    is an error.
    """
    _check_fraction(test_fraction)
    if fs.patient_ids is None:
        raise DataError("patient_wise_split needs patient_ids")
    groups: dict[str, list[int]] = {}
    for i, pid in enumerate(fs.patient_ids):
        groups.setdefault(pid, []).append(i)
    if len(groups) < 2:
        raise DataError("patient_wise_split needs at least two patients")
    order = list(groups)
    perm = np.random.default_rng(seed).permutation(len(order))
    target = _round_half_up(fs.n_samples * test_fraction)
    test_idx: list[int] = []
    cut = 0
    while cut < len(order) and len(test_idx) < target:
        test_idx.extend(groups[order[perm[cut]]])
        cut += 1
    if not test_idx or len(test_idx) == fs.n_samples:
        raise DataError(
            "patient_wise_split left one side empty; adjust test_fraction"
        )
    test_mask = np.zeros(fs.n_samples, dtype=bool)
    test_mask[test_idx] = True
    return fs.take(np.flatnonzero(~test_mask)), fs.take(np.flatnonzero(test_mask))


def synth_imbalanced(
    n_maj: int, n_min: int, dim: int, separation: float, seed: int
) -> FeatureSet:
    """Two unit-variance Gaussian clouds whose means sit `separation` apart
    along the first axis; label 0 at the origin, label 1 shifted. Patient ids
    cover consecutive pairs of samples."""
    if n_maj < 1 or n_min < 1 or dim < 1:
        raise DataError("synth_imbalanced needs n_maj, n_min, dim all >= 1")
    if not np.isfinite(separation) or separation < 0:
        raise DataError(f"separation must be finite and >= 0, got {separation}")
    rng = np.random.default_rng(seed)
    feats = rng.normal(0.0, 1.0, size=(n_maj + n_min, dim))
    feats[n_maj:, 0] += separation
    labels = np.concatenate([np.zeros(n_maj, np.uint8), np.ones(n_min, np.uint8)])
    n = n_maj + n_min
    return FeatureSet(
        features=feats.astype(np.float32),
        labels=labels,
        sample_ids=tuple(f"s{i:06d}" for i in range(n)),
        patient_ids=tuple(f"p{i // 2:05d}" for i in range(n)),
    )
