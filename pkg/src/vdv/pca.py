"""PCA on mean-centered data via thin SVD.

Wide matrices (dim much larger than n_samples) go through the Gram trick: an
n x n eigendecomposition plus a QR re-orthonormalization, which is what makes
full fits on CNN feature vectors (dim in the tens of thousands) tractable.
"full" keeps min(n_samples, dim) components; centering drops the rank to
n_samples - 1, so the trailing component then has singular value 0 and is an
orthonormal completion of the row space, not a data direction.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ModelFileError

# Gram path when dim > _GRAM_RATIO * n_samples.
_GRAM_RATIO = 1.5

# Seed for the deterministic null-direction completion (not user-facing).
_COMPLETION_SEED = 0x5EED

PCA_MAGIC = b"PCA1"


@dataclass(frozen=True, eq=False)
class PcaModel:
    """mean (dim,), components (k, dim) with orthonormal rows ordered by
    non-increasing singular value."""

    mean: np.ndarray
    components: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        comps = np.asarray(self.components, dtype=np.float64)
        svals = np.asarray(self.singular_values, dtype=np.float64)
        if mean.ndim != 1 or comps.ndim != 2 or comps.shape[1] != mean.shape[0]:
            raise DataError(
                f"inconsistent PCA shapes: mean {mean.shape}, components {comps.shape}"
            )
        if svals.shape != (comps.shape[0],):
            raise DataError(
                f"{svals.shape[0]} singular values for {comps.shape[0]} components"
            )
        if comps.shape[0] < 1:
            raise DataError("PcaModel needs at least one component")
        if not (
            np.all(np.isfinite(mean))
            and np.all(np.isfinite(comps))
            and np.all(np.isfinite(svals))
        ):
            raise DataError("PCA fields must be finite")
        if np.any(svals < 0) or np.any(np.diff(svals) > 0):
            raise DataError("singular values must be non-negative and non-increasing")
        for arr in (mean, comps, svals):
            arr.flags.writeable = False
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "singular_values", svals)

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.components.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PcaModel):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.components, other.components)
            and np.array_equal(self.singular_values, other.singular_values)
        )


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each component's largest-magnitude entry (first on ties)
    positive, so fits are reproducible across code paths."""
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def _complete_basis(v: np.ndarray, need: int, rng: np.random.Generator) -> np.ndarray:
    """Append `need` orthonormal columns orthogonal to the columns of v."""
    d = v.shape[0]
    cols = [v]
    added = 0
    while added < need:
        cand = rng.standard_normal(d)
        for block in cols:  # two rounds of Gram-Schmidt for stability
            cand -= block @ (block.T @ cand)
        for block in cols:
            cand -= block @ (block.T @ cand)
        norm = np.linalg.norm(cand)
        if norm < 1e-6:  # fell into the span; draw again
            continue
        new = (cand / norm).reshape(d, 1)
        cols.append(new)
        added += 1
    return np.hstack(cols)


def fit_pca(data, n_components="full") -> PcaModel:
    """Fit on the rows of data. n_components is an int in [1, min(n, dim)]
    or "full" for min(n, dim)."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"fit_pca needs a 2-D matrix, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise DataError("fit_pca needs at least two samples")
    if not np.all(np.isfinite(x)):
        raise DataError("fit_pca input must be finite")
    k_full = min(n, d)
    if n_components == "full":
        k = k_full
    else:
        k = int(n_components)
        if not 1 <= k <= k_full:
            raise DataError(f"n_components must be in [1, {k_full}], got {n_components}")

    mean = x.mean(axis=0)
    xc = x - mean

    if d > _GRAM_RATIO * n:
        gram = xc @ xc.T
        evals, evecs = np.linalg.eigh(gram)  # ascending
        evals = evals[::-1][:k].copy()
        # contiguous copy: a negative-stride view would force the upcoming
        # projection off the BLAS fast path
        evecs = np.ascontiguousarray(evecs[:, ::-1][:, :k])
        svals = np.sqrt(np.clip(evals, 0.0, None))
        # The eigensolver's noise floor on true-zero eigenvalues of X Xt sits
        # near eps * s_max^2, i.e. sqrt(eps) * s_max on the singular scale;
        # centering also caps the true rank at n - 1 regardless of the data.
        cutoff = (
            (svals[0] if svals.size else 0.0)
            * np.sqrt(max(n, d) * np.finfo(np.float64).eps)
            * 4.0
        )
        rank = min(int(np.sum(svals > cutoff)), n - 1, k)
        v = xc.T @ evecs[:, :rank]  # columns scale as the singular values
        if rank:
            v, _ = np.linalg.qr(v)
        else:
            v = np.empty((d, 0))
        if rank < k:
            rng = np.random.default_rng(_COMPLETION_SEED)
            v = _complete_basis(v, k - rank, rng)
            svals = svals.copy()
            svals[rank:] = 0.0
        components = v.T
    else:
        _, s, vt = np.linalg.svd(xc, full_matrices=False)
        components = vt[:k]
        svals = s[:k]

    return PcaModel(
        mean=mean, components=_fix_signs(components), singular_values=svals
    )


def pca_transform(model: PcaModel, data) -> np.ndarray:
    """Project rows onto the components: (data - mean) @ components.T."""
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DataError(f"transform input shape {x.shape} does not match dim {model.dim}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, coords) -> np.ndarray:
    """Map projected coordinates back: coords @ components + mean."""
    z = np.asarray(coords, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != model.n_components:
        raise DataError(
            f"coords shape {z.shape} does not match {model.n_components} components"
        )
    return z @ model.components + model.mean


def pca_to_bytes(model: PcaModel) -> bytes:
    head = PCA_MAGIC + struct.pack("<II", model.n_components, model.dim)
    return (
        head
        + np.ascontiguousarray(model.mean, dtype="<f8").tobytes()
        + np.ascontiguousarray(model.components, dtype="<f8").tobytes()
        + np.ascontiguousarray(model.singular_values, dtype="<f8").tobytes()
    )


def pca_from_bytes(buf: bytes) -> PcaModel:
    head_len = 4 + 8
    if len(buf) < head_len:
        raise ModelFileError(f"PCA blob too short: {len(buf)} bytes, header needs {head_len}")
    if buf[:4] != PCA_MAGIC:
        raise ModelFileError(f"bad PCA magic at byte 0: {buf[:4].hex()}")
    k, dim = struct.unpack_from("<II", buf, 4)
    expect = head_len + 8 * dim + 8 * k * dim + 8 * k
    if len(buf) != expect:
        raise ModelFileError(
            f"PCA blob length {len(buf)} != expected {expect} for k={k} dim={dim}"
        )
    off = head_len
    mean = np.frombuffer(buf, dtype="<f8", count=dim, offset=off)
    off += 8 * dim
    comps = np.frombuffer(buf, dtype="<f8", count=k * dim, offset=off).reshape(k, dim)
    off += 8 * k * dim
    svals = np.frombuffer(buf, dtype="<f8", count=k, offset=off)
    return PcaModel(mean=mean, components=comps, singular_values=svals)
