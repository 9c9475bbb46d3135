"""Soft-margin kernel SVM trained by sequential minimal optimization.

The solver is the simplified SMO scheme: a working set of KKT violators is
swept each pass, the second index is drawn at random (seeded) with a
deterministic full-scan fallback, and the bias is maintained from the
unbounded side of each pair update. Class imbalance enters through per-sample
box bounds C_i = c * per_class_weight[label_i].

Model files use the little-endian "SVM1" layout:

    bytes 0..3  magic 53 56 4D 31 ("SVM1")
    byte  4     kernel family (0 = linear, 1 = polynomial)
    bytes 5..8  u32 degree
    then        f64 gamma, f64 coef0, f64 c, f64 bias
    then        u32 n_sv, u32 dim
    then        n_sv*dim f64 support vectors, row-major
    then        n_sv f64 dual coefficients (alpha_i * y_i)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import FeatureSet
from .errors import ConvergenceError, DataError, ModelFileError

GRAM_CACHE_LIMIT = 8192  # full Gram matrix cached up to this many samples

_FAMILIES = ("linear", "polynomial")
_FAMILY_CODE = {"linear": 0, "polynomial": 1}
_CODE_FAMILY = {v: k for k, v in _FAMILY_CODE.items()}

SVM_MAGIC = b"SVM1"

# Box-bound comparisons treat alphas within this relative distance of 0 or
# C_i as sitting on the bound, so clipping dust cannot masquerade as an
# unbounded support vector.
_BOUND_EPS = 1e-9

# Busy sweeps (every sweep makes an update) can run for a long time on
# ill-conditioned problems, so the loop audits the KKT conditions on a fixed
# cadence as well as after quiet sweeps. Failure is declared only when many
# consecutive audit windows improve neither the dual objective (scaled by the
# requested tolerance: tighter tolerances legitimately spend longer in the
# flat final approach) nor the best KKT violation seen so far — near the
# optimum the objective is flat at float precision while the violation still
# grinds down, and far from it the reverse holds. The pass cap is a
# last-resort backstop on top of that.
_AUDIT_EVERY = 32
_STALL_WINDOWS = 16
_STALL_SCALE = 1e-7
_VIOLATION_IMPROVEMENT = 1e-3  # relative drop in best violation that counts
_HARD_PASS_CAP = 50_000


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters. Linear ignores degree, gamma, coef0."""

    family: str = "polynomial"
    degree: int = 3
    gamma: float = 1.0
    coef0: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise DataError(f"unknown kernel family {self.family!r}")
        if self.family == "polynomial":
            if not (isinstance(self.degree, int) and self.degree >= 1):
                raise DataError(f"polynomial degree must be an int >= 1, got {self.degree}")
            if not (np.isfinite(self.gamma) and self.gamma > 0):
                raise DataError(f"gamma must be finite and > 0, got {self.gamma}")
            if not np.isfinite(self.coef0):
                raise DataError(f"coef0 must be finite, got {self.coef0}")


@dataclass(frozen=True)
class TrainConfig:
    """Solver settings. per_class_weight scales the box bound per label
    (index 0 for label 0, index 1 for label 1)."""

    c: float = 100.0
    tolerance: float = 1e-3
    max_passes: int = 10
    per_class_weight: tuple[float, float] | None = None
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise DataError(f"c must be finite and > 0, got {self.c}")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise DataError(f"tolerance must be finite and > 0, got {self.tolerance}")
        if self.max_passes < 1:
            raise DataError(f"max_passes must be >= 1, got {self.max_passes}")
        if self.per_class_weight is not None:
            w0, w1 = self.per_class_weight
            if not (np.isfinite(w0) and w0 > 0 and np.isfinite(w1) and w1 > 0):
                raise DataError(f"per_class_weight must be positive, got {self.per_class_weight}")


@dataclass(frozen=True)
class TrainingDiagnostics:
    objective: float
    n_passes: int
    n_updates: int
    max_kkt_violation: float


@dataclass(frozen=True, eq=False)
class TrainedSvm:
    """Frozen solver output: support vectors, their dual coefficients
    (alpha_i * y_i with y in {-1, +1}), and the bias."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    diagnostics: TrainingDiagnostics | None = None

    def __post_init__(self):
        sv = np.asarray(self.support_vectors, dtype=np.float64)
        dc = np.asarray(self.dual_coefs, dtype=np.float64)
        if sv.ndim != 2:
            raise DataError(f"support_vectors must be 2-D, got shape {sv.shape}")
        if dc.shape != (sv.shape[0],):
            raise DataError(
                f"dual_coefs shape {dc.shape} does not match {sv.shape[0]} support vectors"
            )
        if not (np.all(np.isfinite(sv)) and np.all(np.isfinite(dc))):
            raise DataError("support_vectors and dual_coefs must be finite")
        if not np.isfinite(self.bias):
            raise DataError("bias must be finite")
        sv.flags.writeable = False
        dc.flags.writeable = False
        object.__setattr__(self, "support_vectors", sv)
        object.__setattr__(self, "dual_coefs", dc)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.support_vectors.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrainedSvm):
            return NotImplemented
        return (
            np.array_equal(self.support_vectors, other.support_vectors)
            and np.array_equal(self.dual_coefs, other.dual_coefs)
            and self.bias == other.bias
            and self.kernel == other.kernel
            and self.c == other.c
        )


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Kernel value for two vectors of equal dimension."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DataError(f"kernel_eval dimension mismatch: {x.shape} vs {y.shape}")
    dot = float(x @ y)
    if spec.family == "linear":
        return dot
    return (spec.gamma * dot + spec.coef0) ** spec.degree


def kernel_matrix(spec: KernelSpec, x, y=None) -> np.ndarray:
    """Pairwise kernel values, shape (len(x), len(y)); y defaults to x."""
    x = np.asarray(x, dtype=np.float64)
    y = x if y is None else np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise DataError(f"kernel_matrix needs 2-D inputs of equal dim, got {x.shape} vs {y.shape}")
    dots = x @ y.T
    if spec.family == "linear":
        return dots
    return (spec.gamma * dots + spec.coef0) ** spec.degree


class _Gram:
    """Row access to the training Gram matrix; full cache for small n."""

    def __init__(self, spec: KernelSpec, x: np.ndarray):
        self.spec = spec
        self.x = x
        n = x.shape[0]
        self.full = kernel_matrix(spec, x) if n <= GRAM_CACHE_LIMIT else None
        self._rows: dict[int, np.ndarray] = {}

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        row = self._rows.get(i)
        if row is None:
            row = kernel_matrix(self.spec, self.x[i : i + 1], self.x)[0]
            if len(self._rows) > 512:
                self._rows.clear()
            self._rows[i] = row
        return row

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """K @ v, chunked when the full matrix is not cached."""
        if self.full is not None:
            return self.full @ v
        n = self.x.shape[0]
        out = np.empty(n)
        step = max(1, (GRAM_CACHE_LIMIT * GRAM_CACHE_LIMIT) // n)
        for lo in range(0, n, step):
            hi = min(n, lo + step)
            out[lo:hi] = kernel_matrix(self.spec, self.x[lo:hi], self.x) @ v
        return out


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, FeatureSet):
        return np.asarray(data.features, dtype=np.float64), np.asarray(data.labels)
    x, labels = data
    return np.asarray(x, dtype=np.float64), np.asarray(labels)


class _Solver:
    """State for one SMO run. Everything is numpy float64."""

    def __init__(self, x, y, c_per_sample, spec, cfg):
        self.x = x
        self.y = y
        self.c = c_per_sample
        self.cfg = cfg
        self.gram = _Gram(spec, x)
        n = x.shape[0]
        self.a = np.zeros(n)
        self.b = 0.0
        self.u = np.zeros(n)  # K @ (a * y), maintained incrementally
        self.rng = np.random.default_rng(cfg.seed)
        self.n_updates = 0
        self.eps = _BOUND_EPS * np.maximum(1.0, self.c)

    def at_lower(self, i):
        return self.a[i] <= self.eps[i]

    def at_upper(self, i):
        return self.a[i] >= self.c[i] - self.eps[i]

    def _violates(self, i) -> bool:
        r = self.y[i] * (self.u[i] + self.b - self.y[i])
        tol = self.cfg.tolerance
        return (r < -tol and not self.at_upper(i)) or (r > tol and not self.at_lower(i))

    def _attempt(self, i, j) -> bool:
        """Try the pair update (i, j); returns True when alphas moved."""
        a, y, c, u = self.a, self.y, self.c, self.u
        ki = self.gram.row(i)
        kj = self.gram.row(j)
        kii, kjj, kij = ki[i], kj[j], ki[j]
        s = y[i] * y[j]
        if s < 0:
            lo = max(0.0, a[j] - a[i])
            hi = min(c[j], c[i] + a[j] - a[i])
        else:
            lo = max(0.0, a[i] + a[j] - c[i])
            hi = min(c[j], a[i] + a[j])
        if hi - lo <= 1e-15 * (1.0 + hi):
            return False
        e_i = u[i] + self.b - y[i]
        e_j = u[j] + self.b - y[j]
        eta = 2.0 * kij - kii - kjj
        if eta < -1e-12:
            aj_new = a[j] - y[j] * (e_i - e_j) / eta
            aj_new = min(hi, max(lo, aj_new))
        else:
            # Flat or concave-up segment: the dual is linear along it, so the
            # maximum sits at an endpoint (Platt's endpoint rule).
            v_i = u[i] - a[i] * y[i] * kii - a[j] * y[j] * kij
            v_j = u[j] - a[i] * y[i] * kij - a[j] * y[j] * kjj

            def seg_obj(t):
                ai_t = a[i] + s * (a[j] - t)
                return (
                    ai_t
                    + t
                    - 0.5 * ai_t * ai_t * kii
                    - 0.5 * t * t * kjj
                    - s * ai_t * t * kij
                    - ai_t * y[i] * v_i
                    - t * y[j] * v_j
                )

            lo_obj, hi_obj = seg_obj(lo), seg_obj(hi)
            gap = 1e-12 * max(1.0, abs(lo_obj), abs(hi_obj))
            if lo_obj > hi_obj + gap:
                aj_new = lo
            elif hi_obj > lo_obj + gap:
                aj_new = hi
            else:
                return False
        if abs(aj_new - a[j]) < 1e-14 * (a[j] + aj_new + 1e-14):
            return False
        ai_new = a[i] + s * (a[j] - aj_new)
        ai_new = min(c[i], max(0.0, ai_new))  # clip arithmetic dust only

        d_i = y[i] * (ai_new - a[i])
        d_j = y[j] * (aj_new - a[j])
        b1 = self.b - e_i - d_i * kii - d_j * kij
        b2 = self.b - e_j - d_i * kij - d_j * kjj
        i_interior = self.eps[i] < ai_new < c[i] - self.eps[i]
        j_interior = self.eps[j] < aj_new < c[j] - self.eps[j]
        if i_interior:
            self.b = b1
        elif j_interior:
            self.b = b2
        else:
            self.b = 0.5 * (b1 + b2)
        self.u += d_i * ki + d_j * kj
        a[i] = ai_new
        a[j] = aj_new
        self.n_updates += 1
        return True

    def _step(self, i) -> bool:
        """One working-set step: random j first, then a seeded full scan."""
        n = self.a.shape[0]
        j = int(self.rng.integers(n - 1))
        if j >= i:
            j += 1
        if self._attempt(i, j):
            return True
        for j in self.rng.permutation(n):
            if j != i and self._attempt(i, int(j)):
                return True
        return False

    def sweep(self) -> int:
        """One pass over the current KKT violators."""
        changed = 0
        r = self.y * (self.u + self.b - self.y)
        tol = self.cfg.tolerance
        not_upper = self.a < self.c - self.eps
        not_lower = self.a > self.eps
        cand = np.flatnonzero(((r < -tol) & not_upper) | ((r > tol) & not_lower))
        for i in cand:
            i = int(i)
            if self._violates(i) and self._step(i):
                changed += 1
        return changed

    def refresh_u(self) -> None:
        """Recompute u = K @ (a * y) from scratch, killing incremental drift."""
        self.u = self.gram.matvec(self.a * self.y)

    def fitted_bias(self) -> float:
        """Bias refit from the unbounded support vectors (mean of their
        implied values), falling back to the midpoint of the interval the
        bound samples allow. Uses the current u; does not modify state."""
        g = self.y - self.u
        lower = self.a <= self.eps
        upper = self.a >= self.c - self.eps
        interior = ~lower & ~upper
        if np.any(interior):
            return float(np.mean(g[interior]))
        pos = self.y > 0
        lo_set = (lower & pos) | (upper & ~pos)  # constraints b >= g
        hi_set = (lower & ~pos) | (upper & pos)  # constraints b <= g
        lo = np.max(g[lo_set]) if np.any(lo_set) else None
        hi = np.min(g[hi_set]) if np.any(hi_set) else None
        if lo is not None and hi is not None:
            return float(0.5 * (lo + hi))
        return float(lo if lo is not None else hi)

    def refresh(self) -> None:
        self.refresh_u()
        self.b = self.fitted_bias()

    def max_kkt_violation(self, bias: float | None = None) -> float:
        b = self.b if bias is None else bias
        r = self.y * (self.u + b - self.y)
        not_upper = self.a < self.c - self.eps
        not_lower = self.a > self.eps
        up = np.where(not_upper, np.maximum(0.0, -r), 0.0)
        down = np.where(not_lower, np.maximum(0.0, r), 0.0)
        worst = np.maximum(up, down)
        return float(worst.max()) if worst.size else 0.0

    def objective(self) -> float:
        ay = self.a * self.y
        return float(self.a.sum() - 0.5 * (ay @ self.gram.matvec(ay)))


def train_svm(data, spec: KernelSpec, cfg: TrainConfig) -> TrainedSvm:
    """Solve the dual soft-margin problem on (features, binary labels).

    data is a FeatureSet or an (x, labels) pair. Labels map 0 -> -1, 1 -> +1.
    Raises ConvergenceError when the KKT audit still fails after max_passes
    consecutive sweeps without an update, or when sweeps keep updating but
    the dual objective has stopped improving.
    """
    x, labels = _as_xy(data)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise DataError(f"bad training shapes: {x.shape} features, {labels.shape} labels")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must all be 0 or 1")
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0 or n_pos == labels.shape[0]:
        raise DataError("training data must contain both classes")
    if not np.all(np.isfinite(x)):
        raise DataError("training features must be finite")

    y = np.where(labels == 1, 1.0, -1.0)
    w0, w1 = cfg.per_class_weight if cfg.per_class_weight is not None else (1.0, 1.0)
    c_per_sample = np.where(labels == 1, cfg.c * w1, cfg.c * w0)

    solver = _Solver(x, y, c_per_sample, spec, cfg)
    quiet = 0
    n_passes = 0
    converged = False
    audit_obj = 0.0  # dual objective at the previous periodic audit (starts 0 at a=0)
    best_viol = np.inf
    stalled = 0
    while n_passes < _HARD_PASS_CAP:
        n_passes += 1
        if not solver.sweep():
            quiet += 1
            solver.refresh()  # kills drift in u, refits the bias
            if solver.max_kkt_violation() <= cfg.tolerance:
                converged = True
                break
            if quiet >= cfg.max_passes:
                break
            continue
        quiet = 0
        if n_passes % _AUDIT_EVERY == 0:
            # Non-invasive audit: measure against a candidate refit bias but
            # only adopt it on success, so the sweep trajectory (which owns
            # its incrementally maintained bias) is not perturbed mid-flight.
            solver.refresh_u()
            cand = solver.fitted_bias()
            viol = solver.max_kkt_violation(cand)
            if viol <= cfg.tolerance:
                solver.b = cand
                converged = True
                break
            obj = float(solver.a.sum() - 0.5 * ((solver.a * solver.y) @ solver.u))
            floor = _STALL_SCALE * cfg.tolerance * max(1.0, abs(obj))
            improved = obj - audit_obj > floor
            if viol < best_viol * (1.0 - _VIOLATION_IMPROVEMENT):
                best_viol = viol
                improved = True
            stalled = 0 if improved else stalled + 1
            if stalled >= _STALL_WINDOWS:
                break  # updates keep landing but nothing is getting better
            audit_obj = obj

    if not converged:
        solver.refresh()  # report diagnostics from the canonical refit state
    diag = TrainingDiagnostics(
        objective=solver.objective(),
        n_passes=n_passes,
        n_updates=solver.n_updates,
        max_kkt_violation=solver.max_kkt_violation(),
    )
    if not converged:
        raise ConvergenceError(
            f"SMO failed to reach tolerance {cfg.tolerance:g}: "
            f"max KKT violation {diag.max_kkt_violation:g} after {diag.n_passes} passes "
            f"({diag.n_updates} updates)",
            diagnostics=diag,
        )

    sv_idx = np.flatnonzero(solver.a > 0)
    return TrainedSvm(
        support_vectors=x[sv_idx].copy(),
        dual_coefs=(solver.a * y)[sv_idx],
        bias=solver.b,
        kernel=spec,
        c=float(cfg.c),
        diagnostics=diag,
    )


def decision_values(model: TrainedSvm, x) -> np.ndarray:
    """f(x) = bias + sum_i dual_coef_i * k(sv_i, x) for each row of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise DataError(f"decision input shape {x.shape} does not match model dim {model.dim}")
    if model.n_support == 0:
        return np.full(x.shape[0], model.bias)
    return kernel_matrix(model.kernel, x, model.support_vectors) @ model.dual_coefs + model.bias


def decision_value(model: TrainedSvm, x) -> float:
    return float(decision_values(model, np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def predict(model: TrainedSvm, x) -> np.ndarray:
    """Label 1 where the decision value is > 0 or exactly 0, else 0."""
    return (decision_values(model, x) >= 0.0).astype(np.uint8)


def svm_to_bytes(model: TrainedSvm) -> bytes:
    sv = np.ascontiguousarray(model.support_vectors, dtype="<f8")
    dc = np.ascontiguousarray(model.dual_coefs, dtype="<f8")
    spec = model.kernel
    head = SVM_MAGIC + struct.pack(
        "<BIddddII",
        _FAMILY_CODE[spec.family],
        spec.degree,
        spec.gamma,
        spec.coef0,
        model.c,
        model.bias,
        model.n_support,
        model.dim,
    )
    return head + sv.tobytes() + dc.tobytes()


def svm_from_bytes(buf: bytes) -> TrainedSvm:
    head_len = 4 + struct.calcsize("<BIddddII")
    if len(buf) < head_len:
        raise ModelFileError(f"SVM blob too short: {len(buf)} bytes, header needs {head_len}")
    if buf[:4] != SVM_MAGIC:
        raise ModelFileError(f"bad SVM magic at byte 0: {buf[:4].hex()}")
    family_code, degree, gamma, coef0, c, bias, n_sv, dim = struct.unpack_from(
        "<BIddddII", buf, 4
    )
    if family_code not in _CODE_FAMILY:
        raise ModelFileError(f"unknown kernel family byte at offset 4: {family_code}")
    family = _CODE_FAMILY[family_code]
    if family == "polynomial" and degree < 1:
        raise ModelFileError(f"polynomial degree field is {degree}, must be >= 1")
    expect = head_len + 8 * n_sv * dim + 8 * n_sv
    if len(buf) != expect:
        raise ModelFileError(
            f"SVM blob length {len(buf)} != expected {expect} for n_sv={n_sv} dim={dim}"
        )
    sv = np.frombuffer(buf, dtype="<f8", count=n_sv * dim, offset=head_len)
    dc = np.frombuffer(buf, dtype="<f8", count=n_sv, offset=head_len + 8 * n_sv * dim)
    spec = (
        KernelSpec(family="linear", degree=degree, gamma=gamma, coef0=coef0)
        if family == "linear"
        else KernelSpec(family=family, degree=int(degree), gamma=gamma, coef0=coef0)
    )
    return TrainedSvm(
        support_vectors=sv.reshape(n_sv, dim),
        dual_coefs=dc,
        bias=bias,
        kernel=spec,
        c=c,
    )


def save_svm(model: TrainedSvm, path) -> None:
    with open(path, "wb") as fh:
        fh.write(svm_to_bytes(model))


def load_svm(path) -> TrainedSvm:
    with open(path, "rb") as fh:
        return svm_from_bytes(fh.read())
