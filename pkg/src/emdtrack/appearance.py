"""Sparse-coding-histogram appearance model.

A dictionary of local patches is sampled from a few object templates; each
window patch is then encoded as a nonnegative sparse combination of those
atoms, pooled across templates, and the pooled weights form a histogram
whose bins also carry the raw patch pixels and patch centers. An
Epanechnikov kernel re-weights the bins by distance from the window
center, and the ground distance mixes feature and spatial terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyTemplateSet,
    FeatureDimMismatch,
    NonConvergence,
    NormalizationDegenerate,
    PatchLargerThanWindow,
)

WEIGHT_SUM_TOL = 1e-9
# Atoms with squared norm below this are treated as empty (all-black patches).
_ZERO_ATOM_TOL = 1e-12


@dataclass(frozen=True)
class PatchScheme:
    """Sliding-window layout of local patches inside a normalized window."""

    patch_height: int
    patch_width: int
    step: int
    window_height: int
    window_width: int

    def __post_init__(self):
        if min(self.patch_height, self.patch_width, self.window_height,
               self.window_width) < 1:
            raise ValueError("patch and window dimensions must be positive")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if (self.patch_height > self.window_height
                or self.patch_width > self.window_width):
            raise PatchLargerThanWindow(
                f"patch {self.patch_height}x{self.patch_width} exceeds window "
                f"{self.window_height}x{self.window_width}"
            )

    @property
    def patch_pixels(self) -> int:
        return self.patch_height * self.patch_width

    @property
    def grid_rows(self) -> range:
        return range(0, self.window_height - self.patch_height + 1, self.step)

    @property
    def grid_cols(self) -> range:
        return range(0, self.window_width - self.patch_width + 1, self.step)

    @property
    def patch_count(self) -> int:
        return len(self.grid_rows) * len(self.grid_cols)

    def patch_centers(self) -> np.ndarray:
        """(K, 2) array of (x, y) patch centers relative to the window center."""
        cx = (self.window_width - 1) / 2.0
        cy = (self.window_height - 1) / 2.0
        centers = [
            (left + (self.patch_width - 1) / 2.0 - cx,
             top + (self.patch_height - 1) / 2.0 - cy)
            for top in self.grid_rows
            for left in self.grid_cols
        ]
        return np.asarray(centers, dtype=float)


def extract_patches(window: np.ndarray, scheme: PatchScheme) -> np.ndarray:
    """Vectorized grid patches of a window as a (patch_pixels, K) matrix."""
    window = np.asarray(window, dtype=float)
    if window.shape != (scheme.window_height, scheme.window_width):
        raise DimensionMismatch(
            f"window is {window.shape}, scheme expects "
            f"{(scheme.window_height, scheme.window_width)}"
        )
    cols = [
        window[top : top + scheme.patch_height,
               left : left + scheme.patch_width].ravel()
        for top in scheme.grid_rows
        for left in scheme.grid_cols
    ]
    return np.stack(cols, axis=1)


@dataclass
class Dictionary:
    """Patch dictionary: one column per (template, grid position) pair.

    Columns are template-major: column ``i*K + j`` is patch ``j`` of
    template ``i``. Atoms keep raw [0, 1] pixel values; the L2-normalized
    copies used for encoding are cached lazily. Instances are treated as
    immutable: template update builds a new Dictionary.
    """

    atoms: np.ndarray
    scheme: PatchScheme
    template_count: int

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        expected = (self.scheme.patch_pixels,
                    self.template_count * self.scheme.patch_count)
        if self.atoms.shape != expected:
            raise DimensionMismatch(
                f"atoms must be {expected}, got {self.atoms.shape}"
            )
        if self.atoms.min() < 0.0 or self.atoms.max() > 1.0 + 1e-12:
            raise ValueError("atom pixel values must lie in [0, 1]")

    @property
    def patch_count(self) -> int:
        return self.scheme.patch_count

    def patch_centers(self) -> np.ndarray:
        return self.scheme.patch_centers()

    @cached_property
    def _encoding_atoms(self) -> np.ndarray:
        return _unit_columns(self.atoms)


def _unit_columns(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    return matrix / safe


def build_dictionary(templates, scheme: PatchScheme) -> Dictionary:
    """Sample the patch grid of every template window into a Dictionary."""
    templates = list(templates)
    if not templates:
        raise EmptyTemplateSet("need at least one template window")
    blocks = [extract_patches(t, scheme) for t in templates]
    return Dictionary(
        atoms=np.concatenate(blocks, axis=1),
        scheme=scheme,
        template_count=len(templates),
    )


@dataclass
class SparseCode:
    """Nonnegative sparse coefficients of one encoded patch."""

    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.min() < 0.0:
            raise ValueError("sparse coefficients must be nonnegative")


def nonneg_lasso(
    design: np.ndarray,
    targets: np.ndarray,
    lam: float,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 1000,
) -> np.ndarray:
    """Cyclic coordinate descent for ``min ||e - D a||^2 + lam*sum(a), a >= 0``.

    ``targets`` may be a single vector or a (dim, n) batch solved jointly.
    Near-duplicate atoms make plain descent crawl near the optimum, so
    every few sweeps the stationarity system is solved exactly on each
    column's current support and accepted when the full KKT conditions
    hold. Raises NonConvergence if the KKT tolerance is not reached
    within ``max_sweeps`` full sweeps.
    """
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    single = targets.ndim == 1
    if single:
        targets = targets[:, None]
    if targets.shape[0] != design.shape[0]:
        raise DimensionMismatch(
            f"targets have dim {targets.shape[0]}, design expects {design.shape[0]}"
        )
    n_atoms = design.shape[1]
    gram = design.T @ design
    corr = design.T @ targets
    diag = gram.diagonal().copy()
    live = diag > _ZERO_ATOM_TOL
    coeffs = np.zeros((n_atoms, targets.shape[1]))
    done = np.zeros(targets.shape[1], dtype=bool)

    for sweep in range(max_sweeps):
        for k in range(n_atoms):
            if not live[k]:
                continue
            numer = corr[k] - lam / 2.0 - gram[k] @ coeffs + diag[k] * coeffs[k]
            coeffs[k] = np.maximum(numer / diag[k], 0.0)
        grad = 2.0 * (gram @ coeffs - corr) + lam
        done = _column_violations(coeffs, grad) <= kkt_tol
        if done.all():
            break
        if sweep % 5 == 4:
            for j in np.flatnonzero(~done):
                polished = _polish_support(gram, corr[:, j], lam, coeffs[:, j], kkt_tol)
                if polished is not None:
                    coeffs[:, j] = polished
                    done[j] = True
            if done.all():
                break
    if not done.all():
        raise NonConvergence(
            f"nonnegative LASSO missed KKT tolerance {kkt_tol} in {max_sweeps} sweeps"
        )
    return coeffs[:, 0] if single else coeffs


def _column_violations(coeffs: np.ndarray, grad: np.ndarray) -> np.ndarray:
    viol = np.where(coeffs > 0, np.abs(grad), np.maximum(-grad, 0.0))
    return viol.max(axis=0)


def _polish_support(gram, corr_col, lam, start, kkt_tol):
    """Active-set refinement from a warm start; None if it fails to verify.

    Alternates exact stationarity solves on the working support (minimal
    norm least squares handles duplicate atoms), dropping the most
    negative coordinate and admitting the worst dual violator, until the
    full KKT conditions verify or the round budget runs out. Acceptance is
    gated on the KKT check, so a failed refinement can never corrupt the
    iterate.
    """
    n = gram.shape[0]
    support = set(int(k) for k in np.flatnonzero(start > 1e-12))
    candidate = np.zeros(n)
    last_added = -1
    for _ in range(6 * n + 8):
        if support:
            idx = np.asarray(sorted(support), dtype=int)
            sub = gram[np.ix_(idx, idx)]
            solution, *_ = np.linalg.lstsq(sub, corr_col[idx] - lam / 2.0, rcond=None)
            if solution.min() < -1e-12:
                support.discard(int(idx[int(np.argmin(solution))]))
                continue
            candidate = np.zeros(n)
            candidate[idx] = np.maximum(solution, 0.0)
        else:
            idx = np.asarray([], dtype=int)
            candidate = np.zeros(n)
        grad = 2.0 * (gram @ candidate - corr_col) + lam
        if _kkt_violation(candidate, grad) <= kkt_tol:
            return candidate
        if idx.size and np.abs(grad[idx]).max() > kkt_tol:
            # exactly dependent atoms make the support system inconsistent
            # (no stationary point keeps them all active); retire the worst
            worst = int(idx[int(np.argmax(np.abs(grad[idx])))])
            if worst == last_added:
                return None  # add/drop cycle: this support family is stuck
            support.discard(worst)
            continue
        entering = int(np.argmin(grad))
        if grad[entering] >= -kkt_tol or entering in support:
            return None
        support.add(entering)
        last_added = entering
    return None


def _kkt_violation(coeffs: np.ndarray, grad: np.ndarray) -> float:
    """Worst stationarity violation: |grad| on the support, -grad off it."""
    on_support = coeffs > 0
    viol = np.where(on_support, np.abs(grad), np.maximum(-grad, 0.0))
    return float(viol.max()) if viol.size else 0.0


def encode_patch(
    patch: np.ndarray,
    dictionary: Dictionary,
    lam: float,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 1000,
) -> SparseCode:
    """Encode one patch against the dictionary atoms exactly as stored."""
    patch = np.asarray(patch, dtype=float)
    if patch.shape != (dictionary.atoms.shape[0],):
        raise DimensionMismatch(
            f"patch has length {patch.shape}, atoms expect "
            f"({dictionary.atoms.shape[0]},)"
        )
    coeffs = nonneg_lasso(dictionary.atoms, patch, lam, kkt_tol, max_sweeps)
    return SparseCode(coefficients=coeffs)


def max_alignment_pool(code: SparseCode, templates: int, positions: int):
    """Collapse a code to (weight, aligned position).

    Coefficients at the same grid position are summed across templates and
    the largest sum wins; ties go to the smallest position. The returned
    position is 1-based, matching the histogram bin convention.
    """
    coeffs = code.coefficients
    if coeffs.shape != (templates * positions,):
        raise DimensionMismatch(
            f"code has length {coeffs.shape}, expected {templates * positions}"
        )
    pooled = coeffs.reshape(templates, positions).sum(axis=0)
    best = int(np.argmax(pooled))
    return float(pooled[best]), best + 1


def build_histogram(
    window: np.ndarray,
    dictionary: Dictionary,
    lam: float,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 1000,
) -> "Signature":
    """Sparse-coding histogram of a window, one bin per grid patch.

    Patch vectors (and the dictionary atoms) are L2-normalized for the
    encoding step only; bin features keep the raw [0, 1] pixels. Bin
    weights are the pooled coefficient sums, L1-normalized at the end.
    """
    scheme = dictionary.scheme
    patches = extract_patches(window, scheme)
    codes = nonneg_lasso(dictionary._encoding_atoms, _unit_columns(patches), lam,
                         kkt_tol=kkt_tol, max_sweeps=max_sweeps)
    pooled = codes.reshape(dictionary.template_count, scheme.patch_count, -1).sum(axis=0)
    weights = pooled.max(axis=0)
    total = weights.sum()
    if total <= 0.0:
        raise NormalizationDegenerate("window produced an all-zero histogram")
    return Signature(
        weights=weights / total,
        features=patches.T.copy(),
        centers=scheme.patch_centers(),
    )


@dataclass
class Signature:
    """Histogram whose bins carry a weight, a feature vector, and a center."""

    weights: np.ndarray
    features: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        self.centers = np.asarray(self.centers, dtype=float)
        n = self.weights.size
        if self.features.shape[0] != n or self.centers.shape != (n, 2):
            raise DimensionMismatch("signature bin arrays disagree in length")
        if self.weights.min() < 0.0:
            raise ValueError("signature weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"signature weights must sum to 1, got {self.weights.sum()!r}")

    def __len__(self) -> int:
        return self.weights.size

    def with_weights(self, weights: np.ndarray) -> "Signature":
        return Signature(weights=weights, features=self.features, centers=self.centers)


@dataclass(frozen=True)
class GroundParams:
    """Feature/spatial mixing weight, kernel bandwidth, and distance scaling.

    ``spatial_scale`` multiplies center coordinates before squaring (e.g.
    1/window-diagonal brings the spatial term into [0, 1]);
    ``feature_scale`` multiplies the squared feature distance (e.g.
    1/patch-pixels turns the sum of squared pixel differences into the
    mean). Both default to 1 so the raw mixed distance is unchanged.
    """

    alpha: float
    bandwidth: float
    spatial_scale: float = 1.0
    feature_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly between 0 and 1")
        if self.bandwidth <= 0.0:
            raise ValueError("bandwidth must be positive")
        if self.spatial_scale <= 0.0:
            raise ValueError("spatial_scale must be positive")
        if self.feature_scale <= 0.0:
            raise ValueError("feature_scale must be positive")


def _kernel_profile(sig: Signature, displacement, params: GroundParams) -> np.ndarray:
    diff = sig.centers - np.asarray(displacement, dtype=float)
    radial = (diff * diff).sum(axis=1) / (params.bandwidth ** 2)
    return np.maximum(1.0 - radial, 0.0)


def kernel_contributions(
    sig: Signature, displacement, params: GroundParams
) -> np.ndarray:
    """Unnormalized kernel-weighted bin masses at the given displacement."""
    return _kernel_profile(sig, displacement, params) * np.abs(sig.weights)


def kernel_weights(sig: Signature, displacement, params: GroundParams) -> np.ndarray:
    """Kernel-weighted bin weights, normalized to sum to one.

    Bins whose centers fall at or beyond one bandwidth from the
    displacement contribute nothing.
    """
    contrib = kernel_contributions(sig, displacement, params)
    total = contrib.sum()
    if total <= 0.0:
        raise NormalizationDegenerate("all kernel contributions are zero")
    return contrib / total


def kernel_weight_gradient(
    sig: Signature, displacement, params: GroundParams
) -> np.ndarray:
    """Per-bin gradient of the unnormalized kernel sums w.r.t. displacement.

    The normalization constant is treated as locally fixed; bins outside
    the kernel support get a zero gradient.
    """
    displacement = np.asarray(displacement, dtype=float)
    diff = sig.centers - displacement
    inside = _kernel_profile(sig, displacement, params) > 0.0
    grad = (2.0 / params.bandwidth ** 2) * diff * np.abs(sig.weights)[:, None]
    grad[~inside] = 0.0
    return grad


def ground_distance_matrix(
    target: Signature, candidate: Signature, params: GroundParams
) -> np.ndarray:
    """Mixed squared feature/spatial distances between all bin pairs.

    Centers are multiplied by ``params.spatial_scale`` before squaring so
    callers can bring the spatial term onto the feature term's scale.
    """
    if target.features.shape[1] != candidate.features.shape[1]:
        raise FeatureDimMismatch(
            f"feature dims differ: {target.features.shape[1]} vs "
            f"{candidate.features.shape[1]}"
        )
    feat = _squared_distances(target.features, candidate.features)
    cent = _squared_distances(
        target.centers * params.spatial_scale,
        candidate.centers * params.spatial_scale,
    )
    return params.alpha * params.feature_scale * feat + (1.0 - params.alpha) * cent


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    cross = a @ b.T
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * cross
    return np.maximum(sq, 0.0)


# --- dictionary interchange ---

def save_dictionary(path, dictionary: Dictionary) -> None:
    """Write a dictionary as text: one header line, then the atom matrix.

    Header: ``m n L K window_height window_width step`` (the first four
    identify the layout, the rest make the file self-contained). Rows are
    the atom matrix row-major.
    """
    s = dictionary.scheme
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{s.patch_height} {s.patch_width} {dictionary.template_count} "
            f"{s.patch_count} {s.window_height} {s.window_width} {s.step}\n"
        )
        for row in dictionary.atoms:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_dictionary(path) -> Dictionary:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 7:
            raise DimensionMismatch("dictionary header must have 7 integers")
        ph, pw, count, k, wh, ww, step = (int(t) for t in header)
        atoms = np.loadtxt(fh, ndmin=2)
    scheme = PatchScheme(
        patch_height=ph, patch_width=pw, step=step,
        window_height=wh, window_width=ww,
    )
    if scheme.patch_count != k:
        raise DimensionMismatch("header patch count disagrees with the scheme")
    return Dictionary(atoms=atoms, scheme=scheme, template_count=count)
