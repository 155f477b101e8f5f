"""Iterative EMD tracking loop with scale/particle search and template update.

Each frame, candidate windows are seeded around the previous (or externally
predicted) center. A candidate iterates: build its kernel-weighted sparse
histogram, solve the EMD against the target signature, express the optimum
as a linear form in the candidate weights, and step one pixel against the
resulting gradient until the distance stops improving. The best candidate
across seeds and scales wins. The newest dictionary template is replaced
when the tracked appearance scores worse than the decayed memory of the
last update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .appearance import (
    Dictionary,
    GroundParams,
    PatchScheme,
    Signature,
    _polish_support,
    build_dictionary,
    build_histogram,
    ground_distance_matrix,
    kernel_contributions,
    kernel_weight_gradient,
)
from .emd import TransportProblem, solve_emd, weight_linear_form
from .errors import NonConvergence, NormalizationDegenerate, OutOfFrame
from .imageops import extract_window

_ORIGIN = np.zeros(2)
_COMPASS = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]


@dataclass
class BoundingBox:
    """Axis-aligned box: center in pixels plus the cumulative scale factor."""

    center: np.ndarray
    width: float
    height: float
    scale: float = 1.0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)

    @classmethod
    def from_xywh(cls, x, y, w, h, scale: float = 1.0) -> "BoundingBox":
        return cls(center=np.asarray([x + w / 2.0, y + h / 2.0]),
                   width=float(w), height=float(h), scale=scale)

    def to_xywh(self) -> tuple[float, float, float, float]:
        return (float(self.center[0] - self.width / 2.0),
                float(self.center[1] - self.height / 2.0),
                float(self.width), float(self.height))


@dataclass(frozen=True)
class TrackerConfig:
    """Everything the loop needs; defaults follow the 32x32-window setup."""

    window_height: int = 32
    window_width: int = 32
    patch_height: int = 16
    patch_width: int = 16
    patch_step: int = 8
    l1_penalty: float = 0.01
    encode_tol: float = 1e-4
    alpha: float = 0.5
    bandwidth: float | None = None  # None: half the window diagonal
    gamma0: float = 0.95
    template_count: int = 10
    n_iter: int = 10
    n_scal: int = 3
    scale_step: float = 0.02
    particle_count: int = 4
    particle_offsets: tuple[tuple[float, float], ...] | None = None
    max_pivots: int | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")
        if self.n_scal < 1:
            raise ValueError("n_scal must be >= 1")
        if not 0.0 < self.scale_step < 1.0:
            raise ValueError("scale_step must lie in (0, 1)")
        if self.particle_count < 0:
            raise ValueError("particle_count must be >= 0")
        if not 0.0 < self.gamma0 < 1.0:
            raise ValueError("gamma0 must lie in (0, 1)")
        if self.template_count < 1:
            raise ValueError("template_count must be >= 1")
        if self.l1_penalty < 0.0:
            raise ValueError("l1_penalty must be nonnegative")
        if self.encode_tol <= 0.0:
            raise ValueError("encode_tol must be positive")

    def scheme(self) -> PatchScheme:
        return PatchScheme(
            patch_height=self.patch_height,
            patch_width=self.patch_width,
            step=self.patch_step,
            window_height=self.window_height,
            window_width=self.window_width,
        )

    def window_diagonal(self) -> float:
        return math.hypot(self.window_width, self.window_height)

    def ground_params(self) -> GroundParams:
        bandwidth = self.bandwidth
        if bandwidth is None:
            bandwidth = 0.5 * self.window_diagonal()
        # both distance terms brought into [0, 1]: centers measured in
        # window diagonals, features as mean squared pixel difference
        return GroundParams(
            alpha=self.alpha,
            bandwidth=bandwidth,
            spatial_scale=1.0 / self.window_diagonal(),
            feature_scale=1.0 / (self.patch_height * self.patch_width),
        )

    def scale_levels(self) -> list[float]:
        levels = [1.0]
        ring = 1
        while len(levels) < self.n_scal:
            levels.append(1.0 - ring * self.scale_step)
            if len(levels) < self.n_scal:
                levels.append(1.0 + ring * self.scale_step)
            ring += 1
        return levels

    def seed_offsets(self) -> list[tuple[float, float]]:
        if self.particle_offsets is not None:
            pattern = [tuple(map(float, o)) for o in self.particle_offsets]
        else:
            bx = 5.0 * self.window_width / 32.0
            by = 5.0 * self.window_height / 32.0
            pattern = [(bx, 0.0), (-bx, 0.0), (0.0, by), (0.0, -by)]
        offsets: list[tuple[float, float]] = []
        ring = 1
        while len(offsets) < self.particle_count:
            offsets.extend((ox * ring, oy * ring) for ox, oy in pattern)
            ring += 1
        return offsets[: self.particle_count]


@dataclass
class TrackerState:
    """Mutable per-sequence state: model, box, and update bookkeeping."""

    box: BoundingBox
    dictionary: Dictionary
    target_signature: Signature
    config: TrackerConfig
    templates: list
    base_window: np.ndarray
    update_weight: float = 1.0
    frames_since_update: int = 0

    def __post_init__(self):
        if not 0.0 < self.update_weight <= 1.0:
            raise ValueError("update_weight must lie in (0, 1]")
        if self.frames_since_update < 0:
            raise ValueError("frames_since_update must be >= 0")


def spawn_seeds(center, config: TrackerConfig) -> list[tuple[np.ndarray, float]]:
    """Deterministic (center, scale) candidates: the seed itself first.

    The unscaled level leads each seed's scale list so exact-tie EMDs
    resolve to "no change".
    """
    center = np.asarray(center, dtype=float)
    seeds = [center]
    seeds.extend(center + np.asarray(off) for off in config.seed_offsets())
    return [(seed, level) for seed in seeds for level in config.scale_levels()]


def _compass_step(direction: np.ndarray) -> np.ndarray:
    """Quantize a direction onto the nearest of the 8 unit compass steps."""
    angle = math.atan2(direction[1], direction[0])
    sector = int(round(angle / (math.pi / 4.0))) % 8
    return np.asarray(_COMPASS[sector], dtype=float)


def _center_inside(center, image_shape) -> bool:
    rows, cols = image_shape
    return 0.0 <= center[0] <= cols - 1.0 and 0.0 <= center[1] <= rows - 1.0


def _evaluate_candidate(state: TrackerState, image, center, scale):
    """EMD of the window at (center, scale) and its displacement gradient."""
    cfg = state.config
    params = cfg.ground_params()
    window = extract_window(
        image, center,
        (state.box.width * scale, state.box.height * scale),
        (cfg.window_height, cfg.window_width),
    )
    hist = build_histogram(window, state.dictionary, cfg.l1_penalty,
                           kkt_tol=cfg.encode_tol)
    contrib = kernel_contributions(hist, _ORIGIN, params)
    total = contrib.sum()
    if total <= 0.0:
        raise NormalizationDegenerate("candidate kernel weights are all zero")
    candidate = hist.with_weights(contrib / total)
    costs = ground_distance_matrix(state.target_signature, candidate, params)
    problem = TransportProblem(
        supplies=state.target_signature.weights,
        demands=candidate.weights,
        costs=costs,
    )
    solution = solve_emd(problem, cfg.max_pivots)
    form = weight_linear_form(problem, solution)
    bin_grads = kernel_weight_gradient(hist, _ORIGIN, params)
    gradient = (form.demand_part @ bin_grads) / total
    return solution.objective, gradient


def track_frame(
    state: TrackerState, image: np.ndarray, initial_center
) -> tuple[BoundingBox, float]:
    """Locate the target in one frame; the state itself is not mutated.

    Every seed/scale candidate walks one pixel at a time against the EMD
    gradient and stops at the first increase; the candidate with the
    smallest final EMD wins, earlier candidates winning ties.
    """
    image = np.asarray(image, dtype=float)
    cache: dict = {}

    def evaluate(center, scale):
        key = (float(center[0]), float(center[1]), scale)
        if key not in cache:
            cache[key] = _evaluate_candidate(state, image, center, scale)
        return cache[key]

    best = None
    for seed, scale in spawn_seeds(initial_center, state.config):
        center = np.asarray(seed, dtype=float)
        if not _center_inside(center, image.shape):
            continue
        emd, gradient = evaluate(center, scale)
        for _ in range(state.config.n_iter):
            if not np.isfinite(gradient).all() or np.hypot(*gradient) < 1e-12:
                break
            nxt = center + _compass_step(-gradient)
            if not _center_inside(nxt, image.shape):
                break
            emd_next, grad_next = evaluate(nxt, scale)
            if emd < emd_next:
                break
            center, emd, gradient = nxt, emd_next, grad_next
        if best is None or emd < best[0]:
            best = (emd, center, scale)
    if best is None:
        raise OutOfFrame("every candidate window left the image")

    emd, center, scale = best
    box = BoundingBox(
        center=center,
        width=state.box.width * scale,
        height=state.box.height * scale,
        scale=state.box.scale * scale,
    )
    return box, float(emd)


def template_update_weight(elapsed: int, emd: float, gamma0: float) -> float:
    """Exponentially decayed template score: gamma0^elapsed * exp(-emd)."""
    if not 0.0 < gamma0 < 1.0:
        raise ValueError("gamma0 must lie in (0, 1)")
    if emd < 0.0:
        raise ValueError("emd must be nonnegative")
    if elapsed < 0:
        raise ValueError("elapsed must be >= 0")
    return gamma0 ** elapsed * math.exp(-emd)


def reconstruct_window(window, templates, lam, kkt_tol=1e-6, max_iters=1000):
    """Denoise a window as a nonnegative combination of whole templates.

    Solves the LASSO over the template stack augmented with identity
    (trivial) columns, then rebuilds from the template coefficients alone
    so whatever the identity block absorbed is discarded. The identity
    block is mutually orthogonal, so it is minimized exactly in one shot
    per outer pass.
    """
    target = np.asarray(window, dtype=float).ravel()
    stack = np.stack([np.asarray(t, float).ravel() for t in templates], axis=1)
    gram = stack.T @ stack
    corr = stack.T @ target
    diag = gram.diagonal().copy()
    live = diag > 1e-12
    coef = np.zeros(stack.shape[1])
    noise = np.zeros(target.size)

    def _template_violation(resid):
        grad = -2.0 * (stack.T @ resid) + lam
        return np.where(coef > 0, np.abs(grad), np.maximum(-grad, 0.0)).max()

    for pass_idx in range(max_iters):
        for k in range(stack.shape[1]):
            if not live[k]:
                continue
            numer = (corr[k] - stack[:, k] @ noise - lam / 2.0
                     - gram[k] @ coef + diag[k] * coef[k])
            coef[k] = max(numer / diag[k], 0.0)
        partial = target - stack @ coef
        noise = np.maximum(partial - lam / 2.0, 0.0)
        if _template_violation(partial - noise) <= kkt_tol:
            break
        if pass_idx % 5 == 4:
            # near-duplicate templates stall the sweeps; solve the template
            # block exactly on its support with the noise block held fixed
            polished = _polish_support(gram, stack.T @ (target - noise), lam,
                                       coef, kkt_tol)
            if polished is not None:
                coef = polished
                partial = target - stack @ coef
                noise = np.maximum(partial - lam / 2.0, 0.0)
                if _template_violation(partial - noise) <= kkt_tol:
                    break
    else:
        raise NonConvergence(
            f"template reconstruction missed KKT tolerance {kkt_tol} "
            f"in {max_iters} passes"
        )
    recon = stack @ coef
    return np.clip(recon, 0.0, 1.0).reshape(np.asarray(window).shape)


def build_target_model(templates, base_window, config: TrackerConfig):
    """(dictionary, target signature) from the template set.

    The signature always comes from the base (first-frame) window encoded
    against the current dictionary.
    """
    dictionary = build_dictionary(templates, config.scheme())
    params = config.ground_params()
    hist = build_histogram(base_window, dictionary, config.l1_penalty,
                           kkt_tol=config.encode_tol)
    contrib = kernel_contributions(hist, _ORIGIN, params)
    total = contrib.sum()
    if total <= 0.0:
        raise NormalizationDegenerate("target kernel weights are all zero")
    return dictionary, hist.with_weights(contrib / total)


def maybe_update_template(
    state: TrackerState, tracked_window: np.ndarray, emd: float
) -> TrackerState:
    """Replace the newest dictionary template when the match has degraded.

    The candidate score exp(-emd) is compared against the stored score
    decayed by gamma0^elapsed; on replacement the tracked window is first
    denoised through the trivial-template reconstruction, and only the
    last template's atom columns change.
    """
    cfg = state.config
    candidate_weight = math.exp(-emd)
    stored_weight = state.update_weight * cfg.gamma0 ** state.frames_since_update
    if candidate_weight < stored_weight:
        recon = reconstruct_window(tracked_window, state.templates,
                                   cfg.l1_penalty, kkt_tol=cfg.encode_tol)
        state.templates[-1] = recon
        state.dictionary, state.target_signature = build_target_model(
            state.templates, state.base_window, cfg
        )
        state.update_weight = candidate_weight
        state.frames_since_update = 0
    else:
        state.frames_since_update += 1
    return state


class Tracker:
    """Per-sequence driver: bootstrap the template set, then step frames.

    Until the dictionary holds its configured number of templates, each
    tracked window is appended as a new template (bootstrap); afterwards
    the decay-gated template update takes over.
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config if config is not None else TrackerConfig()
        self.state: TrackerState | None = None

    def initialize(self, frame: np.ndarray, box: BoundingBox) -> None:
        frame = np.asarray(frame, dtype=float)
        cfg = self.config
        window = extract_window(
            frame, box.center, (box.width, box.height),
            (cfg.window_height, cfg.window_width),
        )
        dictionary, signature = build_target_model([window], window, cfg)
        self.state = TrackerState(
            box=box,
            dictionary=dictionary,
            target_signature=signature,
            config=cfg,
            templates=[window],
            base_window=window,
        )

    def step(self, frame: np.ndarray, seed_center=None) -> tuple[BoundingBox, float]:
        if self.state is None:
            raise RuntimeError("tracker must be initialized with a frame and box")
        frame = np.asarray(frame, dtype=float)
        seed = self.state.box.center if seed_center is None else seed_center
        box, emd = track_frame(self.state, frame, seed)
        self.state.box = box
        cfg = self.config
        window = extract_window(
            frame, box.center, (box.width, box.height),
            (cfg.window_height, cfg.window_width),
        )
        if len(self.state.templates) < cfg.template_count:
            self.state.templates.append(window)
            self.state.dictionary, self.state.target_signature = build_target_model(
                self.state.templates, self.state.base_window, cfg
            )
        else:
            maybe_update_template(self.state, window, emd)
        return box, emd
