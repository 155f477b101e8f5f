"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import time

import numpy as np
import pytest

from emdtrack.appearance import (
    GroundParams,
    Signature,
    kernel_contributions,
    kernel_weight_gradient,
    nonneg_lasso,
)
from emdtrack.benchmark import run_benchmark, score_sequence, track_sequence
from emdtrack.cli import main as cli_main
from emdtrack.emd import TransportProblem, solve_emd, weight_linear_form
from emdtrack.gyro import (
    HomographyState,
    gyro_homography,
    integrate_interval,
    predict_center,
    quaternion_to_rotation,
)
from emdtrack.metrics import relative_overlap, success_curve
from emdtrack.sequences import SynthSpec, load_sequence, make_synthetic_sequence, write_sequence
from emdtrack.tracker import BoundingBox, Tracker, TrackerConfig

from oracles import (
    _tree_flows,
    fista_nonneg_lasso,
    linprog_transport_optimum,
    nnlasso_objective,
    random_transport_problem,
)


def _report(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"acceptance {number} [{name}]: {status}{suffix}")
    assert ok, f"criterion {number} ({name}) failed{suffix}"


def _solved_random_instances(count: int, seed: int):
    rng = np.random.default_rng(seed)
    instances = []
    for _ in range(count):
        supplies, demands, costs = random_transport_problem(rng, max_bins=6)
        problem = TransportProblem(supplies=supplies, demands=demands, costs=costs)
        instances.append((problem, solve_emd(problem)))
    return instances


def test_criterion_1_lp_oracle_equivalence():
    started = time.perf_counter()
    instances = _solved_random_instances(200, seed=101)
    worst = 0.0
    for problem, solution in instances:
        reference = linprog_transport_optimum(
            problem.supplies, problem.demands, problem.costs)
        worst = max(worst, abs(solution.objective - reference))
    elapsed = time.perf_counter() - started
    _report(1, "LP oracle equivalence",
            worst <= 1e-9 and elapsed < 10.0,
            f"max |diff| {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_weight_form_consistency():
    instances = _solved_random_instances(200, seed=101)
    worst_self = 0.0
    for problem, solution in instances:
        form = weight_linear_form(problem, solution)
        worst_self = max(worst_self,
                         abs(form.evaluate_problem(problem) - solution.objective))

    rng = np.random.default_rng(202)
    worst_pred = 0.0
    checked = 0
    idx = 0
    while checked < 20:
        problem, solution = instances[idx % len(instances)]
        idx += 1
        n_t, n_c = problem.shape
        if n_t < 2 or n_c < 2:
            continue
        form = weight_linear_form(problem, solution)
        delta_s = rng.normal(0.0, 1e-6, n_t)
        delta_s -= delta_s.mean()
        delta_d = rng.normal(0.0, 1e-6, n_c)
        delta_d -= delta_d.mean()
        new_s = problem.supplies + delta_s
        new_d = problem.demands + delta_d
        if new_s.min() <= 0 or new_d.min() <= 0:
            continue
        # basis optimality survives iff the basis flows stay feasible at the
        # perturbed weights (reduced costs do not depend on the weights)
        flows = _tree_flows(tuple(solution.basis), new_s, new_d)
        if flows is None:
            continue
        perturbed = TransportProblem(supplies=new_s, demands=new_d,
                                     costs=problem.costs)
        resolved = solve_emd(perturbed)
        predicted = form.evaluate(new_d, new_s[:-1])
        worst_pred = max(worst_pred, abs(predicted - resolved.objective))
        checked += 1
    _report(2, "weight-form consistency",
            worst_self <= 1e-8 and worst_pred <= 1e-8,
            f"self {worst_self:.2e}, perturbed {worst_pred:.2e} over {checked}")


def test_criterion_3_kernel_gradient_matches_finite_differences():
    rng = np.random.default_rng(303)
    params = GroundParams(alpha=0.5, bandwidth=12.0)
    step = 1e-4
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 10))
        weights = rng.random(n) + 0.05
        weights /= weights.sum()
        centers = rng.uniform(-7.0, 7.0, size=(n, 2))
        sig = Signature(weights=weights, features=np.zeros((n, 4)),
                        centers=centers)
        y = rng.uniform(-2.0, 2.0, size=2)
        grad = kernel_weight_gradient(sig, y, params)
        for axis in range(2):
            offset = np.zeros(2)
            offset[axis] = step
            fd = (kernel_contributions(sig, y + offset, params)
                  - kernel_contributions(sig, y - offset, params)) / (2 * step)
            denom = np.maximum(np.abs(fd), 1e-9)
            worst = max(worst, float((np.abs(grad[:, axis] - fd) / denom).max()))
    _report(3, "kernel gradient finite differences", worst < 1e-5,
            f"max rel err {worst:.2e}")


def test_criterion_4_nonnegative_lasso_kkt():
    rng = np.random.default_rng(404)
    worst_kkt = 0.0
    worst_obj = 0.0
    for _ in range(100):
        dim = int(rng.integers(4, 21))
        atoms = int(rng.integers(3, 31))
        design = rng.random((dim, atoms))
        target = rng.random(dim)
        lam = float(rng.uniform(0.001, 1.0))
        coeffs = nonneg_lasso(design, target, lam)
        grad = 2.0 * design.T @ (design @ coeffs - target) + lam
        viol = np.where(coeffs > 0, np.abs(grad), np.maximum(-grad, 0.0)).max()
        worst_kkt = max(worst_kkt, float(viol))
        reference = fista_nonneg_lasso(design, target, lam)
        worst_obj = max(worst_obj, abs(
            nnlasso_objective(design, target, coeffs, lam)
            - nnlasso_objective(design, target, reference, lam)))
    _report(4, "nonnegative LASSO KKT", worst_kkt <= 1e-6 and worst_obj <= 1e-6,
            f"max KKT {worst_kkt:.2e}, max obj diff {worst_obj:.2e}")


def _translation_sequence():
    return make_synthetic_sequence(SynthSpec(
        kind="translation", frames=100, height=140, width=260,
        target_width=40, target_height=40, start_x=20, start_y=50,
        velocity_x=2.0, velocity_y=0.0, brightness_amplitude=0.1, seed=3))


def _lean_config(**overrides):
    defaults = dict(template_count=4, n_iter=8, n_scal=1, particle_count=4)
    defaults.update(overrides)
    return TrackerConfig(**defaults)


def test_criterion_5_synthetic_tracking():
    sequence = _translation_sequence()
    config = _lean_config()
    started = time.perf_counter()
    tracker = Tracker(config)
    tracker.initialize(sequence.frame(0),
                       BoundingBox.from_xywh(*sequence.ground_truth[0]))
    overlaps = [1.0]
    for k in range(1, len(sequence)):
        box, _ = tracker.step(sequence.frame(k))
        overlaps.append(relative_overlap(
            box, BoundingBox.from_xywh(*sequence.ground_truth[k])))
    elapsed = time.perf_counter() - started
    average = float(np.mean(overlaps))
    never_lost = min(overlaps) > 0.0
    _report(5, "synthetic tracking", average > 0.7 and never_lost and elapsed < 60.0,
            f"avg {average:.3f}, min {min(overlaps):.3f}, {elapsed:.1f}s")


def _rotation_sequence():
    return make_synthetic_sequence(SynthSpec(
        kind="rotation", frames=45, height=480, width=640,
        target_width=40, target_height=40, start_x=300, start_y=80,
        pan_dps=3.0, roll_dps=5.0, fps=30.0, gyro_rate_hz=200.0,
        fx=3000.0, fy=3000.0, seed=11))


def test_criterion_6_gyro_compensation():
    sequence = _rotation_sequence()
    config = _lean_config(template_count=3, n_iter=2, particle_count=0)

    seed_errors = []
    for k in range(1, len(sequence)):
        quat = integrate_interval(sequence.gyro_log,
                                  float(sequence.frame_timestamps[k - 1]),
                                  float(sequence.frame_timestamps[k]))
        hom = gyro_homography(sequence.intrinsics, quaternion_to_rotation(quat))
        anchor = sequence.ground_truth[k - 1, :2] + sequence.ground_truth[k - 1, 2:] / 2
        _, predicted = predict_center(HomographyState(), hom, anchor)
        truth = sequence.ground_truth[k, :2] + sequence.ground_truth[k, 2:] / 2
        seed_errors.append(float(np.linalg.norm(predicted - truth)))

    boxes_gyro, _, _ = track_sequence(sequence, config, use_gyro=True)
    overlaps_gyro, eval_gyro = score_sequence(sequence, boxes_gyro)
    boxes_plain, _, _ = track_sequence(sequence, config, use_gyro=False)
    overlaps_plain, eval_plain = score_sequence(sequence, boxes_plain)

    gap = (eval_gyro.average - eval_plain.average) * 100.0
    ok = (max(seed_errors) < 2.0
          and overlaps_gyro.min() > 0.0
          and overlaps_plain.min() == 0.0
          and gap >= 20.0)
    _report(6, "gyro compensation", ok,
            f"seed err {max(seed_errors):.3f}px, gyro avg {eval_gyro.average:.3f}, "
            f"plain avg {eval_plain.average:.3f}, gap {gap:.1f}pp")


def test_criterion_7_evaluation_metrics():
    exact = (
        relative_overlap(BoundingBox.from_xywh(10, 20, 30, 40),
                         BoundingBox.from_xywh(10, 20, 30, 40)) == 1.0
        and relative_overlap(BoundingBox.from_xywh(0, 0, 10, 10),
                             BoundingBox.from_xywh(50, 50, 5, 5)) == 0.0
        and abs(relative_overlap(BoundingBox.from_xywh(0, 0, 1, 1),
                                 BoundingBox.from_xywh(0.5, 0, 1, 1))
                - 1.0 / 3.0) < 1e-15
    )
    rng = np.random.default_rng(707)
    monotone = True
    for _ in range(1000):
        overlaps = rng.random(int(rng.integers(1, 30)))
        fractions = success_curve(overlaps).fractions
        monotone = monotone and bool((np.diff(fractions) <= 1e-12).all())
    _report(7, "evaluation metrics", exact and monotone)


def test_criterion_8_harness_end_to_end(tmp_path):
    # OTB data is not bundled; a locally generated sequence in the same disk
    # layout stands in. The quantitative result is recorded, not asserted.
    seq_dir = tmp_path / "car4_standin"
    write_sequence(make_synthetic_sequence(SynthSpec(
        kind="translation", frames=20, height=120, width=200,
        target_width=32, target_height=32, start_x=20, start_y=40,
        velocity_x=2.0, velocity_y=0.5, brightness_amplitude=0.05, seed=44)),
        seq_dir)
    sequence = load_sequence(seq_dir)
    out_dir = tmp_path / "report"
    reports = run_benchmark([sequence], _lean_config(template_count=2),
                            out_dir=out_dir, annotate=True)
    frames_csv = out_dir / f"{sequence.name}_frames.csv"
    success_csv = out_dir / f"{sequence.name}_success.csv"
    summary_csv = out_dir / "summary.csv"
    annotated = out_dir / "annotated" / sequence.name / "0001.png"
    complete = (frames_csv.is_file() and success_csv.is_file()
                and summary_csv.is_file() and annotated.is_file()
                and len(frames_csv.read_text().splitlines()) == 21
                and len(success_csv.read_text().splitlines()) == 102)
    _report(8, "harness end-to-end", complete,
            f"recorded avg overlap {reports[0].evaluation.average:.3f}")


def test_criterion_9_cli_determinism(tmp_path):
    spec_text = (
        "kind = translation\nframes = 8\nheight = 80\nwidth = 140\n"
        "target_width = 24\ntarget_height = 24\nstart_x = 12\nstart_y = 24\n"
        "velocity_x = 2.0\nseed = 9\n"
    )
    config_text = (
        "window_height = 16\nwindow_width = 16\npatch_height = 8\n"
        "patch_width = 8\npatch_step = 4\ntemplate_count = 2\n"
        "n_iter = 4\nn_scal = 1\nparticle_count = 2\n"
        "particle_offsets = 3,0;-3,0\n"
    )
    spec = tmp_path / "spec.txt"
    spec.write_text(spec_text)
    config = tmp_path / "cfg.txt"
    config.write_text(config_text)
    problem = tmp_path / "p.txt"
    problem.write_text("2 2\n0.6 0.4\n0.5 0.5\n0 1\n1 0\n")

    captured = {}
    for run in ("a", "b"):
        seq_dir = tmp_path / run / "seq"
        out_dir = tmp_path / run / "out"
        dump = tmp_path / run / "flows.txt"
        cli_main(["synth", "--spec", str(spec), "--out", str(seq_dir)])
        cli_main(["track", "--seq", str(seq_dir), "--config", str(config),
                  "--out", str(out_dir)])
        cli_main(["solve-emd", "--input", str(problem), "--dump", str(dump)])
        summary = (out_dir / "summary.csv").read_text().splitlines()
        captured[run] = {
            "frames": (out_dir / "seq_frames.csv").read_bytes(),
            "success": (out_dir / "seq_success.csv").read_bytes(),
            "gt": (seq_dir / "groundtruth_rect.txt").read_bytes(),
            "flows": dump.read_bytes(),
            # fps is wall-clock metadata; every other summary field must match
            "summary": [",".join(line.split(",")[:3]) for line in summary],
        }
    same = all(captured["a"][key] == captured["b"][key]
               for key in ("frames", "success", "gt", "flows", "summary"))
    _report(9, "CLI determinism", same)
