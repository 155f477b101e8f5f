"""Command-line entry points.

Subcommands: ``solve-emd`` (solve a transport instance from a text file),
``track`` and ``gyro-track`` (run the tracker over a sequence directory),
``eval`` (score a results CSV against ground truth), and ``synth``
(generate a synthetic sequence).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .benchmark import run_benchmark, summary_lines
from .config import parse_keyvalue_file, tracker_config_from_file
from .emd import read_problem_text, solve_emd, write_flow_text
from .gyro import read_frame_timestamps, read_gyro_log, read_intrinsics
from .metrics import relative_overlap, success_curve
from .sequences import load_sequence, make_synthetic_sequence, synth_spec_from_mapping, write_sequence
from .tracker import BoundingBox, TrackerConfig


def _cmd_solve_emd(args) -> int:
    problem = read_problem_text(args.input)
    solution = solve_emd(problem)
    print(f"objective {solution.objective:.12g}")
    if args.dump:
        write_flow_text(args.dump, solution)
    return 0


def _load_config(path) -> TrackerConfig:
    return tracker_config_from_file(path) if path else TrackerConfig()


def _cmd_track(args, use_gyro: bool) -> int:
    sequence = load_sequence(args.seq)
    if use_gyro:
        if args.gyro:
            sequence.gyro_log = read_gyro_log(args.gyro)
        if args.timestamps:
            sequence.frame_timestamps = read_frame_timestamps(args.timestamps)
        if args.intrinsics:
            sequence.intrinsics = read_intrinsics(args.intrinsics)
    config = _load_config(args.config)
    if args.annotate and not args.out:
        raise SystemExit("--annotate requires --out")
    reports = run_benchmark(
        [sequence], config,
        out_dir=args.out, annotate=args.annotate,
        use_gyro=use_gyro, invert_rotation=not args.flip_gyro,
    )
    for line in summary_lines(reports):
        print(line)
    return 0


def _cmd_eval(args) -> int:
    rows = []
    for line in Path(args.results).read_text(encoding="utf-8").splitlines()[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        rows.append([float(parts[1]), float(parts[2]), float(parts[3]), float(parts[4])])
    boxes = np.asarray(rows)
    gt = []
    for line in Path(args.gt).read_text(encoding="utf-8").splitlines():
        line = line.strip().replace(",", " ").replace("\t", " ")
        if line:
            gt.append([float(t) for t in line.split()[:4]])
    gt = np.asarray(gt)
    count = min(len(boxes), len(gt))
    overlaps = [
        relative_overlap(BoundingBox.from_xywh(*boxes[k]), BoundingBox.from_xywh(*gt[k]))
        for k in range(count)
    ]
    result = success_curve(overlaps)
    print(f"frames {count}")
    print(f"avg_overlap {result.average:.6f}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "success.csv", "w", encoding="utf-8") as fh:
            fh.write("threshold,fraction\n")
            for t, frac in zip(result.thresholds, result.fractions):
                fh.write(f"{t:.2f},{frac:.6f}\n")
    return 0


def _cmd_synth(args) -> int:
    spec = synth_spec_from_mapping(parse_keyvalue_file(args.spec))
    sequence = make_synthetic_sequence(spec)
    write_sequence(sequence, args.out)
    print(f"wrote {len(sequence)} frames to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emdtrack")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-emd", help="solve a transportation instance from a text file")
    p.add_argument("--input", required=True)
    p.add_argument("--dump", help="write nonzero flows as 'u v f' lines")

    for name in ("track", "gyro-track"):
        p = sub.add_parser(name, help=f"run the {'gyro-aided ' if 'gyro' in name else ''}tracker on a sequence")
        p.add_argument("--seq", required=True, help="sequence directory")
        p.add_argument("--config", help="key = value tracker config file")
        p.add_argument("--out", help="directory for CSV reports")
        p.add_argument("--annotate", action="store_true", help="write frames with the tracked box")
        p.add_argument("--flip-gyro", action="store_true",
                       help="flip the rotation-compensation convention")
        if name == "gyro-track":
            p.add_argument("--gyro", help="gyro CSV (timestamp_s,wx,wy,wz)")
            p.add_argument("--timestamps", help="frame timestamp CSV")
            p.add_argument("--intrinsics", help="intrinsics file (9 reals)")

    p = sub.add_parser("eval", help="score a per-frame results CSV against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", help="directory for the success-curve CSV")

    p = sub.add_parser("synth", help="generate a synthetic sequence")
    p.add_argument("--spec", required=True, help="key = value synthetic spec file")
    p.add_argument("--out", required=True, help="output sequence directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve-emd":
        return _cmd_solve_emd(args)
    if args.command == "track":
        return _cmd_track(args, use_gyro=False)
    if args.command == "gyro-track":
        return _cmd_track(args, use_gyro=True)
    if args.command == "eval":
        return _cmd_eval(args)
    if args.command == "synth":
        return _cmd_synth(args)
    raise SystemExit(f"unknown command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
