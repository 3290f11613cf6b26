"""Command-line interface.

Subcommands: synth, track, compensate, pipeline, eval.
Exit codes: 0 success, 2 invalid configuration, 3 malformed input file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import fileio
from .config import Config, load_config
from .errors import InvalidConfig, MalformedFile
from .pipeline import (CSV_COLUMNS, FrameResult, compensate_frame, evaluate,
                       run_pipeline)
from .scene import generate_scene, oracle_track


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gausstrack",
        description="Track-driven motion compensation for 3D Gaussian scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gaussians", type=int, default=200)
    p.add_argument("--views", type=int, default=8)
    p.add_argument("--frames", type=int, default=9)
    p.add_argument("--movers", type=float, default=0.3)
    p.add_argument("--translate", type=float, default=0.02)
    p.add_argument("--rotate", type=float, default=2.0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("track", help="write oracle track fields")
    p.add_argument("--scene", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compensate", help="single-frame motion compensation")
    p.add_argument("--scene", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("pipeline", help="full multi-clip run")
    p.add_argument("--scene", required=True)
    p.add_argument("--clip-len", type=int, choices=[2, 3, 5, 9], required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--mode", choices=["short", "long"], default="short")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("eval", help="metrics against ground truth")
    p.add_argument("--results", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    return parser


def _load_cfg(path):
    return load_config(path) if path else Config()


def _cmd_synth(args):
    scene = generate_scene(args.seed, args.gaussians, args.views, args.frames,
                           mover_fraction=args.movers,
                           translate_mag=args.translate,
                           rotate_deg=args.rotate)
    fileio.save_scene(args.out, scene)
    print(f"wrote {args.frames} frames, {args.views} cameras to {args.out}")


def _cmd_track(args):
    scene = fileio.load_scene(args.scene)
    os.makedirs(args.out, exist_ok=True)
    n = 0
    for f in range(1, scene.n_frames):
        for v in range(len(scene.cameras)):
            tf = oracle_track(scene, v, f, args.noise, args.seed)
            fileio.save_trackfield_binary(
                os.path.join(args.out, fileio.track_filename(v, f)), tf)
            n += 1
    print(f"wrote {n} track fields to {args.out}")


def _cmd_compensate(args):
    scene = fileio.load_scene(args.scene)
    config = _load_cfg(args.config)
    tracks = [fileio.load_trackfield_binary(
        os.path.join(args.tracks, fileio.track_filename(v, args.frame)))
        for v in range(len(scene.cameras))]
    result = compensate_frame(scene.frames[0], scene.cameras, tracks, config,
                              frame_index=args.frame)
    fileio.save_gaussians(args.out, result.gaussians)
    print(f"frame {args.frame}: {result.tallies}")


def _cmd_pipeline(args):
    scene = fileio.load_scene(args.scene)
    config = _load_cfg(args.config)
    results = run_pipeline(scene, args.clip_len, workers=args.workers,
                           config=config, mode=args.mode,
                           noise_sigma_px=args.noise, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    for res in results:
        fileio.save_gaussians(
            os.path.join(args.out, fileio.frame_filename(res.frame)),
            res.gaussians)
    with open(os.path.join(args.out, "meta.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "n_solved", "n_static", "n_unsolvable",
                         "t_track", "t_comp", "t_refine"])
        for res in results:
            writer.writerow([res.frame, res.tallies["solved"],
                             res.tallies["static"], res.tallies["unsolvable"],
                             res.wall_time["tracking"],
                             res.wall_time["compensation"],
                             res.wall_time["refinement"]])
    print(f"wrote {len(results)} frame results to {args.out}")


def _cmd_eval(args):
    scene = fileio.load_scene(args.scene)
    meta = {}
    meta_path = os.path.join(args.results, "meta.csv")
    if os.path.exists(meta_path):
        with open(meta_path, newline="") as f:
            for row in csv.DictReader(f):
                meta[int(row["frame"])] = row
    results = []
    t = 0
    while os.path.exists(os.path.join(args.results, fileio.frame_filename(t))):
        gaussians = fileio.load_gaussians(
            os.path.join(args.results, fileio.frame_filename(t)))
        m = meta.get(t, {})
        results.append(FrameResult(
            t, gaussians,
            {"solved": int(m.get("n_solved", 0)),
             "static": int(m.get("n_static", 0)),
             "unsolvable": int(m.get("n_unsolvable", 0))},
            {"tracking": float(m.get("t_track", 0.0)),
             "compensation": float(m.get("t_comp", 0.0)),
             "refinement": float(m.get("t_refine", 0.0))}))
        t += 1
    if not results:
        raise MalformedFile(f"{args.results}: no frame files found")
    report = evaluate(results, scene)
    report.write_csv(args.out)
    print(report.summary())


_COMMANDS = {
    "synth": _cmd_synth,
    "track": _cmd_track,
    "compensate": _cmd_compensate,
    "pipeline": _cmd_pipeline,
    "eval": _cmd_eval,
}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except InvalidConfig as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return 2
    except MalformedFile as e:
        print(f"malformed input: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
