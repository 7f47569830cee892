"""Command line driver.

Subcommands: run, compare, serve, record, replay, bench.  Every option can
also come from a YAML config file (--config); explicit flags win.  Exit
codes: 0 success, 1 runtime fault, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np
import yaml

from .episode import DEFAULT_CHUNKING, Episode, record_episode, replay
from .pipeline import MetricsLog, PipelineConfig, run as run_pipeline
from .render import bench_render
from .scene import PRESETS, load_scene
from .trajectories import TRAJECTORIES, make_trajectory


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["decoupled", "direct"], default="decoupled")
    p.add_argument("--scene", default="open-table",
                   help=f"preset name ({', '.join(sorted(PRESETS))}) or scene YAML path")
    p.add_argument("--trajectory", choices=sorted(TRAJECTORIES), default="sine-yaw")
    p.add_argument("--duration", type=float, default=6.0)
    p.add_argument("--render-hz", type=float, default=150.0)
    p.add_argument("--cloud-hz", type=float, default=10.0)
    p.add_argument("--command-interval", type=float, default=0.3)
    p.add_argument("--transport-delay", type=float, default=0.05)
    p.add_argument("--tracking-rate", type=float, default=10.0)
    p.add_argument("--height-offset", type=float, default=0.0)
    p.add_argument("--aggregation", choices=["latest", "ema"], default="latest")
    p.add_argument("--ema-alpha", type=float, default=0.3)
    p.add_argument("--clock", choices=["virtual", "realtime"], default="virtual")
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--focal", type=float, default=0.0)
    p.add_argument("--splat-px", type=int, default=2)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--fusion", choices=["replace", "ring"], default="replace")
    p.add_argument("--ring-window", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)


def _config_from_args(args, mode=None) -> PipelineConfig:
    return PipelineConfig(
        mode=mode or args.mode,
        render_hz=args.render_hz,
        cloud_hz=args.cloud_hz,
        command_interval=args.command_interval,
        transport_delay=args.transport_delay,
        tracking_rate=args.tracking_rate,
        height_offset=args.height_offset,
        aggregation=args.aggregation,
        ema_alpha=args.ema_alpha,
        clock=args.clock,
        width=args.width,
        height=args.height,
        focal=args.focal,
        splat_px=args.splat_px,
        noise_sigma=args.noise_sigma,
        fusion=args.fusion,
        ring_window=args.ring_window,
        seed=args.seed,
    )


def _resolve_scene_arg(scene: str):
    if scene in PRESETS:
        return scene
    if os.path.exists(scene):
        return load_scene(scene)
    raise SystemExit(f"error: scene {scene!r} is neither a preset nor an existing file")


def _write_metrics(log: MetricsLog, path: str | None):
    if not path:
        return
    if path.endswith(".jsonl"):
        log.to_jsonl(path)
    else:
        log.to_csv(path)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    log = run_pipeline(
        cfg, _resolve_scene_arg(args.scene), make_trajectory(args.trajectory), args.duration
    )
    _write_metrics(log, args.metrics_out)
    s = log.summary()
    print(
        f"{cfg.mode}: {s['records']} records, median pose_age {s['median_pose_age'] * 1e3:.2f} ms, "
        f"median scene_age {s['median_scene_age'] * 1e3:.2f} ms, mean coverage {s['mean_coverage']:.3f}"
    )
    return 0


def cmd_compare(args) -> int:
    scene = _resolve_scene_arg(args.scene)
    head = make_trajectory(args.trajectory)
    os.makedirs(args.out_dir, exist_ok=True)
    summaries = {}
    for mode in ("decoupled", "direct"):
        cfg = _config_from_args(args, mode=mode)
        log = run_pipeline(cfg, scene, head, args.duration)
        log.to_csv(os.path.join(args.out_dir, f"{mode}.csv"))
        summaries[mode] = log.summary()
    report = {
        "config": asdict(_config_from_args(args)),
        "trajectory": args.trajectory,
        "duration": args.duration,
        "decoupled": summaries["decoupled"],
        "direct": summaries["direct"],
    }
    with open(os.path.join(args.out_dir, "report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    for mode, s in summaries.items():
        print(
            f"{mode:10s} median pose_age {s['median_pose_age'] * 1e3:9.3f} ms   "
            f"p95 {s['p95_pose_age'] * 1e3:9.3f} ms   "
            f"median scene_age {s['median_scene_age'] * 1e3:9.3f} ms   "
            f"mean coverage {s['mean_coverage']:.3f}"
        )
    return 0


def cmd_record(args) -> int:
    cfg = _config_from_args(args)
    if cfg.clock != "virtual":
        print("error: record requires --clock virtual", file=sys.stderr)
        return 1
    log = record_episode(
        cfg,
        _resolve_scene_arg(args.scene),
        make_trajectory(args.trajectory),
        args.duration,
        args.out,
        scene_name=args.scene,
    )
    print(f"recorded {len(log.records)} display records, episode at {args.out}")
    return 0


def cmd_replay(args) -> int:
    ep = Episode.load(args.episode)
    chunking = (args.chunk_horizon, args.chunk_exec)
    log, trace = replay(ep, chunking)
    _write_metrics(log, args.metrics_out)
    n = min(len(trace.stamps), len(ep))
    if n:
        err = np.array(
            [np.linalg.norm(trace.proprio[i][:3] - ep.proprio[i][:3]) for i in range(n)]
        )
        print(
            f"replayed {n} steps with chunking ({args.chunk_horizon},{args.chunk_exec}), "
            f"max neck position deviation {err.max():.3e} m"
        )
    else:
        print("replayed 0 steps")
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    stats = bench_render(sizes=sizes, reps=args.reps, seed=args.seed)
    if args.json:
        print(json.dumps(stats, indent=2))
    else:
        for row in stats:
            print(
                f"{row['points']:>8d} pts  median {row['median_ms']:7.3f} ms  "
                f"p95 {row['p95_ms']:7.3f} ms  ({row['reps']} reps)"
            )
    return 0


def cmd_serve(args) -> int:
    from .server import ServeOptions, serve

    cfg = _config_from_args(args)
    options = ServeOptions(
        scene=args.scene,
        wire_points=args.wire_points,
        head_source=args.head_source,
    )
    print(f"serving on ws://{args.host}:{args.port}/ws ({cfg.mode} mode, scene {args.scene})")
    serve(cfg, options, args.port, args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="teleopsim",
        description="Latency-decoupled point-cloud teleoperation simulator",
    )
    ap.add_argument("--config", help="YAML file with flag defaults (flags override)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one pipeline mode and write metrics")
    _add_run_flags(p)
    p.add_argument("--metrics-out", help="CSV (or .jsonl) output path")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="run decoupled and direct back to back")
    _add_run_flags(p)
    p.add_argument("--out-dir", default="compare_out")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("record", help="record an episode while running")
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="episode output directory")
    p.set_defaults(fn=cmd_record)

    p = sub.add_parser("replay", help="replay a recorded episode through the pipeline")
    p.add_argument("--episode", required=True)
    p.add_argument("--chunk-horizon", type=int, default=DEFAULT_CHUNKING[0])
    p.add_argument("--chunk-exec", type=int, default=DEFAULT_CHUNKING[1])
    p.add_argument("--metrics-out")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("bench", help="renderer timing sweep")
    p.add_argument("--sizes", default="10000,76800,200000")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("serve", help="realtime pipeline behind a WebSocket")
    _add_run_flags(p)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--wire-points", type=int, default=60000)
    p.add_argument("--head-source", choices=sorted(TRAJECTORIES),
                   help="scripted head source; omit to drive from the client")
    p.set_defaults(fn=cmd_serve)

    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold --config file values in as parser defaults; explicit flags override."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    with open(known.config) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise SystemExit(f"error: config file {known.config} must be a YAML mapping")
    flat = {str(k).replace("-", "_"): v for k, v in data.items()}
    for action in ap._subparsers._group_actions:  # reach into subparsers to set defaults
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in flat.items() if _has_dest(sp, k)})
    return argv


def _has_dest(parser: argparse.ArgumentParser, dest: str) -> bool:
    return any(a.dest == dest for a in parser._actions)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
    except SystemExit as e:
        if e.code is None or isinstance(e.code, int):
            return int(e.code or 0)
        print(str(e.code), file=sys.stderr)  # config-file faults carry a message
        return 1
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 1
    except SystemExit as e:
        print(str(e), file=sys.stderr)
        return 1
    except Exception as e:  # runtime fault -> exit 1 with a diagnostic
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
