#!/usr/bin/env python3
"""Sweep transport delay and print how each viewing mode's latency responds.

The point of the table: the decoupled view's pose_age column does not move
when transport gets worse, only its scene freshness does; the direct view
inherits every added millisecond.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from teleopsim.pipeline import PipelineConfig, run as run_pipeline
from teleopsim.trajectories import make_trajectory


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--delays", default="0.025,0.05,0.1,0.2",
                    help="comma-separated one-way transport delays in seconds")
    ap.add_argument("--duration", type=float, default=6.0)
    ap.add_argument("--trajectory", default="sine-yaw")
    ap.add_argument("--width", type=int, default=160)
    ap.add_argument("--height", type=int, default=120)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    head = make_trajectory(args.trajectory)
    print(f"{'delay':>8}  {'decoupled pose_age':>19}  {'decoupled scene_age':>20}  "
          f"{'direct pose_age':>16}  {'direct scene_age':>17}")
    for delay in (float(d) for d in args.delays.split(",")):
        meds = {}
        for mode in ("decoupled", "direct"):
            cfg = PipelineConfig(mode=mode, width=args.width, height=args.height,
                                 transport_delay=delay, seed=args.seed)
            log = run_pipeline(cfg, "open-table", head, args.duration)
            meds[mode] = (np.median(log.pose_ages()), np.median(log.scene_ages()))
        print(f"{delay * 1e3:6.0f} ms  {meds['decoupled'][0] * 1e3:16.2f} ms  "
              f"{meds['decoupled'][1] * 1e3:17.2f} ms  "
              f"{meds['direct'][0] * 1e3:13.2f} ms  {meds['direct'][1] * 1e3:14.2f} ms")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
