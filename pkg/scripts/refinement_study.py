#!/usr/bin/env python3
"""Grid-refinement study: transport-identity and conservative-form residuals
at a ladder of resolutions for each desk scenario.

Usage: python scripts/refinement_study.py [BASE_N ...]
"""
import dataclasses
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import numpy as np

from nozzleflow.characteristics import launch_fan, riccati_residual
from nozzleflow.config import load_config
from nozzleflow.harness import conservative_residual
from nozzleflow.solver import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def fan_max(traj, family):
    vals = [riccati_residual(p).max_norm
            for p in launch_fan(traj, family) if p.n >= 3]
    return max(vals)


def main():
    ladder = [int(v) for v in sys.argv[1:]] or [500, 1000, 2000]
    for cfg in sorted(CONFIGS.glob("p?_desk.cfg")):
        base = load_config(cfg).to_scenario()
        print(f"=== {cfg.stem} (T = {base.T})")
        rows = []
        for n in ladder:
            scn = dataclasses.replace(base, n=n, _cache={})
            traj, _ = run(scn)
            rows.append((n, fan_max(traj, 1), fan_max(traj, 2),
                         conservative_residual(traj).max_linf))
        print(f"    {'n':>6} {'transport f1':>14} {'transport f2':>14} "
              f"{'conservative':>14}")
        for n, r1, r2, rc in rows:
            print(f"    {n:>6} {r1:>14.4e} {r2:>14.4e} {rc:>14.4e}")
        for (n0, *v0), (n1, *v1) in zip(rows, rows[1:]):
            orders = [math.log2(a / b) if b > 0 else float("nan")
                      for a, b in zip(v0, v1)]
            print(f"    order {n0}->{n1}: "
                  + "  ".join(f"{o:.2f}" for o in orders))


if __name__ == "__main__":
    main()
