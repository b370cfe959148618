"""Plan NOM, TLC and FLC for one scene, export them and print a comparison.

Usage: python scripts/plan_all.py [SCENE.toml] [OUT_DIR]
"""

import sys
import time
from pathlib import Path

import numpy as np

from robust_lapline.config import load_scene
from robust_lapline.planner import build_nlp, export_reference, plan_variant, solve


def main():
    scene_path = sys.argv[1] if len(sys.argv) > 1 else "data/demo.toml"
    out = Path(sys.argv[2] if len(sys.argv) > 2 else "out/plan_all")
    scene = load_scene(scene_path)
    nlp = build_nlp(scene)
    nlp.set_backoffs()
    t0 = time.perf_counter()
    nominal = solve(nlp, max_iter=scene.max_iter)
    print(f"NOM  {nominal.lap_time:8.3f} s  ({time.perf_counter() - t0:5.1f} s wall)")
    export_reference(nominal, scene.track, out, "nom", scene.driver_offset)
    for variant in ("TLC", "FLC"):
        t0 = time.perf_counter()
        plan = plan_variant(variant, scene, nominal=nominal, nlp=nlp)
        dn = np.sqrt(np.mean((plan.X[:, 3] - nominal.X[:, 3]) ** 2))
        print(f"{variant}  {plan.lap_time:8.3f} s  ({time.perf_counter() - t0:5.1f} s wall, "
              f"{plan.sweeps} sweeps, rms offset from NOM {dn:.3f} m)")
        export_reference(plan, scene.track, out, variant.lower(), scene.driver_offset)


if __name__ == "__main__":
    main()
