"""Write a multi-lap synthetic telemetry CSV that replays a reference.

Usage: python scripts/make_synthetic_telemetry.py REF.csv OUT.csv [--laps 4] [--seed 0]
"""

import argparse

from robust_lapline.reference import read_reference
from robust_lapline.synthetic import synthetic_laps
from robust_lapline.telemetry import write_telemetry
from robust_lapline.vehicle import Car


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("reference")
    ap.add_argument("out")
    ap.add_argument("--laps", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--weave", type=float, default=0.3, help="lateral weave amplitude [m]")
    args = ap.parse_args()
    ref = read_reference(args.reference)
    log = synthetic_laps(ref, Car(), laps=args.laps, seed=args.seed, weave=args.weave)
    write_telemetry(args.out, log)
    print(f"wrote {len(log)} samples to {args.out}")


if __name__ == "__main__":
    main()
