"""Export an analytic track as a centerline CSV (s, x, y, w_left, w_right).

Usage: python scripts/make_track_csv.py {circle,oval,chicane} OUT.csv
"""

import sys

from robust_lapline.config import BUILDERS
from robust_lapline.track import write_track


def main():
    if len(sys.argv) != 3 or sys.argv[1] not in BUILDERS:
        sys.exit(__doc__)
    tr = BUILDERS[sys.argv[1]]()
    write_track(sys.argv[2], tr.s, tr.x, tr.y, tr.w_left, tr.w_right)
    print(f"{sys.argv[1]}: {tr.total_length:.3f} m, {tr.n_nodes} nodes -> {sys.argv[2]}")


if __name__ == "__main__":
    main()
