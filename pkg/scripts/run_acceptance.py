"""Run the acceptance suite and show one PASS/FAIL line per criterion."""

import subprocess
import sys
from pathlib import Path

root = Path(__file__).resolve().parents[1]
sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-s", "-q",
                          str(root / "tests" / "test_acceptance.py")], cwd=root))
