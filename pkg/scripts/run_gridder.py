"""
CLI script to run the gridder from a source checkout.

Example:
    python scripts/run_gridder.py simulate --out data/baselines.hvx
    python scripts/run_gridder.py vis2dirty --vis data/vis.hvx --out data/dirty.hvx --eps 1e-5
"""

import sys

from sphere_gridder.cli import main

if __name__ == "__main__":
    sys.exit(main())
