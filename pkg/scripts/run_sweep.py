"""Full speed sweep of OLSR, DSR and HIROL; writes the four table CSVs.

    python3 scripts/run_sweep.py --seeds 1-10 --out results/ --jobs 4

Any extra flags are passed through to ``fanetsim sweep``.
"""
import sys

from fanetsim.cli import main

if __name__ == "__main__":
    sys.exit(main(["sweep", *sys.argv[1:]]))
