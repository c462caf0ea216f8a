"""Train the link-stability classifier on a link-state trace and save its weights.

    python3 scripts/train_ann.py --out results/ann_weights.txt
"""
import sys

from fanetsim.cli import main

if __name__ == "__main__":
    sys.exit(main(["train-ann", *sys.argv[1:]]))
