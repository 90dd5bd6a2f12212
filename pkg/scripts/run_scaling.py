#!/usr/bin/env python3
"""Prediction-set-size scaling sweep: full pipeline vs the no-absint/no-bce
ablation.

Example:
    python scripts/run_scaling.py --forced-coverage \
        --deltas 0.3,0.1,0.06,0.045,0.03 --out results/scaling
"""
import sys

from consynth.cli import main

if __name__ == "__main__":
    sys.argv = [sys.argv[0], "scaling", *sys.argv[1:]]
    main()
