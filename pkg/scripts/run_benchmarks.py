#!/usr/bin/env python3
"""Run a benchmark suite and write metrics/transcripts to an output directory.

Equivalent to `consynth run`; see --help there for all knobs.
Example:
    python scripts/run_benchmarks.py --domain visarith --forced-coverage \
        --seeds 0,1,2,3,4 --out results/visarith
"""
import sys

from consynth.cli import main

if __name__ == "__main__":
    sys.argv = [sys.argv[0], "run", *sys.argv[1:]]
    main()
