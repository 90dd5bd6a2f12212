#!/usr/bin/env python3
"""Launch the interactive session service (plus the labeler UI at /ui when
frontend/dist exists). Equivalent to `consynth serve`."""
import sys

from consynth.cli import main

if __name__ == "__main__":
    sys.argv = [sys.argv[0], "serve", *sys.argv[1:]]
    main()
