#!/usr/bin/env python3
"""Connect to a server: REPL by default, or --script / --loadgen modes."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from minirel.client import main

if __name__ == "__main__":
    raise SystemExit(main())
