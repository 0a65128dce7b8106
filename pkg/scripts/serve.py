#!/usr/bin/env python3
"""Start a server: `python3 scripts/serve.py --data-dir /tmp/db --port 5433`."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from minirel.server import main

if __name__ == "__main__":
    raise SystemExit(main())
