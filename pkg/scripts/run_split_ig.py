"""
Split IG command-line entry point.

Usage:
    python scripts/run_split_ig.py attribute --model linear-2d
    python scripts/run_split_ig.py metrics --config config/experiment.cfg
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from splitig.cli import main

if __name__ == "__main__":
    sys.exit(main())
