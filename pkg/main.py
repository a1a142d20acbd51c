#!/usr/bin/env python3
"""
lpcm - Lp compressed modes on triangle meshes
Entry point; see `python main.py --help`
"""

import sys

from lpcm.cli import main


if __name__ == "__main__":
    sys.exit(main())
