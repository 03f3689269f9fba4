#!/usr/bin/env python3
"""
WNI trajectory generation entry point.
"""

import os
import sys

# Add the repository root to the path if running as a script
if __name__ == "__main__":
    sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from wni_trajgen.cli import main

if __name__ == "__main__":
    sys.exit(main())
