#!/usr/bin/env python3
"""
SmartSense - Development CLI wrapper.

Convenience script for running the CLI without installing the package.
For production use, install the package and use: smartsense

Usage:
    python main.py synth --spec configs/synth_acceptance.json --out synthetic
    python main.py train --data prepared --out runs/full
"""

import sys

from smartsense.cli import main

if __name__ == "__main__":
    sys.exit(main())
