"""
SmartSense - Command Line Interface

Public API:
    main: CLI entry point
    recommend: Top-k next controls for a history file
"""

from smartsense.cli.commands import read_history, recommend
from smartsense.cli.main import main

__all__ = [
    "main",
    "read_history",
    "recommend",
]
