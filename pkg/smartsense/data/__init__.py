"""SmartSense data pipeline.

Submodules:
- types: ActionEvent, Session, Instance, Routine, DatasetManifest
- vocab: Vocabulary (device and device-control name <-> index maps)
- pipeline: CSV parsing, temporal binning, windowing, splitting
"""

from smartsense.data.pipeline import (
    ParsedLog,
    bin_timestamp,
    build_instances,
    dataset_statistics,
    load_manifest,
    make_windows,
    parse_log_csv,
    parse_routines,
    split_instances,
)
from smartsense.data.types import (
    ActionEvent,
    DatasetManifest,
    Instance,
    Routine,
    Session,
)
from smartsense.data.vocab import Vocabulary

__all__ = [
    # Types
    "ActionEvent",
    "DatasetManifest",
    "Instance",
    "Routine",
    "Session",
    "Vocabulary",
    # Pipeline
    "ParsedLog",
    "bin_timestamp",
    "build_instances",
    "dataset_statistics",
    "load_manifest",
    "make_windows",
    "parse_log_csv",
    "parse_routines",
    "split_instances",
]
