"""Configuration, snapshot persistence, CLI entry points, and the check suite.

Importing this package pulls in only the config and snapshot layers; the
argument parser and check registry live in ``congesto.cli_io.cli`` and
``congesto.cli_io.checks`` and are imported on demand.
"""

from .config import (
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_manifest,
    load_run_input,
    parse_config,
    scenario_from_config,
    serialize_config,
    worker_count,
    write_manifest,
)
from .snapshots import read_fields, read_snapshot, write_fields, write_snapshot

__all__ = [
    "RunConfig",
    "config_from_dict",
    "config_to_dict",
    "load_manifest",
    "load_run_input",
    "parse_config",
    "read_fields",
    "read_snapshot",
    "scenario_from_config",
    "serialize_config",
    "worker_count",
    "write_fields",
    "write_manifest",
    "write_snapshot",
]
