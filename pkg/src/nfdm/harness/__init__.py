"""Experiment orchestration: single runs, sweeps, self-test and the command line."""
from .runner import COLUMNS, SCHEMA_VERSION, run_once, sweep

__all__ = ["COLUMNS", "SCHEMA_VERSION", "run_once", "sweep"]
