"""Sensorless observation and control of a levitated ball via high-frequency
signal injection and DREM gradient estimation."""

from .config import ScenarioConfig, load_config
from .harness import (BACKEND, SimulationAborted, TrajectoryLog, epsilon_sweep, export_csv,
                      pe_metric, read_csv, run_metrics, scenario_metrics, simulate)
from .plant import RIG_PARAMS, SIM_PARAMS, NoiseConfig, PlantParams, PlantState
from .sigproc import InjectionConfig

__all__ = [
    "BACKEND", "InjectionConfig", "NoiseConfig", "PlantParams", "PlantState", "RIG_PARAMS",
    "SIM_PARAMS", "ScenarioConfig", "SimulationAborted", "TrajectoryLog", "epsilon_sweep",
    "export_csv", "load_config", "pe_metric", "read_csv", "run_metrics",
    "scenario_metrics", "simulate",
]
