"""Performance, NoC and energy simulator for a ReRAM processing-in-memory CNN node."""

from .archconfig import ArchConfig, default_config, load_config, node_totals
from .mapping import place, plan
from .pipeline import NocModel, ScenarioId, SimStats, build_schedule, simulate
from .workload import build_vgg, get_network

__version__ = "0.1.0"

__all__ = [
    "ArchConfig",
    "NocModel",
    "ScenarioId",
    "SimStats",
    "build_schedule",
    "build_vgg",
    "default_config",
    "get_network",
    "load_config",
    "node_totals",
    "place",
    "plan",
    "simulate",
]
