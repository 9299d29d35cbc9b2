"""xbarsim: deterministic cycle-level simulator of a tiled multiprocessor
with a reconfigurable crossbar-memory hierarchy, register-to-register links,
hierarchical scratchpad barriers, and an energy ledger."""

__version__ = "0.1.0"

from .core import Engine, RunResult, Workload, run_until_halt
from .energy import DvfsPoint, DvfsTable, EnergyCoefficients, EnergyLedger
from .modes import ModeConfig, preset
from .topology import Chip, ChipGeometry, build_geometry, r2r_neighbor

__all__ = [
    "Engine", "RunResult", "Workload", "run_until_halt",
    "DvfsPoint", "DvfsTable", "EnergyCoefficients", "EnergyLedger",
    "ModeConfig", "preset",
    "Chip", "ChipGeometry", "build_geometry", "r2r_neighbor",
    "__version__",
]
