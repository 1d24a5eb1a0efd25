"""Progressive LBM - progressive-mesh multiphase multicomponent lattice Boltzmann.

This package grows a tiled lattice Boltzmann mesh as the flow front
advances, assigns tiles to simulated devices with a communication cost
model, and benchmarks progressive runs against fully meshed ones.
"""

from progressive_lbm.config import ScenarioConfig, load_config
from progressive_lbm.engine import SimulationEngine, SimulationState, initialize_state, step
from progressive_lbm.runner import SimulationRunner, compare, run

__version__ = "0.1.0"
__all__ = [
    "ScenarioConfig",
    "SimulationEngine",
    "SimulationRunner",
    "SimulationState",
    "compare",
    "initialize_state",
    "load_config",
    "run",
    "step",
]
