"""Cell-free uplink with six-dimensional movable antennas (6DMA).

Modules
-------
geometry   rotations, wave vectors, antenna pattern, array responses
channel    scenario, path statistics and channel realizations
beamform   local MMSE receivers and the long-timescale combining parameter
objective  rates, the sample objective and its gradients
cssca      stochastic successive convex approximation and baselines
harness    Monte Carlo experiments and CSV output
"""

from ._accel import HAS_NUMBA
from .channel import Scenario
from .cssca import CsscaConfig, run
from .harness import ExperimentConfig, run_experiment

__all__ = ["HAS_NUMBA", "Scenario", "CsscaConfig", "ExperimentConfig", "run", "run_experiment"]
__version__ = "0.1.0"
