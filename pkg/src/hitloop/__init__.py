"""Human-in-the-loop deployment-learning simulator.

A policy is deployed on a 2D pick-and-insert task under intervention
supervision; deployment data is class-labeled, rebalanced by intervention-
guided weights, and the policy is retrained each round by weighted
behavioral cloning under a fixed-size, eviction-managed memory buffer.
"""

__version__ = "0.1.0"

from .data import ClassLabel, Dataset, Sample, Trajectory
from .env2d import EnvAction, EnvState, TaskConfig
from .labeling import LabelingConfig, relabel_preintv
from .loop import RoundRecord, RunConfig, RunResult, run
from .memory import MemoryBuffer
from .oracle import InterventionModel
from .policy import GMMPolicy, PolicyArch
from .trainer import TrainConfig
from .weighting import WeightingScheme

__all__ = [
    "ClassLabel",
    "Dataset",
    "Sample",
    "Trajectory",
    "EnvAction",
    "EnvState",
    "TaskConfig",
    "LabelingConfig",
    "relabel_preintv",
    "RoundRecord",
    "RunConfig",
    "RunResult",
    "run",
    "MemoryBuffer",
    "InterventionModel",
    "GMMPolicy",
    "PolicyArch",
    "TrainConfig",
    "WeightingScheme",
]
