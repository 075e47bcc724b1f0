from .model import (MissionModel, ModelError, Policy, RolloutBatch, TimeGrid,
                    ValueFunction, kernel_from_triplets)
from .solver import (evaluate_policy, forward_distribution, oracle_enumerate,
                     simulate, solve_backward)
from .interchange import load_model, save_model

__all__ = [
    "MissionModel", "ModelError", "Policy", "RolloutBatch", "TimeGrid",
    "ValueFunction", "kernel_from_triplets", "evaluate_policy",
    "forward_distribution", "oracle_enumerate", "simulate", "solve_backward",
    "load_model", "save_model",
]
