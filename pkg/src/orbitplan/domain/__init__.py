from .grids import (DEORBITED, AltitudeGrid, DomainError, DomainState,
                    FuelGrid, ManeuverActionSet, RewardParams, StateCodec)
from .scenario import SolarScenario, ThrustModel, scenario_from_files
from .build import (FactoredMissionModel, MissionContext, action_mask,
                    assemble_model, bin_altitude, fuel_cost, fuel_cost_bins,
                    transition_row)
from .fastpath import (DomainSolution, evaluate_policy_fast,
                       forward_distribution_fast, safety_value_fast,
                       simulate_fast, solve_backward_fast)

__all__ = [
    "DEORBITED", "AltitudeGrid", "DomainError", "DomainState", "FuelGrid",
    "ManeuverActionSet", "RewardParams", "StateCodec", "SolarScenario",
    "ThrustModel", "scenario_from_files", "FactoredMissionModel",
    "MissionContext", "action_mask", "assemble_model", "bin_altitude",
    "fuel_cost", "fuel_cost_bins", "transition_row", "DomainSolution",
    "evaluate_policy_fast", "forward_distribution_fast", "safety_value_fast",
    "simulate_fast", "solve_backward_fast",
]
