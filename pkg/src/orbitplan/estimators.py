"""sklearn-style estimator surface over the solver and verifier.

These wrappers let the planners slot into scikit-learn tooling
(get_params/set_params, clone, pipelines that pass models through); the
functional API in orbitplan.mdp / orbitplan.domain remains the primary
interface.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .domain.build import FactoredMissionModel
from .domain.fastpath import solve_backward_fast
from .mdp.model import MissionModel
from .mdp.solver import solve_backward
from .verify import SafetySpec, verify_policy


class BackwardInductionSolver(BaseEstimator):
    """Finite-horizon optimal policy synthesis via backward induction.

    fit(model) accepts an explicit MissionModel or a FactoredMissionModel
    and exposes value_ and policy_ attributes.
    """

    def __init__(self, terminal=None, keep_values=False):
        self.terminal = terminal
        self.keep_values = keep_values

    def fit(self, model, y=None):
        if isinstance(model, FactoredMissionModel):
            sol = solve_backward_fast(model, terminal=self.terminal,
                                      keep_values=self.keep_values)
            self.solution_ = sol
            self.policy_ = sol.policy
            self.value_ = sol.value0
        elif isinstance(model, MissionModel):
            value, policy = solve_backward(model, terminal=self.terminal)
            self.solution_ = (value, policy)
            self.policy_ = policy
            self.value_ = value
        else:
            raise TypeError(f"unsupported model type {type(model).__name__}")
        self.model_ = model
        return self

    def predict(self, X, h: int = 0):
        """Actions at step h for flat state indices (explicit models) or
        (alt_bin, fuel_bin, cooldown) rows (factored models)."""
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit(model) first")
        X = np.asarray(X)
        if isinstance(self.model_, FactoredMissionModel):
            return self.policy_[h][X[:, 0], X[:, 1], X[:, 2]]
        return self.policy_.action_at[h, X]


class SafetyVerifier(BaseEstimator):
    """Chance-constraint check of a synthesized policy on the mission model."""

    def __init__(self, altitude_floor_km=300.0, spacing_steps=3, delta=0.05,
                 mode="policy"):
        self.altitude_floor_km = altitude_floor_km
        self.spacing_steps = spacing_steps
        self.delta = delta
        self.mode = mode

    def fit(self, model: FactoredMissionModel, policy=None):
        spec = SafetySpec(altitude_floor_km=self.altitude_floor_km,
                          spacing_steps=self.spacing_steps, delta=self.delta)
        self.result_ = verify_policy(model, policy, spec, mode=self.mode)
        self.safety_value_ = self.result_.safety_value_at_initial
        self.feasible_ = self.result_.feasible
        return self
