"""Reach-avoid safety verification and chance-constraint checking.

The mission rule has two clauses: keep the altitude above a floor, and
space maneuvers at least a fixed number of steps apart. The spacing clause
is enforced structurally by the domain's cooldown action mask, so the
probabilistic dynamic program only needs the altitude-floor avoid set; no
specification-automaton product is required.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain.build import FactoredMissionModel
from .domain.fastpath import (forward_distribution_fast, safety_value_fast,
                              simulate_fast)
from .domain.grids import DomainError, DomainState
from .mdp.model import MissionModel, Policy


@dataclass(frozen=True)
class SafetySpec:
    altitude_floor_km: float = 300.0
    spacing_steps: int = 3
    delta: float = 0.05

    def __post_init__(self):
        if not (0.0 <= self.delta < 1.0):
            raise DomainError("delta must lie in [0, 1)")


@dataclass
class UnsafeSet:
    """Avoid set over the domain state space.

    unsafe_alt marks altitude bins whose band lies entirely at or below the
    floor; the deorbited state is always unsafe.
    """

    unsafe_alt: np.ndarray  # (N_a,) bool
    clauses: dict = field(default_factory=dict)

    def contains(self, state: DomainState) -> bool:
        return bool(state.deorbited or self.unsafe_alt[state.alt_bin])


def compile_spec(spec: SafetySpec, model: FactoredMissionModel) -> UnsafeSet:
    """Compile the safety rule against a mission model's state space."""
    grid = model.ctx.alt_grid
    if not (grid.lo <= spec.altitude_floor_km <= grid.hi):
        raise DomainError(
            f"floor {spec.altitude_floor_km} km outside grid "
            f"[{grid.lo}, {grid.hi}] km")
    if model.codec.cooldown_max < spec.spacing_steps:
        raise DomainError(
            f"cooldown dimension {model.codec.cooldown_max} cannot express "
            f"spacing of {spec.spacing_steps} steps")
    # a bin is unsafe when its entire band sits at or below the floor
    upper_edges = grid.centers() + grid.band_width / 2.0
    unsafe_alt = upper_edges <= spec.altitude_floor_km
    clauses = {
        "altitude_floor": "probabilistic",
        "maneuver_spacing": "structurally satisfied"
        if model.codec.cooldown_max >= spec.spacing_steps
        else "probabilistic",
    }
    return UnsafeSet(unsafe_alt=unsafe_alt, clauses=clauses)


@dataclass
class VerificationResult:
    safety_value_at_initial: float
    delta: float
    feasible: bool
    margin: float
    mode: str
    clauses: dict
    violation_curve: np.ndarray  # cumulative Pr(entered B by step h)
    final_alt_pmf: np.ndarray  # (N_a + 1,): per-bin mass, last = deorbited
    final_alt_cdf: np.ndarray  # (N_a,) over bins, deorbit mass at the bottom
    violating_trace: list = None

    def final_altitude_quantile(self, q: float, centers_km: np.ndarray) -> float:
        """Smallest bin center whose cdf reaches q; -inf if deorbit mass alone does."""
        if self.final_alt_pmf[-1] >= q:
            return float("-inf")
        j = int(np.searchsorted(self.final_alt_cdf, q, side="left"))
        return float(centers_km[min(j, len(centers_km) - 1)])


def check_constraint(safety_value: float, delta: float) -> tuple:
    """(feasible, margin): margin = V_phi(s0, 0) - (1 - delta)."""
    margin = safety_value - (1.0 - delta)
    return margin >= 0.0, margin


def verify_policy(model: FactoredMissionModel, policy: np.ndarray,
                  spec: SafetySpec, mode: str = "policy") -> VerificationResult:
    """Full verification pipeline on the factored mission model."""
    B = compile_spec(spec, model)
    v0 = safety_value_fast(model, B.unsafe_alt,
                           policy=policy if mode == "policy" else None,
                           mode=mode)
    init = model.initial_state
    sval = 0.0 if B.contains(init) else float(
        v0[init.alt_bin, init.fuel_bin, init.cooldown])
    feasible, margin = check_constraint(sval, spec.delta)
    fwd = forward_distribution_fast(model, policy, unsafe_alt=B.unsafe_alt)
    pmf, cdf = final_altitude_distribution(fwd)
    return VerificationResult(
        safety_value_at_initial=sval,
        delta=spec.delta,
        feasible=feasible,
        margin=margin,
        mode=mode,
        clauses=B.clauses,
        violation_curve=fwd["violation_curve"],
        final_alt_pmf=pmf,
        final_alt_cdf=cdf,
    )


def final_altitude_distribution(fwd: dict):
    """Marginal pmf/cdf of the final altitude from a forward propagation.

    pmf has one entry per altitude bin plus a trailing deorbit entry; the
    cdf runs over altitude bins with deorbit mass counted below the grid.
    """
    final_alt = fwd["altitude_marginals"][-1]
    dead = fwd["final_dead_mass"]
    pmf = np.concatenate([final_alt, [dead]])
    cdf = dead + np.cumsum(final_alt)
    return pmf, cdf


def replan_from_state(model: FactoredMissionModel, policy: np.ndarray,
                      current: DomainState, current_step: int,
                      spec: SafetySpec, seed: int = 0, rollouts: int = 1000):
    """Re-propagate the existing policy from an observed mission state.

    Returns the conditional verification result from (current, step) plus
    per-step altitude/fuel percentile envelopes from seeded rollouts.
    """
    if not (0 <= current_step < model.horizon):
        raise DomainError("current_step must lie before the horizon")
    B = compile_spec(spec, model)
    v_h0 = safety_value_fast(model, B.unsafe_alt, policy=policy,
                             mode="policy", stop_at=current_step)
    sval = 0.0 if B.contains(current) else float(
        v_h0[current.alt_bin, current.fuel_bin, current.cooldown])
    feasible, margin = check_constraint(sval, spec.delta)
    fwd = forward_distribution_fast(model, policy, initial=current,
                                    start_step=current_step,
                                    unsafe_alt=B.unsafe_alt)
    pmf, cdf = final_altitude_distribution(fwd)
    batch = simulate_fast(model, policy, seed=seed, n=rollouts,
                          initial=current, start_step=current_step)
    env = rollout_envelopes(model, batch)
    result = VerificationResult(
        safety_value_at_initial=sval, delta=spec.delta, feasible=feasible,
        margin=margin, mode="policy", clauses=B.clauses,
        violation_curve=fwd["violation_curve"], final_alt_pmf=pmf,
        final_alt_cdf=cdf)
    return result, env, fwd


ENVELOPE_QUANTILES = (0.05, 0.25, 0.50, 0.75, 0.95)


def rollout_envelopes(model: FactoredMissionModel, batch: dict) -> dict:
    """Per-step altitude and fuel percentile envelopes from a rollout batch.

    Deorbited trajectories count at the grid floor so the envelopes reflect
    loss of the spacecraft instead of silently dropping it.
    """
    grid = model.ctx.alt_grid
    fgrid = model.ctx.fuel_grid
    alt_km = np.where(batch["deorbited"], grid.lo, grid.center(batch["alt_bin"]))
    fuel = fgrid.center(batch["fuel_bin"])
    qs = np.asarray(ENVELOPE_QUANTILES)
    return {
        "quantiles": qs,
        "start_step": batch["start_step"],
        "altitude_km": np.quantile(alt_km, qs, axis=0).T,  # (steps+1, 5)
        "fuel": np.quantile(fuel, qs, axis=0).T,
        "min_altitude_km": alt_km.min(axis=0),
        "deorbit_fraction": batch["deorbited"].mean(axis=0),
    }


# -- explicit-model safety DP (small instances, exactness tests) ----------


def safety_value_explicit(model: MissionModel, unsafe: np.ndarray,
                          policy: Policy = None, mode: str = "policy") -> np.ndarray:
    """Avoid-set satisfaction probabilities V_phi(s, h) on an explicit model.

    unsafe is a bool vector over flat states. States from which the unsafe
    set is unreachable (on the kernel support, per remaining horizon) are
    assigned probability 1 by a backward reachability pass; elsewhere the
    recursion takes the policy's action or the max over admissible actions.
    """
    if mode not in ("policy", "max"):
        raise DomainError(f"unknown safety mode {mode!r}")
    if mode == "policy":
        if policy is None:
            raise DomainError("policy mode needs a policy")
        policy.check_admissible(model)
    H, S, A = model.horizon, model.num_states, model.num_actions
    unsafe = np.asarray(unsafe, dtype=bool)
    # stored kernel entries are strictly positive, so a plain product with a
    # 0/1 vector detects support-graph reachability
    can_reach = np.zeros((H + 1, S), dtype=bool)
    can_reach[H] = unsafe
    for h in range(H - 1, -1, -1):
        nxt = can_reach[h + 1].astype(float)
        reach = unsafe.copy()
        for a in range(A):
            hits = (model.kernels[h][a] @ nxt) > 0
            if mode == "policy":
                rows = policy.action_at[h] == a
            else:
                rows = model.action_mask[h, :, a]
            reach |= hits & rows
        can_reach[h] = reach
    v = np.ones((H + 1, S))
    v[H, unsafe] = 0.0
    for h in range(H - 1, -1, -1):
        if mode == "policy":
            expect = np.zeros(S)
            for a in range(A):
                rows = policy.action_at[h] == a
                if rows.any():
                    expect[rows] = (model.kernels[h][a] @ v[h + 1])[rows]
        else:
            expect = np.full(S, -np.inf)
            for a in range(A):
                rows = model.action_mask[h, :, a]
                if rows.any():
                    vals = model.kernels[h][a] @ v[h + 1]
                    expect[rows] = np.maximum(expect[rows], vals[rows])
        v[h] = np.where(unsafe, 0.0, np.where(~can_reach[h], 1.0, expect))
    return v


def violating_trace_explicit(model: MissionModel, policy: Policy,
                             unsafe: np.ndarray, v_phi: np.ndarray) -> list:
    """Greedy most-plausible violation prefix: descend lowest-safety successors.

    Diagnostic aid, not a formal counterexample certificate.
    """
    s = int(np.argmax(model.initial_dist * (1.0 - v_phi[0])))
    trace = [s]
    for h in range(model.horizon):
        if unsafe[s]:
            break
        idx, probs = model.successors(s, policy.action(s, h), h)
        if len(idx) == 0:
            break
        s = int(idx[np.argmin(v_phi[h + 1][idx] - 1e-12 * probs)])
        trace.append(s)
    return trace
