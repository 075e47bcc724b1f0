"""Vectorized solver, propagation and simulation on the factored model.

All routines work on (altitude x fuel x cooldown) tensors, flattening fuel
and cooldown into one trailing axis for the sparse altitude products. The
deorbited state rides along as an extra altitude row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .build import FactoredMissionModel
from .grids import DomainError, DomainState

NEG_INF = -np.inf


def _dims(model: FactoredMissionModel):
    ctx = model.ctx
    return ctx.alt_grid.n_bins, ctx.fuel_grid.n_bins, model.codec.n_cool


@dataclass
class DomainSolution:
    """Policy and value surface from the factored backward induction."""

    model: FactoredMissionModel
    policy: np.ndarray  # (H, N_a, N_f, C) int8; deorbited state acts no-burn
    value0: np.ndarray  # (N_a, N_f, C) values at step 0
    values: np.ndarray = None  # (H+1, N_a, N_f, C) when retained

    def value_at(self, state: DomainState, h: int = 0) -> float:
        if state.deorbited:
            return 0.0
        surf = self.value0 if h == 0 else self.values[h]
        if surf is None:
            raise DomainError("full value surface was not retained")
        return float(surf[state.alt_bin, state.fuel_bin, state.cooldown])

    def value_at_initial(self) -> float:
        return self.value_at(self.model.initial_state)

    def action(self, state: DomainState, h: int) -> int:
        if state.deorbited:
            return 0
        return int(self.policy[h, state.alt_bin, state.fuel_bin, state.cooldown])


def _raise_candidate(model, ev_a, a, n_f):
    """Candidate value surface (N_a, N_f) for raise a taken at full cooldown.

    ev_a is the expected next value for action a, cooldown already 0 and
    fuel still undecremented; gathers the post-burn fuel bin and masks
    states that cannot afford or would overshoot the ceiling.
    """
    n_a = ev_a.shape[0]
    fuel_idx = np.arange(n_f)[None, :] - model.cost_bins[a][:, None]
    valid = (fuel_idx >= 0) & model.alt_ok[a][:, None]
    gathered = np.take_along_axis(ev_a, np.maximum(fuel_idx, 0), axis=1)
    return np.where(valid, gathered, NEG_INF)


def solve_backward_fast(model: FactoredMissionModel, terminal=None,
                        keep_values=False) -> DomainSolution:
    """Backward induction over the factored kernel.

    Ties break to the lowest action index (no-burn first), matching the
    explicit solver. terminal may be None (zero) or an array broadcastable
    to (N_a, N_f, C).
    """
    n_a, n_f, C = _dims(model)
    H = model.horizon
    A = model.num_actions
    K = C - 1
    F2 = n_f * C
    v_next = np.zeros((n_a + 1, F2))
    if terminal is not None:
        v_next[:n_a] = (np.zeros((n_a, n_f, C)) + np.asarray(terminal)).reshape(n_a, F2)
    policy = np.zeros((H, n_a, n_f, C), dtype=np.int8)
    values = np.empty((H + 1, n_a, n_f, C)) if keep_values else None
    if keep_values:
        values[H] = v_next[:n_a].reshape(n_a, n_f, C)
    cool_adv = np.minimum(np.arange(C) + 1, K)
    for h in range(H - 1, -1, -1):
        ev0 = (model.alt_kernels[h][0] @ v_next).reshape(n_a, n_f, C)
        best = np.ascontiguousarray(ev0[:, :, cool_adv])
        arg = policy[h]
        best_k = best[:, :, K]
        arg_k = arg[:, :, K]
        for a in range(1, A):
            ev_a = (model.alt_kernels[h][a] @ v_next).reshape(n_a, n_f, C)
            cand = _raise_candidate(model, ev_a[:, :, 0], a, n_f)
            upd = cand > best_k
            best_k[upd] = cand[upd]
            arg_k[upd] = a
        best += model.reward_alt[h][:, None, None]
        v_next = np.zeros((n_a + 1, F2))
        v_next[:n_a] = best.reshape(n_a, F2)
        if keep_values:
            values[h] = best
    return DomainSolution(model=model, policy=policy,
                          value0=v_next[:n_a].reshape(n_a, n_f, C).copy(),
                          values=values)


def evaluate_policy_fast(model: FactoredMissionModel, policy: np.ndarray,
                         terminal=None, keep_values=False) -> DomainSolution:
    """Fixed-policy value surface on the factored model."""
    n_a, n_f, C = _dims(model)
    H, A, K, F2 = model.horizon, model.num_actions, C - 1, n_f * C
    v_next = np.zeros((n_a + 1, F2))
    if terminal is not None:
        v_next[:n_a] = (np.zeros((n_a, n_f, C)) + np.asarray(terminal)).reshape(n_a, F2)
    values = np.empty((H + 1, n_a, n_f, C)) if keep_values else None
    if keep_values:
        values[H] = v_next[:n_a].reshape(n_a, n_f, C)
    cool_adv = np.minimum(np.arange(C) + 1, K)
    v0 = None
    for h in range(H - 1, -1, -1):
        ev0 = (model.alt_kernels[h][0] @ v_next).reshape(n_a, n_f, C)
        cur = np.ascontiguousarray(ev0[:, :, cool_adv])
        pol_k = policy[h][:, :, K]
        for a in range(1, A):
            sel = pol_k == a
            if not sel.any():
                continue
            ev_a = (model.alt_kernels[h][a] @ v_next).reshape(n_a, n_f, C)
            cand = _raise_candidate(model, ev_a[:, :, 0], a, n_f)
            cur[:, :, K][sel] = cand[sel]
        cur += model.reward_alt[h][:, None, None]
        v_next = np.zeros((n_a + 1, F2))
        v_next[:n_a] = cur.reshape(n_a, F2)
        if keep_values:
            values[h] = cur
        v0 = cur
    return DomainSolution(model=model, policy=policy, value0=v0.copy(), values=values)


def safety_value_fast(model: FactoredMissionModel, unsafe_alt: np.ndarray,
                      policy: np.ndarray = None, mode: str = "policy",
                      keep_values=False, stop_at: int = 0):
    """Probability of avoiding the unsafe set from every (state, step).

    unsafe_alt is a bool vector over altitude bins; the deorbited state is
    always unsafe. mode "policy" follows the supplied policy, mode "max"
    takes the most-safe admissible action at each step. Returns the value
    surface at step stop_at, or the full (H+1, ...) array when keep_values.
    """
    if mode not in ("policy", "max"):
        raise DomainError(f"unknown safety mode {mode!r}")
    if mode == "policy" and policy is None:
        raise DomainError("policy mode needs a policy")
    n_a, n_f, C = _dims(model)
    H, A, K, F2 = model.horizon, model.num_actions, C - 1, n_f * C
    unsafe_alt = np.asarray(unsafe_alt, dtype=bool)
    v_next = np.ones((n_a + 1, F2))
    v_next[:n_a][unsafe_alt] = 0.0
    v_next[n_a] = 0.0  # deorbited is in the unsafe set
    values = np.empty((H + 1, n_a, n_f, C)) if keep_values else None
    if keep_values:
        values[H] = v_next[:n_a].reshape(n_a, n_f, C)
    cool_adv = np.minimum(np.arange(C) + 1, K)
    cur = None
    for h in range(H - 1, stop_at - 1, -1):
        ev0 = (model.alt_kernels[h][0] @ v_next).reshape(n_a, n_f, C)
        cur = np.ascontiguousarray(ev0[:, :, cool_adv])
        if mode == "policy":
            pol_k = policy[h][:, :, K]
            for a in range(1, A):
                sel = pol_k == a
                if not sel.any():
                    continue
                ev_a = (model.alt_kernels[h][a] @ v_next).reshape(n_a, n_f, C)
                cand = _raise_candidate(model, ev_a[:, :, 0], a, n_f)
                cur[:, :, K][sel] = cand[sel]
        else:
            best_k = cur[:, :, K]
            for a in range(1, A):
                ev_a = (model.alt_kernels[h][a] @ v_next).reshape(n_a, n_f, C)
                cand = _raise_candidate(model, ev_a[:, :, 0], a, n_f)
                np.maximum(best_k, cand, out=best_k)
        cur[unsafe_alt] = 0.0
        np.clip(cur, 0.0, 1.0, out=cur)  # guard row-sum rounding at ~1e-15
        v_next = np.zeros((n_a + 1, F2))
        v_next[:n_a] = cur.reshape(n_a, F2)
        if keep_values:
            values[h] = cur
    if keep_values:
        return values
    if cur is None:  # stop_at == H
        cur = v_next[:n_a].reshape(n_a, n_f, C).copy()
    return cur


def forward_distribution_fast(model: FactoredMissionModel, policy: np.ndarray,
                              initial: DomainState = None, start_step: int = 0,
                              unsafe_alt: np.ndarray = None):
    """Propagate the state distribution under a policy.

    Returns a dict with per-step altitude/fuel marginals, deorbit mass,
    the final joint distribution, and (when unsafe_alt is given) the
    cumulative probability of having entered the unsafe set by each step.
    """
    n_a, n_f, C = _dims(model)
    H, A, K, F2 = model.horizon, model.num_actions, C - 1, n_f * C
    initial = initial or model.initial_state
    steps = range(start_step, H)
    p = np.zeros((n_a, n_f, C))
    if initial.deorbited:
        p_dead = 1.0
    else:
        p[initial.alt_bin, initial.fuel_bin, initial.cooldown] = 1.0
        p_dead = 0.0
    n_out = H - start_step + 1
    alt_marg = np.zeros((n_out, n_a))
    fuel_marg = np.zeros((n_out, n_f))
    dead_mass = np.zeros(n_out)
    violated = np.zeros(n_out) if unsafe_alt is not None else None
    viol_acc = 0.0

    def record(t, p, p_dead):
        nonlocal viol_acc
        alt_marg[t] = p.sum(axis=(1, 2))
        fuel_marg[t] = p.sum(axis=(0, 2))
        dead_mass[t] = p_dead
        if unsafe_alt is not None:
            viol_acc += float(p[unsafe_alt].sum())
            violated[t] = viol_acc + p_dead

    record(0, p, p_dead)
    if unsafe_alt is not None:
        p = p.copy()
        p[unsafe_alt] = 0.0  # unsafe mass stays counted as violated
    for t, h in enumerate(steps, start=1):
        out = np.zeros((n_a + 1, F2))
        pol = policy[h]
        for a in range(A):
            mass = np.where(pol == a, p, 0.0)
            if not mass.any():
                continue
            moved = np.zeros_like(mass)
            if a == 0:
                moved[:, :, 1:K + 1] += mass[:, :, 0:K]
                moved[:, :, K] += mass[:, :, K]
            else:
                src = mass[:, :, K]
                tgt = np.arange(n_f)[None, :] - model.cost_bins[a][:, None]
                rows = np.broadcast_to(np.arange(n_a)[:, None], tgt.shape)
                ok = tgt >= 0
                np.add.at(moved[:, :, 0], (rows[ok], tgt[ok]), src[ok])
            out += model.alt_kernels[h][a].T @ moved.reshape(n_a, F2)
        p = out[:n_a].reshape(n_a, n_f, C)
        p_dead += float(out[n_a].sum())
        record(t, p, p_dead)
        if unsafe_alt is not None:
            p[unsafe_alt] = 0.0
    return {
        "steps": np.arange(start_step, H + 1),
        "altitude_marginals": alt_marg,
        "fuel_marginals": fuel_marg,
        "deorbit_mass": dead_mass,
        "violation_curve": violated,
        "final_joint": p,
        "final_dead_mass": p_dead,
    }


def simulate_fast(model: FactoredMissionModel, policy: np.ndarray, seed: int,
                  n: int, initial: DomainState = None, start_step: int = 0):
    """Sample n trajectories; vectorized across the batch, seeded.

    Successor altitude draws use inverse-CDF sampling on the stored sparse
    kernel rows. Returns a dict of integer state component arrays of shape
    (n, steps+1) plus per-step rewards.
    """
    if n < 1:
        raise DomainError("need at least one trajectory")
    n_a, n_f, C = _dims(model)
    H, K = model.horizon, C - 1
    initial = initial or model.initial_state
    steps = H - start_step
    alt = np.full((n, steps + 1), initial.alt_bin, dtype=np.int32)
    fuel = np.full((n, steps + 1), initial.fuel_bin, dtype=np.int32)
    cool = np.full((n, steps + 1), initial.cooldown, dtype=np.int8)
    dead = np.zeros((n, steps + 1), dtype=bool)
    dead[:, 0] = initial.deorbited
    act = np.zeros((n, steps), dtype=np.int8)
    rew = np.zeros((n, steps))
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    for t, h in enumerate(range(start_step, H)):
        a_cur, f_cur, c_cur, d_cur = alt[:, t], fuel[:, t], cool[:, t], dead[:, t]
        acts = np.where(d_cur, 0, policy[h][a_cur, f_cur, c_cur]).astype(np.int8)
        act[:, t] = acts
        rew[:, t] = np.where(d_cur, 0.0, model.reward_alt[h][a_cur])
        u = rng.random(n)  # one draw per trajectory per step, dead included,
        # so trajectory streams stay aligned regardless of deorbit timing
        a_nxt = a_cur.copy()
        d_nxt = d_cur.copy()
        f_nxt = f_cur.copy()
        c_nxt = c_cur.copy()
        live = ~d_cur
        for a in np.unique(acts[live]) if live.any() else []:
            sel = np.flatnonzero((acts == a) & live)
            sub = model.alt_kernels[h][int(a)][a_cur[sel]]
            csum = np.cumsum(sub.data)
            starts = sub.indptr[:-1]
            ends = sub.indptr[1:]
            base = np.where(starts > 0, csum[starts - 1], 0.0)
            row_tot = csum[ends - 1] - base
            target = base + u[sel] * row_tot
            j = np.clip(np.searchsorted(csum, target, side="right"), starts, ends - 1)
            nxt = sub.indices[j]
            a_nxt[sel] = np.minimum(nxt, n_a - 1).astype(np.int32)
            d_nxt[sel] = nxt == n_a
            if a == 0:
                c_nxt[sel] = np.minimum(c_cur[sel] + 1, K)
            else:
                f_nxt[sel] = f_cur[sel] - model.cost_bins[int(a)][a_cur[sel]]
                c_nxt[sel] = 0
        alt[:, t + 1] = a_nxt
        fuel[:, t + 1] = f_nxt
        cool[:, t + 1] = c_nxt
        dead[:, t + 1] = d_nxt
    return {
        "seed": seed,
        "start_step": start_step,
        "alt_bin": alt,
        "fuel_bin": fuel,
        "cooldown": cool,
        "deorbited": dead,
        "actions": act,
        "rewards": rew,
    }
