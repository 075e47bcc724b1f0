"""Mission-model assembly: rewards, fuel costs, masks and transition kernels.

The full-scale model (millions of state-time pairs) is never materialized as
a flat kernel. Instead the transition structure factors exactly:

  * the altitude bin evolves stochastically (solar-flux mixture x thrust
    realization), independent of fuel and cooldown;
  * the fuel bin drops deterministically by the commanded action's cost;
  * the cooldown counter resets on a burn and saturates otherwise.

FactoredMissionModel stores one sparse altitude kernel per (step, action)
plus the deterministic bookkeeping, and can expand to an explicit
MissionModel for small configurations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .. import astro
from ..astro import KM, Body, DensityModel, SpacecraftParams
from ..mdp.model import MissionModel, TimeGrid, kernel_from_triplets
from ..resonance import ResonanceTable
from .grids import (DEORBITED, AltitudeGrid, DomainError, DomainState, FuelGrid,
                    ManeuverActionSet, RewardParams, StateCodec)
from .scenario import SolarScenario, ThrustModel

FUEL_COST_MODES = ("altitude-budget", "delta-v")


def _decay_batch(alt0_m, flux, dt, sc, body, density, substep=86400.0):
    """Propagate a batch of altitudes, each under its own constant flux.

    Elementwise version of astro.propagate_altitude with the same fixed
    1-day substepping. Returns (alt_m, deorbited).
    """
    alt = np.array(alt0_m, dtype=float, copy=True)
    flux = np.broadcast_to(np.asarray(flux, dtype=float), alt.shape)
    floor = density.coverage_m[0]
    dead = np.zeros(alt.shape, dtype=bool)
    remaining = float(dt)
    while remaining > 0:
        step = min(substep, remaining)
        remaining -= step
        live = ~dead
        if not live.any():
            break
        a = astro.radius_from_altitude(alt[live], body)
        alt[live] += astro.decay_rate(a, flux[live], sc, body, density) * step
        newly = alt < floor
        alt[newly] = floor
        dead |= newly
    return alt, dead


class _ResonancePenalty:
    """Vectorized geometric-mean penalty over resonances in altitude intervals."""

    def __init__(self, table: ResonanceTable, rp: RewardParams):
        alts = table.altitudes_km()
        order = np.argsort(alts)
        self.alts = alts[order]
        terms = rp.alpha * table.rates()[order] / rp.res_max + rp.beta
        with np.errstate(divide="ignore"):
            logs = np.where(terms > 0, np.log(np.maximum(terms, 1e-300)), -np.inf)
        self.log_prefix = np.concatenate(([0.0], np.cumsum(np.where(terms > 0, logs, 0.0))))
        self.zero_prefix = np.concatenate(([0], np.cumsum(terms == 0)))

    def factor(self, lo, hi):
        """Penalty factor for resonances inside (lo, hi]; 1 where none."""
        i0 = np.searchsorted(self.alts, lo, side="right")
        i1 = np.searchsorted(self.alts, hi, side="right")
        n = i1 - i0
        zeros = self.zero_prefix[i1] - self.zero_prefix[i0]
        logsum = self.log_prefix[i1] - self.log_prefix[i0]
        with np.errstate(invalid="ignore", divide="ignore"):
            gm = np.exp(logsum / np.maximum(n, 1))
        out = np.where(n > 0, gm, 1.0)
        return np.where(zeros > 0, 0.0, out)


@dataclass
class MissionContext:
    """Everything needed to build the mission MDP."""

    alt_grid: AltitudeGrid
    fuel_grid: FuelGrid
    cooldown_steps: int  # K: burns allowed only when counter has reached K
    action_set: ManeuverActionSet
    time: TimeGrid
    scenario: SolarScenario
    thrust: ThrustModel
    spacecraft: SpacecraftParams
    body: Body
    density: DensityModel
    reward_params: RewardParams
    resonance_table: ResonanceTable
    fuel_cost_mode: str = "delta-v"
    initial_state: DomainState = None

    def __post_init__(self):
        if self.fuel_cost_mode not in FUEL_COST_MODES:
            raise DomainError(f"unknown fuel cost mode {self.fuel_cost_mode!r}")
        if self.scenario.horizon < self.time.horizon_steps:
            raise DomainError("scenario does not cover the planning horizon")
        self.codec = StateCodec(self.alt_grid, self.fuel_grid, self.cooldown_steps)


def bin_altitude(alt_km, grid: AltitudeGrid):
    """Bin an altitude; DEORBITED (-1) below the grid floor."""
    return grid.bin(alt_km)


def fuel_cost_bins(ctx: MissionContext) -> np.ndarray:
    """Cost of each action in fuel-grid bins, per current altitude bin.

    Shape (A, N_a); action 0 (no burn) costs zero. Under thrust uncertainty
    the *commanded* cost is deducted: propellant spent follows the command,
    the achieved raise is what varies.
    """
    raises_km = ctx.action_set.raise_km(ctx.alt_grid)
    centers_m = ctx.alt_grid.centers() * KM
    n_a = ctx.alt_grid.n_bins
    out = np.zeros((ctx.action_set.num_actions, n_a), dtype=np.int64)
    rf = ctx.fuel_grid.band_width
    for k in range(1, ctx.action_set.num_actions):
        if ctx.fuel_cost_mode == "altitude-budget":
            cost = np.full(n_a, raises_km[k])
        else:
            r = astro.radius_from_altitude(centers_m, ctx.body)
            dv = astro.delta_v_for_raise(r, raises_km[k] * KM, ctx.body)
            cost = astro.fuel_mass_for_delta_v(dv, ctx.spacecraft)
        out[k] = np.ceil(cost / rf).astype(np.int64)
    return out


def fuel_cost(state: DomainState, action: int, ctx: MissionContext) -> int:
    """Fuel cost in grid bins for one state-action pair."""
    if action == 0 or state.deorbited:
        return 0
    return int(fuel_cost_bins(ctx)[action, state.alt_bin])


def raise_admissible_by_altitude(ctx: MissionContext) -> np.ndarray:
    """(A, N_a) bool: raises that would exceed the grid ceiling are masked."""
    n_a = ctx.alt_grid.n_bins
    steps = ctx.action_set.raise_bins()
    ok = np.ones((ctx.action_set.num_actions, n_a), dtype=bool)
    for k in range(1, ctx.action_set.num_actions):
        ok[k] = np.arange(n_a) + steps[k] <= n_a - 1
    return ok


def action_mask(state: DomainState, ctx: MissionContext,
                costs: np.ndarray = None) -> np.ndarray:
    """Admissible-action vector for one state.

    No-burn is always admissible; a raise needs a full cooldown counter,
    enough fuel for its commanded cost, and a target at or below the ceiling.
    The deorbited state admits only no-burn.
    """
    A = ctx.action_set.num_actions
    mask = np.zeros(A, dtype=bool)
    mask[0] = True
    if state.deorbited or state.cooldown < ctx.cooldown_steps:
        return mask
    if costs is None:
        costs = fuel_cost_bins(ctx)
    alt_ok = raise_admissible_by_altitude(ctx)
    for k in range(1, A):
        mask[k] = alt_ok[k, state.alt_bin] and state.fuel_bin >= costs[k, state.alt_bin]
    return mask


def _branch_triples(ctx: MissionContext, h: int, action: int):
    """(flux, eta, weight) support of the transition mixture at (h, action)."""
    flux, fw = ctx.scenario.branches(h)
    if action == 0:
        eta = np.ones_like(flux)
        return flux, eta, fw
    tf, tw = ctx.thrust.factors, ctx.thrust.weights
    flux2 = np.repeat(flux, len(tf))
    eta2 = np.tile(tf, len(flux))
    w2 = np.repeat(fw, len(tf)) * np.tile(tw, len(flux))
    return flux2, eta2, w2


def transition_row(state: DomainState, action: int, h: int,
                   ctx: MissionContext, costs: np.ndarray = None):
    """Sparse successor distribution for (state, action, step).

    Returns (flat successor indices, probabilities), sorted by index.
    Mixes solar-cycle intensity, within-class flux and thrust realization;
    fuel drops by the commanded cost, the cooldown resets on a burn and
    saturates otherwise, and deorbiting is absorbing.
    """
    codec = ctx.codec
    if state.deorbited:
        if action != 0:
            raise DomainError("deorbited state admits only no-burn")
        return np.asarray([codec.deorbited_index]), np.asarray([1.0])
    if costs is None:
        costs = fuel_cost_bins(ctx)
    if not action_mask(state, ctx, costs)[action]:
        raise DomainError(
            f"action {action} inadmissible at (alt={state.alt_bin}, "
            f"fuel={state.fuel_bin}, cooldown={state.cooldown}, h={h})")

    raises_km = ctx.action_set.raise_km(ctx.alt_grid)
    center_m = ctx.alt_grid.center(state.alt_bin) * KM
    flux, eta, w = _branch_triples(ctx, h, action)
    start = center_m + eta * raises_km[action] * KM
    alt1, dead = _decay_batch(start, flux, ctx.time.step_seconds,
                              ctx.spacecraft, ctx.body, ctx.density)
    bins = ctx.alt_grid.bin(alt1 / KM)
    dead |= bins == DEORBITED

    fuel2 = state.fuel_bin - (0 if action == 0 else int(costs[action, state.alt_bin]))
    cool2 = min(state.cooldown + 1, ctx.cooldown_steps) if action == 0 else 0
    flat = np.where(
        dead, codec.deorbited_index,
        (np.maximum(bins, 0) * ctx.fuel_grid.n_bins + fuel2) * codec.n_cool + cool2)
    idx, inv = np.unique(flat, return_inverse=True)
    probs = np.zeros(len(idx))
    np.add.at(probs, inv, w)
    return idx, probs


class FactoredMissionModel:
    """Paper-scale mission MDP in factored form.

    alt_kernels[h][a] is an (N_a x N_a+1) CSR matrix over altitude bins whose
    last column is deorbit mass; fuel and cooldown evolve deterministically.
    """

    def __init__(self, ctx: MissionContext):
        self.ctx = ctx
        self.codec = ctx.codec
        self.time = ctx.time
        self.cost_bins = fuel_cost_bins(ctx)
        self.raise_bins = ctx.action_set.raise_bins()
        self.alt_ok = raise_admissible_by_altitude(ctx)
        self.reward_alt = None  # (H, N_a), filled by build()
        self.alt_kernels = None  # [h][a] -> csr
        self.initial_state = ctx.initial_state or DomainState(
            ctx.alt_grid.n_bins - 1, ctx.fuel_grid.n_bins - 1, ctx.cooldown_steps)

    # -- assembly ---------------------------------------------------------

    def build(self):
        ctx = self.ctx
        H = ctx.time.horizon_steps
        n_a = ctx.alt_grid.n_bins
        A = ctx.action_set.num_actions
        centers_m = ctx.alt_grid.centers() * KM
        raises_km = ctx.action_set.raise_km(ctx.alt_grid)
        penalty = _ResonancePenalty(ctx.resonance_table, ctx.reward_params)
        self.alt_kernels = []
        self.reward_alt = np.zeros((H, n_a))
        rows0 = np.arange(n_a)
        for h in range(H):
            slab = []
            for a in range(A):
                flux, eta, w = _branch_triples(ctx, h, a)
                ok = self.alt_ok[a]
                cols_ok = rows0[ok]
                start = centers_m[None, ok] + (eta * raises_km[a] * KM)[:, None]
                alt1, dead = _decay_batch(
                    start, np.broadcast_to(flux[:, None], start.shape),
                    ctx.time.step_seconds, ctx.spacecraft, ctx.body, ctx.density)
                bins = ctx.alt_grid.bin(alt1 / KM)
                dead = dead | (bins == DEORBITED)
                cols = np.where(dead, n_a, np.maximum(bins, 0))
                rows = np.broadcast_to(cols_ok[None, :], cols.shape)
                data = np.broadcast_to(w[:, None], cols.shape)
                P = sparse.coo_matrix(
                    (data.ravel(), (rows.ravel(), cols.ravel())),
                    shape=(n_a, n_a + 1)).tocsr()
                P.sum_duplicates()
                P.sort_indices()
                slab.append(P)
                if a == 0:
                    self.reward_alt[h] = self._reward_slice(alt1, dead, w, penalty)
            self.alt_kernels.append(slab)
        return self

    def _reward_slice(self, alt_next_m, dead, w, penalty):
        """Expected next-step altitude times the resonance penalty, per bin.

        The expectation runs over the no-burn decay mixture; deorbiting
        branches contribute zero. An empty crossed interval falls back to
        the state's own band.
        """
        ctx = self.ctx
        centers = ctx.alt_grid.centers()
        half = ctx.alt_grid.band_width / 2.0
        alt_next = alt_next_m / KM
        lo = np.minimum(alt_next, centers[None, :])
        hi = np.maximum(alt_next, centers[None, :])
        if ctx.reward_params.crossed_interval:
            same = lo == hi
            lo = np.where(same, centers[None, :] - half, lo)
            hi = np.where(same, centers[None, :] + half, hi)
        else:
            lo = np.broadcast_to(centers[None, :] - half, lo.shape)
            hi = np.broadcast_to(centers[None, :] + half, hi.shape)
        factor = penalty.factor(lo, hi)
        contrib = np.where(dead, 0.0, alt_next * factor)
        return w @ contrib

    # -- bookkeeping ------------------------------------------------------

    @property
    def num_states(self) -> int:
        return self.codec.num_states

    @property
    def num_actions(self) -> int:
        return self.ctx.action_set.num_actions

    @property
    def horizon(self) -> int:
        return self.time.horizon_steps

    def kernel_nnz(self) -> int:
        return sum(P.nnz for slab in self.alt_kernels for P in slab)

    def stats(self) -> dict:
        nnz = self.kernel_nnz()
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "horizon_steps": self.horizon,
            "altitude_bins": self.ctx.alt_grid.n_bins,
            "fuel_bins": self.ctx.fuel_grid.n_bins,
            "cooldown_levels": self.codec.n_cool,
            "altitude_kernel_nnz": nnz,
            "kernel_bytes": int(sum(P.data.nbytes + P.indices.nbytes + P.indptr.nbytes
                                    for slab in self.alt_kernels for P in slab)),
        }

    def initial_dist_flat(self) -> np.ndarray:
        p = np.zeros(self.num_states)
        p[self.codec.encode(self.initial_state)] = 1.0
        return p

    def admissible(self, state: DomainState, action: int) -> bool:
        return bool(action_mask(state, self.ctx, self.cost_bins)[action])

    def transition_row(self, state: DomainState, action: int, h: int):
        return transition_row(state, action, h, self.ctx, self.cost_bins)

    # -- explicit expansion (small configurations, golden tests) ----------

    def to_explicit(self, max_states: int = 20000) -> MissionModel:
        """Expand into an explicit MissionModel; refuses large state spaces."""
        S, A, H = self.num_states, self.num_actions, self.horizon
        if S > max_states:
            raise DomainError(f"explicit expansion refused for {S} states")
        codec = self.codec
        reward = np.zeros((H, S, A))
        mask = np.zeros((H, S, A), dtype=bool)
        triplets = []
        states = [codec.decode(i) for i in range(S)]
        for i, st in enumerate(states):
            adm = (np.asarray([True] + [False] * (A - 1)) if st.deorbited
                   else action_mask(st, self.ctx, self.cost_bins))
            for h in range(H):
                mask[h, i] = adm
                if not st.deorbited:
                    reward[h, i, :] = self.reward_alt[h, st.alt_bin]
        for h in range(H):
            for i, st in enumerate(states):
                for a in np.flatnonzero(mask[h, i]):
                    idx, probs = self.transition_row(st, int(a), h)
                    triplets.extend((h, i, int(a), int(s2), float(p))
                                    for s2, p in zip(idx, probs))
        model = MissionModel(
            num_states=S, num_actions=A, time=self.time,
            kernels=kernel_from_triplets(S, A, H, triplets),
            reward=reward, initial_dist=self.initial_dist_flat(),
            action_mask=mask)
        return model.validate()


def assemble_model(ctx: MissionContext) -> FactoredMissionModel:
    """Build the mission MDP in factored form and report its statistics."""
    return FactoredMissionModel(ctx).build()
