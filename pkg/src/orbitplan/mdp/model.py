"""Core data structures for finite-horizon Markov decision processes.

A model is stored "flat": states and actions are integer indices, the
transition kernel is a list of per-(step, action) sparse row-stochastic
matrices, and rewards/masks are dense arrays indexed [h, s, a].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np
from scipy import sparse

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Raised when a model violates its structural invariants."""


@dataclass(frozen=True)
class TimeGrid:
    """Discrete decision timeline: decisions at steps 0..H-1, terminal at H."""

    horizon_steps: int
    step_seconds: float
    epoch: datetime = datetime(2000, 1, 1)

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ModelError("horizon_steps must be >= 1")
        if self.step_seconds <= 0:
            raise ModelError("step_seconds must be positive")

    def date_at(self, h: int) -> datetime:
        return self.epoch + timedelta(seconds=round(self.step_seconds * h))


@dataclass
class MissionModel:
    """Explicit finite-horizon MDP with a sparse time-indexed kernel.

    kernels[h][a] is an (S x S) CSR matrix whose row s holds the successor
    distribution for taking action a in state s at step h. Rows of
    inadmissible (s, a, h) triples are empty and excluded from validation.
    """

    num_states: int
    num_actions: int
    time: TimeGrid
    kernels: list  # kernels[h][a] -> csr_matrix, shape (S, S)
    reward: np.ndarray  # (H, S, A)
    initial_dist: np.ndarray  # (S,)
    action_mask: np.ndarray  # (H, S, A) bool

    def __post_init__(self):
        self.reward = np.asarray(self.reward, dtype=float)
        self.initial_dist = np.asarray(self.initial_dist, dtype=float)
        self.action_mask = np.asarray(self.action_mask, dtype=bool)

    @property
    def horizon(self) -> int:
        return self.time.horizon_steps

    def validate(self):
        """Check all structural invariants; raises ModelError naming the offender."""
        H, S, A = self.horizon, self.num_states, self.num_actions
        if self.reward.shape != (H, S, A):
            raise ModelError(f"reward shape {self.reward.shape} != {(H, S, A)}")
        if self.action_mask.shape != (H, S, A):
            raise ModelError(f"action_mask shape {self.action_mask.shape} != {(H, S, A)}")
        if self.initial_dist.shape != (S,):
            raise ModelError("initial_dist has wrong length")
        if np.any(self.initial_dist < 0) or abs(self.initial_dist.sum() - 1.0) > PROB_TOL:
            raise ModelError("initial_dist is not a probability vector")
        if len(self.kernels) != H:
            raise ModelError("kernel must have one slice per decision step")
        for h in range(H):
            if not self.action_mask[h].any(axis=1).all():
                s = int(np.flatnonzero(~self.action_mask[h].any(axis=1))[0])
                raise ModelError(f"state {s} has no admissible action at step {h}")
            for a in range(A):
                P = self.kernels[h][a]
                if P.shape != (S, S):
                    raise ModelError(f"kernel[{h}][{a}] has shape {P.shape}")
                if P.nnz and P.data.min() < 0:
                    raise ModelError(f"negative probability in kernel at (h={h}, a={a})")
                rows = np.flatnonzero(self.action_mask[h, :, a])
                sums = np.asarray(P.sum(axis=1)).ravel()[rows]
                bad = np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL)
                if bad.size:
                    s = int(rows[bad[0]])
                    raise ModelError(
                        f"kernel row does not sum to 1 at (s={s}, a={a}, h={h}): sum={sums[bad[0]]!r}"
                    )
        return self

    def successors(self, s: int, a: int, h: int):
        """Sparse successor list for (s, a, h) as (indices, probabilities)."""
        row = self.kernels[h][a].getrow(s)
        return row.indices.copy(), row.data.copy()

    def nnz(self) -> int:
        return sum(P.nnz for slab in self.kernels for P in slab)


def kernel_from_triplets(num_states, num_actions, horizon, triplets):
    """Build kernels[h][a] CSR matrices from (h, s, a, s', p) entries.

    Probabilities at or below PROB_TOL are dropped and the row renormalized;
    successor lists come out sorted by state index (CSR canonical form).
    """
    buckets = {}
    for (h, s, a, s2, p) in triplets:
        buckets.setdefault((h, a), []).append((s, s2, p))
    kernels = []
    for h in range(horizon):
        slab = []
        for a in range(num_actions):
            entries = buckets.get((h, a), [])
            if entries:
                rows, cols, data = map(np.asarray, zip(*entries))
                P = sparse.coo_matrix(
                    (np.asarray(data, dtype=float), (rows, cols)),
                    shape=(num_states, num_states),
                ).tocsr()
                P.sum_duplicates()
                before = np.asarray(P.sum(axis=1)).ravel()
                P.data[P.data <= PROB_TOL] = 0.0
                P.eliminate_zeros()
                after = np.asarray(P.sum(axis=1)).ravel()
                # renormalize only rows that actually lost mass, so that
                # loading an already-clean kernel is bit-lossless
                dropped = (after > 0) & (after != before)
                if dropped.any():
                    scale = np.ones(num_states)
                    scale[dropped] = before[dropped] / after[dropped]
                    P = sparse.diags(scale) @ P
                P = P.tocsr()
                P.sort_indices()
            else:
                P = sparse.csr_matrix((num_states, num_states))
            slab.append(P)
        kernels.append(slab)
    return kernels


@dataclass
class Policy:
    """Deterministic Markovian policy: action_at[h, s] is the chosen action index."""

    action_at: np.ndarray  # (H, S) int

    def __post_init__(self):
        self.action_at = np.asarray(self.action_at)

    def action(self, s: int, h: int) -> int:
        return int(self.action_at[h, s])

    def check_admissible(self, model: MissionModel):
        H, S = self.action_at.shape
        for h in range(H):
            ok = model.action_mask[h, np.arange(S), self.action_at[h]]
            if not ok.all():
                s = int(np.flatnonzero(~ok)[0])
                raise ModelError(
                    f"policy selects inadmissible action {self.action_at[h, s]} at (s={s}, h={h})"
                )
        return self


@dataclass
class ValueFunction:
    """Value surface values[h, s] for h in 0..H (terminal slice included)."""

    values: np.ndarray  # (H+1, S)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def at(self, s: int, h: int) -> float:
        return float(self.values[h, s])

    def at_initial(self, initial_dist: np.ndarray) -> float:
        return float(self.values[0] @ initial_dist)


@dataclass
class RolloutBatch:
    """Seeded Monte Carlo trajectories through a model under a fixed policy."""

    seed: int
    states: np.ndarray  # (n, H+1) int
    actions: np.ndarray  # (n, H) int
    rewards: np.ndarray  # (n, H) float

    @property
    def n(self) -> int:
        return self.states.shape[0]

    def total_rewards(self) -> np.ndarray:
        return self.rewards.sum(axis=1)
