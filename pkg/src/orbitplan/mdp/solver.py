"""Backward-induction solving, policy evaluation, propagation and simulation."""

from __future__ import annotations

import itertools

import numpy as np

from .model import MissionModel, ModelError, Policy, RolloutBatch, ValueFunction

NEG_INF = -np.inf


def _terminal_values(model: MissionModel, terminal) -> np.ndarray:
    """Resolve the terminal rule into a finite (S,) vector; default all-zero."""
    S = model.num_states
    if terminal is None:
        v = np.zeros(S)
    elif callable(terminal):
        v = np.asarray([terminal(s) for s in range(S)], dtype=float)
    else:
        v = np.asarray(terminal, dtype=float)
        if v.shape == ():
            v = np.full(S, float(v))
    if v.shape != (S,) or not np.all(np.isfinite(v)):
        raise ModelError("terminal rule must assign a finite value to every state")
    return v


def _q_values(model: MissionModel, h: int, v_next: np.ndarray) -> np.ndarray:
    """Q[s, a] = R(s,a,h) + sum_s' T(s'|s,a,h) v_next(s'), -inf where masked."""
    S, A = model.num_states, model.num_actions
    q = np.full((S, A), NEG_INF)
    for a in range(A):
        rows = model.action_mask[h, :, a]
        if not rows.any():
            continue
        expect = model.kernels[h][a] @ v_next
        q[rows, a] = model.reward[h, rows, a] + expect[rows]
    return q


def solve_backward(model: MissionModel, terminal=None):
    """Solve the Bellman recursion backwards in time.

    Returns (ValueFunction, Policy). Ties in the argmax break toward the
    lowest action index, which keeps results reproducible.
    """
    model.validate()
    H, S = model.horizon, model.num_states
    values = np.empty((H + 1, S))
    actions = np.empty((H, S), dtype=np.int64)
    values[H] = _terminal_values(model, terminal)
    for h in range(H - 1, -1, -1):
        q = _q_values(model, h, values[h + 1])
        actions[h] = np.argmax(q, axis=1)  # first maximizer = lowest index
        values[h] = q[np.arange(S), actions[h]]
    return ValueFunction(values), Policy(actions)


def evaluate_policy(model: MissionModel, policy: Policy, terminal=None) -> ValueFunction:
    """Fixed-policy Bellman values V^pi(s, h) (the recursion without the max)."""
    model.validate()
    policy.check_admissible(model)
    H, S = model.horizon, model.num_states
    values = np.empty((H + 1, S))
    values[H] = _terminal_values(model, terminal)
    idx = np.arange(S)
    for h in range(H - 1, -1, -1):
        q = _q_values(model, h, values[h + 1])
        values[h] = q[idx, policy.action_at[h]]
    return ValueFunction(values)


def forward_distribution(model: MissionModel, policy: Policy) -> np.ndarray:
    """State occupation vectors p[h] for h = 0..H under the given policy."""
    model.validate()
    policy.check_admissible(model)
    H, S, A = model.horizon, model.num_states, model.num_actions
    p = np.zeros((H + 1, S))
    p[0] = model.initial_dist
    for h in range(H):
        nxt = np.zeros(S)
        for a in range(A):
            sel = policy.action_at[h] == a
            if not sel.any():
                continue
            mass = np.where(sel, p[h], 0.0)
            nxt += model.kernels[h][a].T @ mass
        p[h + 1] = nxt
    return p


def simulate(model: MissionModel, policy: Policy, seed: int, n: int) -> RolloutBatch:
    """Sample n seeded trajectories under the policy.

    Successor draws use inverse-CDF sampling over each sparse successor list
    in stored (state-index) order; each trajectory gets its own stream spawned
    from the batch seed, so batches are reproducible and partitionable.
    """
    if n < 1:
        raise ValueError("need at least one trajectory")
    model.validate()
    policy.check_admissible(model)
    H = model.horizon
    states = np.empty((n, H + 1), dtype=np.int64)
    actions = np.empty((n, H), dtype=np.int64)
    rewards = np.empty((n, H))
    root = np.random.SeedSequence(seed)
    for i, ss in enumerate(root.spawn(n)):
        rng = np.random.Generator(np.random.PCG64(ss))
        s = int(rng.choice(model.num_states, p=model.initial_dist))
        states[i, 0] = s
        for h in range(H):
            a = policy.action(s, h)
            idx, probs = model.successors(s, a, h)
            u = rng.random()
            j = int(np.searchsorted(np.cumsum(probs), u, side="right"))
            j = min(j, len(idx) - 1)
            rewards[i, h] = model.reward[h, s, a]
            actions[i, h] = a
            s = int(idx[j])
            states[i, h + 1] = s
    return RolloutBatch(seed=seed, states=states, actions=actions, rewards=rewards)


ORACLE_GUARD = 10**7


def oracle_enumerate(model: MissionModel, terminal=None) -> float:
    """Exact optimum at the initial distribution by brute-force policy search.

    Enumerates every deterministic Markov policy and evaluates each one by
    exact forward propagation of the state distribution. Test oracle only;
    refuses instances with more than ORACLE_GUARD policies.
    """
    model.validate()
    H, S, A = model.horizon, model.num_states, model.num_actions
    choices = [np.flatnonzero(model.action_mask[h, s]) for h in range(H) for s in range(S)]
    count = 1.0
    for c in choices:
        count *= len(c)
    if count > ORACLE_GUARD:
        raise ValueError(f"instance has {count:.3g} policies, above guard {ORACLE_GUARD}")
    v_term = _terminal_values(model, terminal)
    best = NEG_INF
    for flat in itertools.product(*choices):
        plan = np.asarray(flat, dtype=np.int64).reshape(H, S)
        p = model.initial_dist.copy()
        total = 0.0
        for h in range(H):
            total += float(p @ model.reward[h, np.arange(S), plan[h]])
            nxt = np.zeros(S)
            for s in np.flatnonzero(p):
                idx, probs = model.successors(s, int(plan[h, s]), h)
                nxt[idx] += p[s] * probs
            p = nxt
        total += float(p @ v_term)
        best = max(best, total)
    return best
