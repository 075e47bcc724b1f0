"""Shared fixtures and model-construction helpers for the test suite."""

from pathlib import Path

import numpy as np
import pytest

from orbitplan.config import RunConfig
from orbitplan.domain.build import assemble_model
from orbitplan.mdp.model import MissionModel, TimeGrid, kernel_from_triplets

REPO_ROOT = Path(__file__).resolve().parent.parent
TOY_CONFIG = REPO_ROOT / "configs" / "toy.yaml"
PAPER_CONFIG = REPO_ROOT / "configs" / "paper.yaml"


def make_model(S, A, H, triplets, reward, mask, initial=None, step_seconds=60.0):
    """Assemble and validate an explicit model from raw pieces."""
    if initial is None:
        initial = np.zeros(S)
        initial[0] = 1.0
    return MissionModel(
        num_states=S, num_actions=A, time=TimeGrid(H, step_seconds),
        kernels=kernel_from_triplets(S, A, H, triplets),
        reward=np.asarray(reward, dtype=float),
        initial_dist=np.asarray(initial, dtype=float),
        action_mask=np.asarray(mask, dtype=bool),
    ).validate()


def fig1_model():
    """Two-state chain: action 0 stays put, action 1 from s1 reaches s2
    with probability 0.75; being in s2 earns reward 1 per step."""
    S, A, H = 2, 2, 2
    triplets = []
    for h in range(H):
        triplets += [(h, 0, 0, 0, 1.0), (h, 1, 0, 1, 1.0)]
        triplets += [(h, 0, 1, 1, 0.75), (h, 0, 1, 0, 0.25), (h, 1, 1, 1, 1.0)]
    reward = np.zeros((H, S, A))
    reward[:, 1, :] = 1.0
    mask = np.ones((H, S, A), dtype=bool)
    return make_model(S, A, H, triplets, reward, mask)


def random_model(rng, S, A, H, mask_prob=0.25, sparsity=0.0):
    """Random valid explicit MDP; actions are masked off with mask_prob but
    action 0 always stays admissible."""
    mask = rng.random((H, S, A)) > mask_prob
    mask[:, :, 0] = True
    triplets = []
    for h in range(H):
        for s in range(S):
            for a in range(A):
                if not mask[h, s, a]:
                    continue
                row = rng.random(S) + 1e-3
                if sparsity:
                    keep = rng.random(S) > sparsity
                    keep[rng.integers(S)] = True
                    row = row * keep
                row = row / row.sum()
                triplets += [(h, s, a, s2, float(p))
                             for s2, p in enumerate(row) if p > 0]
    reward = rng.normal(size=(H, S, A))
    initial = rng.random(S) + 1e-3
    initial /= initial.sum()
    return make_model(S, A, H, triplets, reward, mask, initial)


def policy_count(model):
    """Number of deterministic Markov policies of an explicit model."""
    count = 1
    for h in range(model.horizon):
        for s in range(model.num_states):
            count *= int(model.action_mask[h, s].sum())
    return count


def random_admissible_policy(rng, model):
    from orbitplan.mdp.model import Policy
    H, S = model.horizon, model.num_states
    acts = np.zeros((H, S), dtype=np.int64)
    for h in range(H):
        for s in range(S):
            acts[h, s] = rng.choice(np.flatnonzero(model.action_mask[h, s]))
    return Policy(acts)


def enumerate_paths(model, policy, terminal=None):
    """Exact expected cumulative reward by explicit path enumeration."""
    H, S = model.horizon, model.num_states
    v_term = np.zeros(S) if terminal is None else np.asarray(terminal, float)
    total = 0.0
    stack = [(s, 0, float(p), 0.0)
             for s, p in enumerate(model.initial_dist) if p > 0]
    while stack:
        s, h, prob, acc = stack.pop()
        if h == H:
            total += prob * (acc + v_term[s])
            continue
        a = policy.action(s, h)
        acc += model.reward[h, s, a]
        idx, probs = model.successors(s, a, h)
        for s2, p in zip(idx, probs):
            stack.append((int(s2), h + 1, prob * p, acc))
    return total


def enumerate_avoid_probability(model, policy, unsafe):
    """Exact Pr(always avoid the unsafe set) by path enumeration."""
    unsafe = np.asarray(unsafe, dtype=bool)
    H = model.horizon
    total = 0.0
    stack = [(s, 0, float(p)) for s, p in enumerate(model.initial_dist) if p > 0]
    while stack:
        s, h, prob = stack.pop()
        if unsafe[s]:
            continue
        if h == H:
            total += prob
            continue
        idx, probs = model.successors(s, policy.action(s, h), h)
        for s2, p in zip(idx, probs):
            stack.append((int(s2), h + 1, prob * p))
    return total


@pytest.fixture(scope="session")
def toy_config():
    return RunConfig.load(TOY_CONFIG)


@pytest.fixture(scope="session")
def toy_context(toy_config):
    return toy_config.build_context("stoch")


@pytest.fixture(scope="session")
def toy_factored(toy_context):
    return assemble_model(toy_context)


@pytest.fixture(scope="session")
def toy_explicit(toy_factored):
    return toy_factored.to_explicit()
