"""Self-describing text interchange format for explicit mission models.

Layout (line-oriented, whitespace-delimited, '#' comments allowed):

    %orbitplan-mdp 1
    [dimensions]
    num_states N ; num_actions A ; horizon H ; step_seconds T ; epoch ISO
    [kernel]      one "h s a s' p" line per stored transition
    [reward]      one "h s a r" line per nonzero reward entry
    [mask]        one "h s a" line per admissible (state, action, step)
    [initial]     one "s p" line per nonzero initial-state probability

Floats are written with 17 significant digits, so load(save(m)) is lossless.
"""

from __future__ import annotations

from datetime import datetime

import numpy as np

from .model import MissionModel, ModelError, TimeGrid, kernel_from_triplets

MAGIC = "%orbitplan-mdp"
VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_model(model: MissionModel, path):
    H, S, A = model.horizon, model.num_states, model.num_actions
    lines = [f"{MAGIC} {VERSION}", "[dimensions]"]
    lines.append(f"num_states {S}")
    lines.append(f"num_actions {A}")
    lines.append(f"horizon {H}")
    lines.append(f"step_seconds {_fmt(model.time.step_seconds)}")
    lines.append(f"epoch {model.time.epoch.isoformat()}")
    lines.append("[kernel]")
    for h in range(H):
        for a in range(A):
            P = model.kernels[h][a].tocoo()
            for s, s2, p in zip(P.row, P.col, P.data):
                lines.append(f"{h} {s} {a} {s2} {_fmt(p)}")
    lines.append("[reward]")
    for h, s, a in zip(*np.nonzero(model.reward)):
        lines.append(f"{h} {s} {a} {_fmt(model.reward[h, s, a])}")
    lines.append("[mask]")
    for h, s, a in zip(*np.nonzero(model.action_mask)):
        lines.append(f"{h} {s} {a}")
    lines.append("[initial]")
    for s in np.flatnonzero(model.initial_dist):
        lines.append(f"{s} {_fmt(model.initial_dist[s])}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MissionModel:
    sections = {"dimensions": [], "kernel": [], "reward": [], "mask": [], "initial": []}
    section = None
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != MAGIC or int(first[1]) != VERSION:
            raise ModelError(f"{path}: not a version-{VERSION} model interchange file")
        for lineno, raw in enumerate(fh, start=2):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("["):
                name = line.strip("[]")
                if name not in sections:
                    raise ModelError(f"{path}:{lineno}: unknown section {name!r}")
                section = name
                continue
            if section is None:
                raise ModelError(f"{path}:{lineno}: content before any section")
            sections[section].append((lineno, line.split()))

    dims = {}
    for lineno, toks in sections["dimensions"]:
        if len(toks) != 2:
            raise ModelError(f"{path}:{lineno}: malformed dimension entry")
        dims[toks[0]] = toks[1]
    try:
        S = int(dims["num_states"])
        A = int(dims["num_actions"])
        H = int(dims["horizon"])
        time = TimeGrid(H, float(dims["step_seconds"]), datetime.fromisoformat(dims["epoch"]))
    except KeyError as exc:
        raise ModelError(f"{path}: missing dimension {exc}") from exc

    triplets = []
    for lineno, toks in sections["kernel"]:
        if len(toks) != 5:
            raise ModelError(f"{path}:{lineno}: kernel entry needs 'h s a s2 p'")
        h, s, a, s2 = map(int, toks[:4])
        triplets.append((h, s, a, s2, float(toks[4])))
    reward = np.zeros((H, S, A))
    for lineno, toks in sections["reward"]:
        if len(toks) != 4:
            raise ModelError(f"{path}:{lineno}: reward entry needs 'h s a r'")
        reward[int(toks[0]), int(toks[1]), int(toks[2])] = float(toks[3])
    mask = np.zeros((H, S, A), dtype=bool)
    for lineno, toks in sections["mask"]:
        if len(toks) != 3:
            raise ModelError(f"{path}:{lineno}: mask entry needs 'h s a'")
        mask[int(toks[0]), int(toks[1]), int(toks[2])] = True
    initial = np.zeros(S)
    for lineno, toks in sections["initial"]:
        if len(toks) != 2:
            raise ModelError(f"{path}:{lineno}: initial entry needs 's p'")
        initial[int(toks[0])] = float(toks[1])

    model = MissionModel(
        num_states=S,
        num_actions=A,
        time=time,
        kernels=kernel_from_triplets(S, A, H, triplets),
        reward=reward,
        initial_dist=initial,
        action_mask=mask,
    )
    return model.validate()
