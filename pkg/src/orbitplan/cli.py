"""Command-line frontend: build, solve, verify, simulate, replan, resonances.

Every run writes its result tables plus a manifest.json recording the
config hash, per-phase wall-clock timings and model statistics. Output
tables are delimited text with a header row and 17-significant-digit
numbers, so identical config + seed reproduces them byte for byte.
"""

from __future__ import annotations

import json
import sys
import time as _time
from datetime import datetime
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ConfigError, RunConfig
from .domain.build import assemble_model
from .domain.fastpath import simulate_fast, solve_backward_fast
from .domain.grids import DomainError, DomainState
from .mdp.model import ModelError
from .mdp.interchange import save_model
from .resonance import resonance_altitudes
from .verify import replan_from_state, rollout_envelopes, verify_policy

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

EXPLICIT_EXPORT_LIMIT = 20000


def _fmt(x) -> str:
    return format(float(x), ".17g")


class PhaseTimer:
    def __init__(self):
        self.timings = {}

    def run(self, name, fn, *args, **kwargs):
        t0 = _time.perf_counter()
        out = fn(*args, **kwargs)
        self.timings[name] = _time.perf_counter() - t0
        return out


def _write_manifest(out_dir: Path, cfg: RunConfig, command: str, timer: PhaseTimer,
                    stats=None, extra=None):
    manifest = {
        "tool": "orbitplan",
        "version": __version__,
        "command": command,
        "config_hash": cfg.config_hash,
        "model_stats": stats,
        "timings_seconds": {k: round(v, 6) for k, v in timer.timings.items()},
    }
    if extra:
        manifest.update(extra)
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_table(path: Path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                cell if isinstance(cell, str) else _fmt(cell) for cell in row) + "\n")


def _guarded(fn):
    """Map error classes onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (DomainError, ModelError) as exc:
            click.echo(f"internal inconsistency: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _prepare(config_path, out, mode):
    cfg = RunConfig.load(config_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timer = PhaseTimer()
    ctx = timer.run("configure", cfg.build_context, mode)
    return cfg, out_dir, timer, ctx


def _nominal_trajectory(model, solution):
    """Modal-path rollout: follow the highest-probability successor."""
    ctx = model.ctx
    st = model.initial_state
    rows = []
    raises_km = ctx.action_set.raise_km(ctx.alt_grid)
    for h in range(model.horizon + 1):
        rows.append((h, ctx.time.date_at(h).isoformat(),
                     ctx.alt_grid.lo if st.deorbited else ctx.alt_grid.center(st.alt_bin),
                     ctx.fuel_grid.center(st.fuel_bin),
                     "-" if h == model.horizon else str(solution.action(st, h)),
                     0.0 if h == model.horizon or st.deorbited
                     else raises_km[solution.action(st, h)],
                     int(st.deorbited)))
        if h == model.horizon:
            break
        a = solution.action(st, h)
        P = model.alt_kernels[h][a]
        row = P.getrow(st.alt_bin)
        nxt = int(row.indices[np.argmax(row.data)])
        if st.deorbited or nxt == ctx.alt_grid.n_bins:
            st = DomainState(0, st.fuel_bin, st.cooldown, deorbited=True)
            continue
        fuel = st.fuel_bin - int(model.cost_bins[a, st.alt_bin]) if a else st.fuel_bin
        cool = 0 if a else min(st.cooldown + 1, ctx.cooldown_steps)
        st = DomainState(nxt, fuel, cool)
    return rows


common_options = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=False), help="run configuration YAML"),
    click.option("--out", required=True, type=click.Path(), help="output directory"),
    click.option("--mode", type=click.Choice(["det", "stoch"]), default="stoch",
                 show_default=True, help="deterministic or stochastic transitions"),
]


def _with_common(fn):
    for opt in reversed(common_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Maneuver-policy synthesis and reach-avoid verification."""


@main.command()
@_with_common
@_guarded
def build(config_path, out, mode):
    """Assemble the mission MDP and write its statistics and model file."""
    cfg, out_dir, timer, ctx = _prepare(config_path, out, mode)
    model = timer.run("build", assemble_model, ctx)
    stats = model.stats()
    if model.num_states <= EXPLICIT_EXPORT_LIMIT:
        explicit = timer.run("export", model.to_explicit)
        save_model(explicit, out_dir / "model.mdp")
        stats["model_file"] = "model.mdp"
    else:
        timer.run("export", _export_factored, model, out_dir / "model.npz")
        stats["model_file"] = "model.npz"
    with open(out_dir / "stats.txt", "w") as fh:
        for k in sorted(stats):
            fh.write(f"{k} {stats[k]}\n")
    _write_manifest(out_dir, cfg, "build", timer, stats, {"mode": mode})
    click.echo(f"states {stats['num_states']} actions {stats['num_actions']} "
               f"kernel_nnz {stats['altitude_kernel_nnz']}")


def _export_factored(model, path):
    arrays = {
        "reward_alt": model.reward_alt,
        "cost_bins": model.cost_bins,
        "raise_bins": model.raise_bins,
        "alt_ok": model.alt_ok,
    }
    for h, slab in enumerate(model.alt_kernels):
        for a, P in enumerate(slab):
            arrays[f"k{h}_{a}_data"] = P.data
            arrays[f"k{h}_{a}_indices"] = P.indices
            arrays[f"k{h}_{a}_indptr"] = P.indptr
    np.savez_compressed(path, **arrays)


def _solve_pipeline(cfg, out_dir, timer, ctx):
    model = timer.run("build", assemble_model, ctx)
    solution = timer.run("solve", solve_backward_fast, model)
    return model, solution


@main.command()
@_with_common
@_guarded
def solve(config_path, out, mode):
    """Synthesize the optimal maneuver policy and write policy/value files."""
    cfg, out_dir, timer, ctx = _prepare(config_path, out, mode)
    model, solution = _solve_pipeline(cfg, out_dir, timer, ctx)
    np.savez_compressed(out_dir / "policy.npz", policy=solution.policy,
                        value0=solution.value0,
                        config_hash=np.array(cfg.config_hash))
    v0 = solution.value_at_initial()
    with open(out_dir / "values.txt", "w") as fh:
        fh.write(f"value_at_initial {_fmt(v0)}\n")
        init = model.initial_state
        fh.write(f"initial_state alt_bin={init.alt_bin} fuel_bin={init.fuel_bin} "
                 f"cooldown={init.cooldown}\n")
    rows = timer.run("trajectory", _nominal_trajectory, model, solution)
    _write_table(out_dir / "trajectory.csv",
                 ["step", "date", "alt_km", "fuel_kg", "action", "raise_km", "deorbited"],
                 rows)
    _write_manifest(out_dir, cfg, "solve", timer, model.stats(), {"mode": mode})
    click.echo(f"value at initial state: {v0:.6f}")


@main.command()
@_with_common
@click.option("--safety-mode", type=click.Choice(["policy", "max"]), default="policy",
              show_default=True, help="verify the synthesized policy or the most-safe one")
@_guarded
def verify(config_path, out, mode, safety_mode):
    """Verify the reach-avoid chance constraint for the synthesized policy."""
    cfg, out_dir, timer, ctx = _prepare(config_path, out, mode)
    model, solution = _solve_pipeline(cfg, out_dir, timer, ctx)
    spec = cfg.safety_spec()
    result = timer.run("verify", verify_policy, model, solution.policy, spec,
                       safety_mode)
    centers = ctx.alt_grid.centers()
    _write_table(out_dir / "final_distribution.csv", ["alt_km", "pmf", "cdf"],
                 [(centers[j], result.final_alt_pmf[j], result.final_alt_cdf[j])
                  for j in range(len(centers))])
    _write_table(out_dir / "violation_curve.csv", ["step", "pr_violated_by_step"],
                 list(enumerate(result.violation_curve)))
    with open(out_dir / "report.txt", "w") as fh:
        fh.write(f"safety_mode {result.mode}\n")
        fh.write(f"delta {_fmt(result.delta)}\n")
        fh.write(f"safety_value_at_initial {_fmt(result.safety_value_at_initial)}\n")
        fh.write(f"feasible {int(result.feasible)}\n")
        fh.write(f"margin {_fmt(result.margin)}\n")
        fh.write(f"deorbit_probability {_fmt(result.final_alt_pmf[-1])}\n")
        fh.write(f"final_alt_p05_km {_fmt(result.final_altitude_quantile(0.05, centers))}\n")
        for clause, status in result.clauses.items():
            fh.write(f"clause_{clause} {status}\n")
    _write_manifest(out_dir, cfg, "verify", timer, model.stats(),
                    {"mode": mode, "feasible": bool(result.feasible)})
    click.echo(f"safety value {result.safety_value_at_initial:.6g} "
               f"(1-delta={1 - spec.delta:g}) -> "
               f"{'feasible' if result.feasible else 'INFEASIBLE'}")
    if not result.feasible:
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@_with_common
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--rollouts", type=int, default=10000, show_default=True)
@_guarded
def simulate(config_path, out, mode, seed, rollouts):
    """Monte Carlo rollouts of the synthesized policy; percentile envelopes."""
    cfg, out_dir, timer, ctx = _prepare(config_path, out, mode)
    model, solution = _solve_pipeline(cfg, out_dir, timer, ctx)
    batch = timer.run("simulate", simulate_fast, model, solution.policy, seed, rollouts)
    env = rollout_envelopes(model, batch)
    _write_envelopes(out_dir / "envelopes.csv", ctx, env)
    _write_manifest(out_dir, cfg, "simulate", timer, model.stats(),
                    {"mode": mode, "seed": seed, "rollouts": rollouts})
    click.echo(f"simulated {rollouts} trajectories "
               f"(deorbit fraction {env['deorbit_fraction'][-1]:.4g})")


def _write_envelopes(path, ctx, env):
    header = (["step", "date"]
              + [f"alt_p{int(q * 100):02d}" for q in env["quantiles"]]
              + [f"fuel_p{int(q * 100):02d}" for q in env["quantiles"]]
              + ["min_alt_km", "deorbit_fraction"])
    rows = []
    for t in range(env["altitude_km"].shape[0]):
        h = env["start_step"] + t
        rows.append([h, ctx.time.date_at(h).isoformat(),
                     *env["altitude_km"][t], *env["fuel"][t],
                     env["min_altitude_km"][t], env["deorbit_fraction"][t]])
    _write_table(path, header, rows)


@main.command()
@_with_common
@click.option("--from-state", "from_state", required=True,
              help='current state as "alt_km,fuel,cooldown,date"')
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--rollouts", type=int, default=10000, show_default=True)
@_guarded
def replan(config_path, out, mode, from_state, seed, rollouts):
    """Re-propagate the existing policy from an observed mission state."""
    cfg, out_dir, timer, ctx = _prepare(config_path, out, mode)
    try:
        alt_km_s, fuel_s, cool_s, date_s = from_state.split(",")
        alt_bin = int(ctx.alt_grid.bin(float(alt_km_s)))
        fuel_bin = int(ctx.fuel_grid.bin(float(fuel_s)))
        when = datetime.fromisoformat(date_s)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad --from-state {from_state!r}: {exc}") from exc
    h0 = round((when - ctx.time.epoch).total_seconds() / ctx.time.step_seconds)
    if not (0 <= h0 < ctx.time.horizon_steps):
        raise ConfigError(f"--from-state date maps to step {h0}, outside the horizon")
    if alt_bin < 0 or fuel_bin < 0:
        raise ConfigError("--from-state below the grid floor")
    current = DomainState(alt_bin, fuel_bin, int(cool_s))
    model, solution = _solve_pipeline(cfg, out_dir, timer, ctx)
    result, env, fwd = timer.run(
        "replan", replan_from_state, model, solution.policy, current, h0,
        cfg.safety_spec(), seed, rollouts)
    _write_envelopes(out_dir / "replan_envelopes.csv", ctx, env)
    with open(out_dir / "replan_report.txt", "w") as fh:
        fh.write(f"from_step {h0}\n")
        fh.write(f"from_state alt_bin={alt_bin} fuel_bin={fuel_bin} cooldown={int(cool_s)}\n")
        fh.write(f"conditional_safety_value {_fmt(result.safety_value_at_initial)}\n")
        fh.write(f"feasible {int(result.feasible)}\n")
        fh.write(f"margin {_fmt(result.margin)}\n")
        fh.write(f"min_envelope_altitude_km {_fmt(env['min_altitude_km'].min())}\n")
    _write_manifest(out_dir, cfg, "replan", timer, model.stats(),
                    {"mode": mode, "seed": seed, "rollouts": rollouts,
                     "from_step": h0})
    click.echo(f"conditional safety value {result.safety_value_at_initial:.6g}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@_guarded
def resonances(config_path, out):
    """Compute repeat-ground-track altitudes over the mission grid band."""
    cfg = RunConfig.load(config_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    timer = PhaseTimer()
    raw = cfg.raw
    import math as _math
    table = timer.run(
        "resonances", resonance_altitudes,
        (raw["grids"]["altitude_min_km"], raw["grids"]["altitude_max_km"]),
        raw["reward"]["max_nodal_days"],
        _math.radians(raw["environment"]["inclination_deg"]),
        cfg.build_context("det").body)
    table.write_delimited(out_dir / "resonances.tsv")
    _write_manifest(out_dir, cfg, "resonances", timer,
                    {"entries": len(table.entries)})
    click.echo(f"{len(table.entries)} resonant altitudes written")


if __name__ == "__main__":
    main()
