"""Command-line front end.

Subcommands: spectrum, surface, gains, trace, rollout, train, evaluate,
sweep.  Each accepts --config (JSON), --seed and --out; config keys can be
overridden with HYDROLINK_<SECTION>__<FIELD> environment variables.  On
failure a machine-readable JSON error line goes to stderr and the exit
code is nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys

import numpy as np

from . import bench
from .bench import (
    ActorPolicy,
    NoAlignmentPolicy,
    StraightFacingPolicy,
    UpperBoundPolicy,
    atomic_write_text,
    fmt_float,
)
from .config import (
    apply_env_overrides,
    env_config_from_dict,
    hyperparams_from_dict,
    load_config,
    scenario_from_dict,
    screen_from_dict,
    spectrum_from_dict,
    grid_from_dict,
)
from .ddpg import DdpgAgent, train
from .ray_tracer import find_beam_direction
from .rl_env import WaterAirEnv
from .sea_surface import height_grid, synthesize
from .wave_spectrum import jonswap_3d, peak_frequency


class CliError(Exception):
    pass


def _load_cfg(args) -> dict:
    cfg = load_config(args.config) if args.config else {}
    return apply_env_overrides(cfg)


def _out_path(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _write_csv(path, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(fmt_float(v) if isinstance(v, float) else str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def cmd_spectrum(args):
    cfg = _load_cfg(args)
    params = spectrum_from_dict(cfg.get("spectrum"))
    grid = grid_from_dict(cfg.get("grid"), params)
    rows = []
    for om in grid.omega_centers:
        for th in grid.theta_centers:
            rows.append((float(om), float(th), float(jonswap_3d(om, th, params))))
    _write_csv(_out_path(args, "spectrum.csv"), "omega,theta,density", rows)
    print(
        json.dumps(
            {"peak_frequency": peak_frequency(params), "rows": len(rows)}, sort_keys=True
        )
    )
    return 0


def cmd_surface(args):
    cfg = _load_cfg(args)
    params = spectrum_from_dict(cfg.get("spectrum"))
    grid = grid_from_dict(cfg.get("grid"), params)
    surf = synthesize(params, grid, seed=args.seed, amplitude_factor=args.amplitude_factor)
    x = np.linspace(0.0, args.extent, args.nx)
    y = np.linspace(0.0, args.extent, args.ny)
    t = np.linspace(0.0, args.duration, args.nt)
    cube = height_grid(surf, x, y, t)
    rows = []
    for i in range(args.nx):
        for j in range(args.ny):
            for k in range(args.nt):
                rows.append((float(x[i]), float(y[j]), float(t[k]), float(cube[i, j, k])))
    _write_csv(_out_path(args, "surface.csv"), "x,y,t,z", rows)
    summary = {
        "variance": float(np.var(cube)),
        "half_energy": 0.5 * float(np.sum(surf.amplitude**2)),
        "amplitude_sum": surf.amplitude_sum,
        "n_components": surf.n_components,
        "seed": args.seed,
    }
    atomic_write_text(
        _out_path(args, "surface_summary.json"), json.dumps(summary, indent=2, sort_keys=True)
    )
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_gains(args):
    from .optics import arrival_gain, departure_gain, fresnel_transmittance, path_gain

    cfg = _load_cfg(args)
    scn = scenario_from_dict(cfg.get("scenario"))
    rows = []
    for a in np.linspace(0.0, math.pi / 2, args.points):
        rows.append(("departure", float(a), float(departure_gain(a, scn))))
        rows.append(("arrival", float(a), float(arrival_gain(a, scn))))
    for th in np.linspace(0.0, math.pi / 2 - 1e-9, args.points):
        rows.append(("fresnel", float(th), float(fresnel_transmittance(th, scn.n_water, scn.n_air))))
    for d in np.linspace(0.5, 50.0, args.points):
        rows.append(("path", float(d), float(path_gain(d / 2, d / 2, scn))))
    _write_csv(_out_path(args, "gains.csv"), "factor,x,value", rows)
    print(json.dumps({"rows": len(rows)}, sort_keys=True))
    return 0


def cmd_trace(args):
    cfg = _load_cfg(args)
    params = spectrum_from_dict(cfg.get("spectrum"))
    grid = grid_from_dict(cfg.get("grid"), params)
    scn = scenario_from_dict(cfg.get("scenario"))
    screen = screen_from_dict(cfg.get("screen"))
    surf = synthesize(params, grid, seed=args.seed)
    res = find_beam_direction(surf, scn, args.time, screen)
    out = {
        "direction_local": list(map(float, res.direction_local)),
        "direction_abs": list(map(float, res.direction_abs)),
        "refraction_point": list(map(float, res.refraction_point)),
        "intensity": res.intensity,
        "converged": res.converged,
        "iterations": res.iterations,
    }
    print(json.dumps(out, sort_keys=True))
    if args.dump_grids:
        _dump_iteration_grids(args, surf, scn, screen)
    return 0


def _dump_iteration_grids(args, surf, scn, screen):
    # re-run the refinement loop, recording every pixel of every iteration
    from .ray_tracer import AllDark, centroid, rotation_zxz, trace_rays

    rot = rotation_zxz(*scn.rx_euler)
    pitch = 2.0 * screen.z_c * math.tan(screen.fov / 2.0) / screen.m
    center = np.zeros(2)
    offsets = np.arange(screen.m) - (screen.m - 1) / 2.0
    rows = []
    for it in range(screen.max_iters):
        xs = center[0] + offsets * pitch
        ys = center[1] + offsets * pitch
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        local = np.stack([gx.ravel(), gy.ravel(), np.full(screen.m**2, screen.z_c)], axis=1)
        local /= np.linalg.norm(local, axis=1, keepdims=True)
        intensity, _, _ = trace_rays(local @ rot.T, surf, scn, args.time, screen)
        grid_i = intensity.reshape(screen.m, screen.m)
        for i in range(screen.m):
            for j in range(screen.m):
                rows.append((it, float(xs[i]), float(ys[j]), float(grid_i[i, j])))
        try:
            xc, yc = centroid(grid_i, xs, ys)
        except AllDark:
            break
        center = np.array([xc, yc])
        pitch /= screen.refine_factor
    _write_csv(_out_path(args, "trace_grids.csv"), "iteration,x,y,intensity", rows)


def _build_policies(names, args, env_config):
    policies = []
    for name in names:
        if name == "ub":
            policies.append(UpperBoundPolicy())
        elif name == "straight":
            policies.append(StraightFacingPolicy())
        elif name == "none":
            policies.append(NoAlignmentPolicy())
        elif name == "actor":
            if not args.actor_file:
                raise CliError("--actor-file required for the actor policy")
            policies.append(ActorPolicy(DdpgAgent.load(args.actor_file)))
        else:
            raise CliError(f"unknown policy {name!r}")
    return policies


def cmd_rollout(args):
    cfg = _load_cfg(args)
    env_config = env_config_from_dict(cfg)
    policies = _build_policies([args.policy], args, env_config)
    env = WaterAirEnv(env_config)
    env.reset(seed=args.seed)
    policy = policies[0]
    policy.begin_episode(env)
    rows = []
    done = False
    step = 0
    while not done:
        action = policy.act(env)
        obs, rew, done, state = env.step(action)
        rows.append(
            (
                step,
                state.t,
                *map(float, obs.tx_dir),
                *map(float, obs.rx_dir),
                obs.intensity,
                rew,
                int(done),
            )
        )
        step += 1
    _write_csv(
        _out_path(args, "rollout.csv"),
        "step,t,tx_x,tx_y,tx_z,rx_x,rx_y,rx_z,intensity,reward,done",
        rows,
    )
    gains = [r[8] for r in rows]
    print(json.dumps({"steps": len(rows), "avg_gain": float(np.mean(gains))}, sort_keys=True))
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    env_config = env_config_from_dict(cfg)
    hp = hyperparams_from_dict(cfg.get("train"))
    if args.episodes is not None:
        hp = dataclasses.replace(hp, max_episodes=args.episodes)
    if args.steps is not None:
        hp = dataclasses.replace(hp, max_steps=args.steps)
    hp = dataclasses.replace(hp, seed=args.seed)
    env_config = dataclasses.replace(
        env_config, max_steps=hp.max_steps, episode_seed_policy="incrementing"
    )
    env = WaterAirEnv(env_config, base_seed=args.seed)
    agent, log = train(env, hp)
    agent.save(_out_path(args, "agent.bin"))
    _write_csv(
        _out_path(args, "training_log.csv"),
        "episode,return,steps,wall_ms",
        [(r.episode, r.ret, r.steps, r.wall_ms) for r in log],
    )
    print(
        json.dumps(
            {
                "episodes": len(log),
                "final_return": log[-1].ret if log else None,
                "agent_file": _out_path(args, "agent.bin"),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_evaluate(args):
    cfg = _load_cfg(args)
    env_config = env_config_from_dict(cfg)
    if args.steps is not None:
        env_config = dataclasses.replace(env_config, max_steps=args.steps)
    policies = _build_policies(args.policies.split(","), args, env_config)
    seeds = [args.seed + k for k in range(args.episodes)]
    report = bench.evaluate(policies, env_config, args.episodes, seeds)
    report.write_json(_out_path(args, "report.json"))
    report.write_csv(_out_path(args, "report.csv"))
    print(json.dumps({"avg_gain": report.avg_gain, "sigma_diff_sq": report.sigma_diff_sq}, sort_keys=True))
    return 0


def cmd_sweep(args):
    cfg = _load_cfg(args)
    env_config = env_config_from_dict(cfg)
    if args.steps is not None:
        env_config = dataclasses.replace(env_config, max_steps=args.steps)
    offsets = [float(x) for x in args.offsets.split(",")]
    policies = _build_policies(args.policies.split(","), args, env_config)
    seeds = [args.seed + k for k in range(args.episodes)]
    results = bench.offset_sweep(env_config, offsets, policies, args.episodes, seeds)
    bench.sweep_to_csv(results, _out_path(args, "sweep.csv"))
    summary = {
        f"{off:g}": {name: r.avg_gain[name] for name in r.policies} for off, r in results
    }
    atomic_write_text(
        _out_path(args, "sweep_summary.json"), json.dumps(summary, indent=2, sort_keys=True)
    )
    print(json.dumps(summary, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrolink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("spectrum", help="directional spectrum CSV")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("surface", help="height-field CSV and summary stats")
    common(p)
    p.add_argument("--nx", type=int, default=20)
    p.add_argument("--ny", type=int, default=20)
    p.add_argument("--nt", type=int, default=10)
    p.add_argument("--extent", type=float, default=100.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--amplitude-factor", type=float, default=1.0)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("gains", help="factor-by-factor gain sweeps")
    common(p)
    p.add_argument("--points", type=int, default=200)
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("trace", help="beam direction for one snapshot")
    common(p)
    p.add_argument("--time", type=float, default=0.0)
    p.add_argument("--dump-grids", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("rollout", help="scripted-policy episode CSV")
    common(p)
    p.add_argument("--policy", default="straight", help="none|straight|ub|actor")
    p.add_argument("--actor-file")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("train", help="train the alignment agent")
    common(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--steps", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="seed-matched policy comparison")
    common(p)
    p.add_argument("--episodes", type=int, default=4)
    p.add_argument("--steps", type=int)
    p.add_argument("--policies", default="ub,straight,none")
    p.add_argument("--actor-file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="offset sweep of evaluate")
    common(p)
    p.add_argument("--episodes", type=int, default=2)
    p.add_argument("--steps", type=int)
    p.add_argument("--offsets", default="0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")
    p.add_argument("--policies", default="ub,straight,none")
    p.add_argument("--actor-file")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
