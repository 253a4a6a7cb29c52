"""Command-line front end.

    quasiflow run <config>          evolve and write trajectory.csv, snapshots, report.txt
    quasiflow verify <suite>        geometry | elliptic | stepper | dynamics | all
    quasiflow linearize <config>    eigenvalue table and stability verdict at an equilibrium

Exit status: 0 success (horizon reached, all checks pass), 2 monitored
breakdown, 1 error or failed checks.  QUASIFLOW_OUTPUT_ROOT overrides the
output root of every command.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import OUTPUT_ROOT_ENV, ExperimentConfig, load_config
from .dynamics import (
    Thresholds,
    Trajectory,
    evolve,
    fit_equilibrium,
    linearize_at,
    ljapunov_trace,
    omega_limit_report,
)
from .errors import ConfigError, QuasiflowError
from .geometry import CircleSpec, Container, EllipseSpec, build_reference_curve
from .hanzawa import reparameterize
from .io import svg_snapshot, trajectory_csv, write_text_atomic
from .models import MsState, make_second_order, ms_state, offset_circle_heights, rough_heights
from .verify import SUITES, format_report, run_suite

EXIT_OK, EXIT_ERROR, EXIT_BREAKDOWN = 0, 1, 2


# --------------------------------------------------------------------------- setup

def container_of(cfg: ExperimentConfig) -> Container:
    return Container(cfg.container_radius, cfg.container_center)


def initial_ms_state(cfg: ExperimentConfig) -> MsState:
    container = container_of(cfg)
    if cfg.reference == "ellipse":
        shape = build_reference_curve(
            EllipseSpec(cfg.semi_axes[0], cfg.semi_axes[1], cfg.center, cfg.angle), container, cfg.nodes)
        fit = fit_equilibrium(shape)
        sigma = build_reference_curve(CircleSpec(fit.radius, tuple(fit.center)), container, cfg.nodes)
        base = reparameterize(shape, sigma).values
    else:
        sigma = build_reference_curve(CircleSpec(cfg.radius, cfg.center), container, cfg.nodes)
        base = np.zeros(cfg.nodes)
    th = sigma.theta
    heights = base + cfg.constant
    for k, amp in cfg.cos_modes.items():
        heights = heights + amp * np.cos(k * th)
    for k, amp in cfg.sin_modes.items():
        heights = heights + amp * np.sin(k * th)
    if cfg.offset is not None:
        cx, cy, r0 = sigma.circle
        heights = heights + offset_circle_heights(sigma, (cx + cfg.offset[0], cy + cfg.offset[1]), r0)
    if cfg.rough_amplitude:
        heights = heights + rough_heights(th, cfg.rough_amplitude, cfg.rough_decay, cfg.seed)
    return ms_state(sigma, heights, container)


def second_order_setup(cfg: ExperimentConfig):
    a0, a2, f1, f2 = cfg.a0, cfg.a2, cfg.f1, cfg.f2
    source = None
    if f1 or f2:
        def source(u, ux):
            return f1 * u + f2 * u * u
    problem = make_second_order(lambda u, ux: a0 + a2 * u * u, source, cfg.mesh, cfg.p, cfg.mu)
    if cfg.cos_modes:
        raise ConfigError("initial.cos", "the Dirichlet problem takes sin modes and a constant only")
    u0 = cfg.constant * np.ones(problem.dim)
    for k, amp in cfg.sin_modes.items():
        u0 = u0 + amp * np.sin(k * np.pi * problem.x)
    return problem, u0


def thresholds_of(cfg: ExperimentConfig) -> Thresholds:
    return Thresholds(cfg.norm_max, cfg.ball_min, cfg.eta_fraction)


# --------------------------------------------------------------------------- commands

def cmd_run(path) -> int:
    cfg = load_config(path)
    outdir = cfg.output_dir()
    if cfg.kind == "ms":
        state = initial_ms_state(cfg)
        traj = evolve(state, cfg.horizon, cfg.dt, cfg.mode, thresholds_of(cfg), p=cfg.p, mu=cfg.mu,
                      window_steps=cfg.steps, record_every=cfg.record_every, q=cfg.q)
    else:
        problem, u0 = second_order_setup(cfg)
        traj = evolve(u0, cfg.horizon, cfg.dt, cfg.mode, thresholds_of(cfg), problem=problem,
                      window_steps=cfg.steps, q=cfg.q)
    write_text_atomic(os.path.join(outdir, "trajectory.csv"), trajectory_csv(traj))
    if cfg.kind == "ms":
        _write_snapshots(outdir, traj, cfg)
    write_text_atomic(os.path.join(outdir, "report.txt"), run_report(cfg, traj))
    print(f"{cfg.name}: {traj.status} at t = {traj.t_last:.6g}" + (f" ({traj.cause})" if traj.cause else ""))
    return EXIT_OK if traj.status == "horizon" else EXIT_BREAKDOWN


def _write_snapshots(outdir, traj: Trajectory, cfg):
    n = len(traj.times)
    if cfg.snapshot_every:
        idx = sorted(set(range(0, n, cfg.snapshot_every)) | {n - 1})
    else:
        idx = sorted({0, n - 1})
    container = container_of(cfg)
    for i in idx:
        svg = svg_snapshot([traj.interface(i)], container, labels=f"t = {traj.times[i]:.6g}")
        write_text_atomic(os.path.join(outdir, f"snapshot_{i:06d}.svg"), svg)


def run_report(cfg: ExperimentConfig, traj: Trajectory) -> str:
    lines = [
        f"run {cfg.name}",
        f"kind            {cfg.kind}",
        f"mode            {cfg.mode}",
        f"p, mu           {cfg.p:g}, {cfg.mu:.6g}",
        f"horizon, dt     {cfg.horizon:g}, {cfg.dt:g}",
        f"status          {traj.status}",
        f"final time      {traj.t_last:.12g}",
        f"samples         {len(traj.times)}",
    ]
    if traj.cause:
        lines.append(f"cause           {traj.cause}")
    for t, what in traj.events:
        lines.append(f"event           t = {t:.12g}: {what}")
    if cfg.kind == "ms" and len(traj.times) > 1:
        lj = ljapunov_trace(traj)
        area = traj.channel("area")
        lines += [
            "",
            "Ljapunov check (perimeter)",
            f"  nonincreasing         {lj.nonincreasing}",
            f"  largest step increase {lj.max_increase:.3e}",
            f"  max |dphi/dt + E|     {lj.consistency:.3e}",
            f"  relative area drift   {np.max(np.abs(area - area[0])) / area[0]:.3e}",
        ]
        om = omega_limit_report(traj, stride=max(1, len(traj.times) // 200))
        lines += ["", "omega-limit", f"  verdict               {om.verdict}"]
        if om.fit is not None:
            lines += [
                f"  limit centre          ({_clean(om.fit.center[0])}, {_clean(om.fit.center[1])})",
                f"  limit radius          {om.fit.radius:.9f}",
                f"  fit residual          {om.fit.residual:.3e}",
            ]
        if om.rate is not None:
            lines += [f"  rate                  {om.rate.rate:.6g}", f"  fit quality           {om.rate.quality:.6f}"]
    elif len(traj.times) > 1:
        x = traj.channel("xgamma_norm")
        lines += ["", f"trace-norm proxy: initial {x[0]:.6e}, final {x[-1]:.6e}"]
    return "\n".join(lines) + "\n"


def _clean(x, digits=9):
    return f"{round(float(x), digits) + 0.0:.{digits}f}"


def cmd_verify(suite, seed=0, output=None) -> int:
    results = run_suite(suite, seed)
    report = format_report(results, seed)
    sys.stdout.write(report)
    root = output or os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        write_text_atomic(os.path.join(root, f"verify_{suite}.txt"), report)
    ok = all(c.passed for checks in results.values() for c in checks)
    return EXIT_OK if ok else EXIT_ERROR


def cmd_linearize(path) -> int:
    cfg = load_config(path)
    if cfg.kind != "ms":
        raise ConfigError("problem.kind", "linearization is implemented for the Mullins-Sekerka flow")
    state = initial_ms_state(cfg)
    rep = linearize_at(state)
    text = linearization_report(cfg, rep)
    write_text_atomic(os.path.join(cfg.output_dir(), "linearization.txt"), text)
    sys.stdout.write(text)
    return EXIT_OK


def linearization_report(cfg, rep) -> str:
    lines = [
        f"linearization {cfg.name}",
        f"equilibrium residual  {rep.residual:.3e}",
        f"retained modes        0..{rep.modes}",
        f"kernel dimension      {rep.kernel_dim}",
        f"block leakage         {rep.leakage:.3e}",
        f"verdict               {rep.verdict}",
        "",
        "kernel candidates (|A0 e| / |A0| |e|)",
    ]
    for name, val in rep.kernel_candidates.items():
        lines.append(f"  {name:<10s} {val:.3e}")
    lines += ["", "  mode    eigenvalues of the mode block"]
    for k, vals in rep.mode_eigenvalues.items():
        lines.append(f"  {k:>4d}    " + "  ".join(f"{v.real:+.9e}{v.imag:+.2e}i" for v in np.atleast_1d(vals)))
    lines += ["", "all eigenvalues (sorted by real part)"]
    for v in rep.eigenvalues:
        lines.append(f"  {v.real:+.9e} {v.imag:+.3e}i")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- entry point

def build_parser():
    parser = argparse.ArgumentParser(prog="quasiflow", description="Mullins-Sekerka and quasilinear flow laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evolve a configured experiment")
    run.add_argument("config")
    ver = sub.add_parser("verify", help="run oracle and invariant checks")
    ver.add_argument("suite", choices=SUITES + ("all",))
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--output", help="directory for the report file")
    lin = sub.add_parser("linearize", help="spectrum of the linearization at an equilibrium")
    lin.add_argument("config")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed, args.output)
        return cmd_linearize(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except QuasiflowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
