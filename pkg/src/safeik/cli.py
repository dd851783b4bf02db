"""Command-line entry points.

    safeik rollout --config run.yaml --solver B --seed 3 [--csv out.csv]
    safeik compare --config run.yaml --seeds 10 [--csv table.csv]
    safeik check-gradients
    safeik serve --config run.yaml --port 8765

Exit status is nonzero on any solver panic or failed check.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_run_config
from .metrics import batch_compare, comparison_table, compute_metrics, summary_csv
from .rollout import run_rollout
from .scenes import make_scene


def _cmd_rollout(args):
    cfg = load_run_config(args.config)
    model = cfg.load_model(Path(args.config).parent if args.config else None)
    kind = args.solver or cfg.solver_kind
    scene, traj = make_scene(cfg.scene, args.seed)
    try:
        log = run_rollout(kind, scene, traj, cfg.dt, model, cfg.ik,
                          q0=cfg.home, duration=cfg.duration)
    except Exception as exc:  # solver panic: report and fail loudly
        print(f"rollout aborted: {exc}", file=sys.stderr)
        return 2
    report = compute_metrics(log, traj)
    print(
        f"{cfg.scene} seed={args.seed} solver={kind}: "
        f"collisions={report.collisions:.0f} min_clearance={report.min_clearance:.4f} "
        f"violation={report.violation_time_pct:.2f}% pos_err={report.pos_err_mean:.4f} "
        f"ori_err={report.ori_err_mean:.2f}deg"
    )
    if args.csv:
        log.write_csv(args.csv)
        print(f"per-tick log written to {args.csv}")
    return 0


def _cmd_compare(args):
    cfg = load_run_config(args.config)
    model = cfg.load_model(Path(args.config).parent if args.config else None)
    seeds = list(range(args.seeds)) if args.seeds else list(cfg.seeds)
    try:
        rows, per = batch_compare(
            ["N", "P", "B"], cfg.scene, len(seeds), model, cfg.ik,
            dt=cfg.dt, seeds=seeds, q0=cfg.home, duration=cfg.duration,
        )
    except Exception as exc:
        print(f"comparison aborted: {exc}", file=sys.stderr)
        return 2
    print(comparison_table(rows), end="")
    if args.csv:
        Path(args.csv).write_text(summary_csv(rows, per))
        print(f"summary written to {args.csv}")
    return 0


def _cmd_check_gradients(args):
    from . import gradcheck

    results = gradcheck.run_all(samples=args.samples)
    worst_ok = True
    for name, worst, tol, checked in results:
        status = "ok" if worst < tol else "FAIL"
        worst_ok &= worst < tol
        print(f"{name:<18} max_rel_err={worst:9.3e}  tol={tol:g}  n={checked}  {status}")
    return 0 if worst_ok else 1


def _cmd_serve(args):
    from .teleop import serve

    cfg = load_run_config(args.config)
    model = cfg.load_model(Path(args.config).parent if args.config else None)
    server = serve(cfg, model, port=args.port)
    print(f"teleop session on ws://127.0.0.1:{args.port or cfg.teleop.port} "
          f"(scene={cfg.scene}, solver={cfg.solver_kind}, {cfg.teleop.rate_hz:.0f} Hz)")
    server.run()
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="safeik", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rollout", help="run one scene rollout and print metrics")
    p.add_argument("--config", default=None)
    p.add_argument("--solver", choices=["N", "P", "B"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", default=None, help="write the per-tick log here")
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("compare", help="multi-seed comparison of N, P and B")
    p.add_argument("--config", default=None)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--csv", default=None, help="write the summary CSV here")
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("check-gradients", help="finite-difference audit of every term")
    p.add_argument("--samples", type=int, default=25)
    p.set_defaults(func=_cmd_check_gradients)

    p = sub.add_parser("serve", help="run the live teleoperation endpoint")
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
