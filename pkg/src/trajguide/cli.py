"""Batch entry point: runs, ablations, sweeps, self-checks, figures.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 guidance divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import plots
from .formats import (ConfigError, RunConfig, config_to_dict, load_run_config,
                      parse_run_config, write_run_artifacts, AttentionTrace,
                      write_trace)
from .guidance import MODES, GuidanceDivergedError, run_ablation
from .runner import build_model, execute_run, scene_suite_for
from .verify import verify_edt, verify_grad_attention, verify_grad_latent

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

_SWEEP_DEFAULT = (0.0, 1.0, 5.0, 10.0, 20.0, 100.0)


def _threads() -> int | None:
    raw = os.environ.get("TRAJGUIDE_THREADS")
    if raw is None:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError("invalid_config",
                          f"TRAJGUIDE_THREADS must be an integer, got {raw!r}") from None


def _demo_config() -> RunConfig:
    return parse_run_config({
        "prompt": ["cat", "moon"],
        "trajectories": [{
            "token_index": 0,
            "polylines": [[[2.0, 2.0], [13.0, 13.0]]],
            "weights": [1.0],
        }],
        "out_dir": "runs/demo",
    })


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    for attr, flag in (("seed", "seed"), ("mode", "mode"), ("lam", "lam"),
                       ("eta", "eta"), ("total_steps", "steps"),
                       ("guided_steps", "guided_steps"),
                       ("repeats_per_step", "repeats")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[attr] = value
    if updates:
        try:
            cfg = replace(cfg, guidance=replace(cfg.guidance, **updates))
        except ValueError as exc:
            raise ConfigError("invalid_config", str(exc)) from None
    if getattr(args, "out", None):
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _run_and_write(cfg: RunConfig, default_out: str) -> int:
    out = Path(cfg.out_dir or default_out)
    model, result = execute_run(cfg)
    write_run_artifacts(result, out, cfg)
    print(f"run written to {out}")
    print(f"mode={cfg.guidance.mode} seed={cfg.guidance.seed} "
          f"steps={cfg.guidance.total_steps}")
    print(f"dtl={result.dtl:.6f}")
    for tok, val in sorted(result.metrics["per_token"].items()):
        print(f"  token {tok}: dtl={val:.6f}")
    return EXIT_OK


def cmd_demo(args) -> int:
    return _run_and_write(_apply_overrides(_demo_config(), args), "runs/demo")


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    return _run_and_write(cfg, "runs/run")


def cmd_ablate(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    model = build_model(cfg)
    scenes = scene_suite_for(cfg, model)
    table = run_ablation(model, scenes, list(MODES), cfg.guidance,
                         max_workers=_threads())
    out = Path(cfg.out_dir or "runs/ablation")
    out.mkdir(parents=True, exist_ok=True)

    lines = ["variant,mean_dtl"]
    for row in table.rows:
        lines.append(f"{row.variant},{row.mean_dtl!r}")
        print(f"{row.variant:>18}: mean dtl {row.mean_dtl:.6f}")
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    (out / "ablation.json").write_text(
        json.dumps(table.as_dict(), sort_keys=True, indent=2) + "\n")
    plots.ablation_chart([r.variant for r in table.rows],
                         [r.mean_dtl for r in table.rows], out / "ablation.png")
    print(f"ablation written to {out}")
    return EXIT_OK


def cmd_sweep_lambda(args) -> int:
    cfg = _apply_overrides(load_run_config(args.config), args)
    values = tuple(args.values)
    if not values:
        raise ConfigError("invalid_config", "sweep needs at least one value")
    if any(v < 0 for v in values):
        raise ConfigError("invalid_config", "lambda values must be >= 0")
    model = build_model(cfg)
    scenes = scene_suite_for(cfg, model)
    table = run_ablation(model, scenes, [("lambda", v) for v in values],
                         cfg.guidance, max_workers=_threads())
    out = Path(cfg.out_dir or "runs/sweep_lambda")
    out.mkdir(parents=True, exist_ok=True)

    lines = ["lambda,mean_dtl"]
    for value, row in zip(values, table.rows):
        lines.append(f"{value!r},{row.mean_dtl!r}")
        print(f"lambda={value:>6g}: mean dtl {row.mean_dtl:.6f}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    series = {"lambda": list(values),
              "mean_dtl": [r.mean_dtl for r in table.rows],
              "per_scene": {f"{v:g}": list(r.scene_dtls)
                            for v, r in zip(values, table.rows)}}
    (out / "sweep.json").write_text(
        json.dumps(series, sort_keys=True, indent=2) + "\n")
    plots.sweep_chart(values, [r.mean_dtl for r in table.rows], out / "sweep.png")
    print(f"sweep written to {out}")
    return EXIT_OK


def _dump_worst(report, out_dir: Path) -> None:
    if report.worst_tensor is None:
        return
    tensor = report.worst_tensor
    if tensor.ndim == 1:
        tensor = tensor[:, None]
    h, w = tensor.shape
    trace = AttentionTrace((h, 1), w, 1, 1, tensor.reshape(1, 1, h, w))
    path = out_dir / f"verify_{report.name}_worst.atrc"
    write_trace(trace, path)
    print(f"worst case (instance {report.worst_case}) dumped to {path}",
          file=sys.stderr)


def cmd_verify(args, which: str) -> int:
    out_dir = Path(args.out or ".")
    corrupt = bool(getattr(args, "corrupt", False))
    if which == "edt":
        reports = [verify_edt(corrupt=corrupt)]
    else:
        reports = [verify_grad_attention(corrupt=corrupt),
                   verify_grad_latent(corrupt=corrupt)]
    code = EXIT_OK
    for report in reports:
        print(report.summary())
        if not report.passed:
            out_dir.mkdir(parents=True, exist_ok=True)
            _dump_worst(report, out_dir)
            code = EXIT_VERIFY
    return code


def cmd_render_plots(args) -> int:
    try:
        written = plots.render_run_plots(args.run_dir)
    except FileNotFoundError as exc:
        raise ConfigError("invalid_config", str(exc)) from None
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _add_override_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="sampling seed")
    p.add_argument("--mode", choices=MODES, help="guidance mode")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="movement energy weight")
    p.add_argument("--eta", type=float, help="guidance strength")
    p.add_argument("--steps", type=int, help="total reverse steps")
    p.add_argument("--guided-steps", type=int, help="steps with guidance")
    p.add_argument("--repeats", type=int, help="guidance repeats per step")
    p.add_argument("--out", help="output directory")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajguide",
        description="Trajectory-guided sampling in a deterministic sandbox.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo", help="run the built-in demo scene")
    _add_override_flags(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("run", help="run one config")
    p.add_argument("config")
    _add_override_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ablate", help="mean DTL per mode over the config's scenes")
    p.add_argument("config")
    _add_override_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep-lambda", help="mean DTL per lambda value")
    p.add_argument("config")
    p.add_argument("--values", type=float, nargs="+", default=list(_SWEEP_DEFAULT))
    _add_override_flags(p)
    p.set_defaults(func=cmd_sweep_lambda)

    for which in ("grad", "edt"):
        p = sub.add_parser(f"verify-{which}",
                           help=f"run the {which} self-check suite")
        p.add_argument("--out", help="directory for failure dumps")
        p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
        p.set_defaults(func=lambda a, w=which: cmd_verify(a, w))

    p = sub.add_parser("render-plots", help="render figures for a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_render_plots)

    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GuidanceDivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
