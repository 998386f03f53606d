"""Command-line interface.

Subcommands:
    generate  draw synthetic channels and write them to binary channel files
    run       execute a scenario sweep and export the report
    trace     run one quasi-Newton optimization and dump its per-iteration trace
    time      measure building-block wall times against the RZF baseline

Exit codes: 0 on success, 1 on configuration errors, 2 when a sweep finished
but some grid cells failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .channel_io import write_channels
from .channels import generate_channels
from .errors import ConfigError, MimoError
from .harness import (
    QN_ALGOS,
    ScenarioConfig,
    export_report,
    parse_qn_name,
    run_scenario,
    timing_report,
)
from .model import SystemParams, noise_from_susinr
from .optimizer import ObjectiveSpec, lbfgs_maximize
from .quality import spectral_efficiency_irc


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the harness reserves 2 for
    # per-cell failures, so usage problems become config errors instead.
    def error(self, message):
        raise ConfigError(message)


def _parse_int_list(text: str) -> tuple[int, ...]:
    out: list[int] = []
    try:
        for chunk in text.split(","):
            chunk = chunk.strip()
            if "-" in chunk[1:]:
                lo, hi = chunk.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(chunk))
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}: {exc}") from exc
    return tuple(out)


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(chunk) for chunk in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}: {exc}") from exc


def _add_common(p: _Parser):
    p.add_argument("--config", type=Path, help="JSON scenario configuration file")
    p.add_argument("--seeds", type=str, help="comma-separated seeds, ranges like 0-39 allowed")
    p.add_argument("--susinr", type=str, help="comma-separated channel-quality points in dB")
    p.add_argument("--algos", type=str, help="comma-separated algorithm names")
    p.add_argument("--iters", type=int, help="maximum quasi-Newton iterations")
    p.add_argument("--tol-grad", type=float, help="gradient-norm termination tolerance")
    p.add_argument("--tol-change", type=float, help="objective/step change termination tolerance")


def build_parser() -> _Parser:
    parser = _Parser(prog="mimo-precode", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic channels to a binary file")
    _add_common(g)
    g.add_argument("--out", type=Path, required=True, help="output channel file")

    r = sub.add_parser("run", help="run a scenario sweep")
    _add_common(r)
    r.add_argument("--out", type=Path, default=Path("report.csv"), help="report path")
    r.add_argument("--format", choices=("csv", "json"), help="report format (default from suffix)")

    t = sub.add_parser("trace", help="dump one optimization trace")
    _add_common(t)
    t.add_argument("--out", type=Path, default=Path("trace.csv"), help="trace path")
    t.add_argument("--format", choices=("csv", "json"), help="trace format (default from suffix)")

    m = sub.add_parser("time", help="report wall-time ratios against the RZF baseline")
    _add_common(m)
    m.add_argument("--out", type=Path, help="optional JSON output path")
    return parser


def load_scenario(args) -> ScenarioConfig:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
    cfg = ScenarioConfig.from_dict(raw)

    updates: dict = {}
    if args.seeds is not None:
        updates["seeds"] = _parse_int_list(args.seeds)
    if args.susinr is not None:
        updates["susinr_grid_db"] = _parse_float_list(args.susinr)
    if args.algos is not None:
        updates["algorithms"] = tuple(a.strip() for a in args.algos.split(","))
    opt_updates: dict = {}
    if args.iters is not None:
        opt_updates["max_iters"] = args.iters
    if args.tol_grad is not None:
        opt_updates["tol_grad"] = args.tol_grad
    if args.tol_change is not None:
        opt_updates["tol_change"] = args.tol_change
    try:
        if opt_updates:
            updates["optimizer"] = replace(cfg.optimizer, **opt_updates)
        if updates:
            cfg = replace(cfg, **updates)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _format_for(path: Path, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "json" if path.suffix.lower() == ".json" else "csv"


def _cmd_generate(args) -> int:
    cfg = load_scenario(args)
    out: Path = args.out
    for seed in cfg.seeds:
        channel = generate_channels(cfg.dims, seed, cfg.channel_model, cfg.rho)
        if len(cfg.seeds) == 1:
            path = out
        else:
            path = out.with_name(f"{out.stem}_seed{seed}{out.suffix}")
        write_channels(channel, path)
        print(f"wrote {path}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_scenario(args)
    report = run_scenario(cfg)
    export_report(report, _format_for(args.out, args.format), args.out)
    n_fail = len(report.failures)
    print(f"wrote {args.out} ({len(report.rows)} rows, {n_fail} failed cells)")
    return 2 if n_fail else 0


def _cmd_trace(args) -> int:
    cfg = load_scenario(args)
    algo = cfg.algorithms[0]
    if algo not in QN_ALGOS:
        qn = [a for a in cfg.algorithms if a in QN_ALGOS]
        if not qn:
            raise ConfigError(f"trace needs a quasi-Newton algorithm, got {cfg.algorithms}")
        algo = qn[0]
    seed = cfg.seeds[0]
    susinr = cfg.susinr_grid_db[0]
    channel = generate_channels(cfg.dims, seed, cfg.channel_model, cfg.rho)
    sigma2 = noise_from_susinr(channel, cfg.P, susinr)
    params = SystemParams(P=cfg.P, sigma2=sigma2, L=cfg.dims.L)
    kind, start = parse_qn_name(algo)
    spec = ObjectiveSpec(kind=kind, channel=channel, params=params)
    opt_cfg = replace(cfg.optimizer, start=start, start_matrix=None)

    score = lambda W: spectral_efficiency_irc(W, channel, params).se_bits
    _, trace = lbfgs_maximize(spec, opt_cfg, score_fn=score)

    fmt = _format_for(args.out, args.format)
    if fmt == "csv":
        lines = ["iteration,objective,grad_norm,step,se_irc_bits"]
        for r in trace.records:
            lines.append(f"{r.iteration},{r.objective:.6g},{r.grad_norm:.6g},"
                         f"{r.step:.6g},{r.se_irc_bits:.6g}")
        args.out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    else:
        doc = {
            "algorithm": algo, "seed": seed, "susinr_db": susinr,
            "termination": trace.termination,
            "records": [{
                "iteration": r.iteration,
                "objective": float(f"{r.objective:.6g}"),
                "grad_norm": float(f"{r.grad_norm:.6g}"),
                "step": float(f"{r.step:.6g}"),
                "se_irc_bits": float(f"{r.se_irc_bits:.6g}"),
            } for r in trace.records],
        }
        args.out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8", newline="\n")
    print(f"wrote {args.out} ({algo}, seed {seed}, {susinr} dB, "
          f"{trace.iterations} iterations, {trace.termination})")
    return 0


def _cmd_time(args) -> int:
    cfg = load_scenario(args)
    report = timing_report(cfg)
    print(report.format_table())
    if args.out is not None:
        args.out.write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                            encoding="utf-8", newline="\n")
        print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "trace": _cmd_trace,
    "time": _cmd_time,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except MimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
