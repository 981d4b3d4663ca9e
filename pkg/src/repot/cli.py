"""Command-line entry points: ``run``, ``derail``, ``judge``, ``gen`` and ``planbench-import``.

Exit status is 0 when a command completes (individual problem failures are
data, not errors) and 2 for configuration or I/O problems.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import analysis
from .config import ConfigError, RunConfig, load_config, with_overrides
from .derail import (
    CONDITIONS,
    REGISTRY,
    DerailRecord,
    DerailSettings,
    DerailSink,
    make_cases,
    read_cases,
    run_derail,
    summarize_derail,
)
from .gateway import RemoteBackend, RemoteConfig, Sandbox, SandboxConfigError, SandboxLimits, ScriptedBackend
from .methods import METHODS, Runner, run_suite
from .traces import TraceFormatError, TraceRecord, TraceSink
from .zoo import StratificationPlan, generate_suite, read_suite, write_suite

REPORTS = ("headline", "success", "per-env", "cost", "derail", "eq2", "mechanism", "routing")

log = logging.getLogger("repot")


class CLIError(Exception):
    pass


# -- wiring ----------------------------------------------------------------------------------


def build_backend(cfg: RunConfig):
    b = cfg.backend
    if b.kind == "scripted":
        if not b.script:
            raise CLIError("the scripted backend needs a response file (--script FILE or backend.script)")
        if not Path(b.script).is_file():
            raise CLIError(f"script file not found: {b.script}")
        try:
            return ScriptedBackend.from_jsonl(b.script)
        except ValueError as exc:
            raise CLIError(str(exc)) from None
    env = dict(os.environ)
    if b.api_base:
        env["REPOT_API_BASE"] = b.api_base
    try:
        rc = RemoteConfig.from_env(env)
    except ValueError as exc:
        raise CLIError(f"remote backend misconfigured: {exc} (set REPOT_API_BASE, REPOT_API_KEY, REPOT_MODEL)") from None
    rc.retries = b.retries
    rc.timeout_s = b.timeout_s
    if b.model_name:
        rc.model = b.model_name
    return RemoteBackend(rc)


def build_runner(cfg: RunConfig) -> Runner:
    limits = SandboxLimits(cfg.sandbox.wall_ms, cfg.sandbox.mem_bytes)
    try:
        sandbox = Sandbox(cfg.sandbox.interpreter, limits, cfg.sandbox.max_concurrent)
    except SandboxConfigError as exc:
        raise CLIError(str(exc)) from None
    return Runner(
        backend=build_backend(cfg),
        sandbox=sandbox,
        model_name=cfg.backend.model_name,
        temperature=cfg.temperature,
        sc_temperature=cfg.sc_temperature,
        max_output_tokens=cfg.max_output_tokens,
        reasoning_level=cfg.reasoning_level,
        limits=limits,
    )


def _load_suite(path: str | None):
    if not path:
        raise CLIError("no suite given (--suite FILE or suite: in the config)")
    if not Path(path).is_file():
        raise CLIError(f"suite file not found: {path}")
    return read_suite(path)


def _resolve(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    cfg = with_overrides(
        cfg,
        method=getattr(args, "method", None),
        suite=getattr(args, "suite", None),
        out=getattr(args, "out", None),
        seed=getattr(args, "seed", None),
        parallel=getattr(args, "parallel", None),
        backend=getattr(args, "backend", None),
        script=getattr(args, "script", None),
    )
    cfg.validate()
    return cfg


# -- commands ----------------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _resolve(args)
    suite = _load_suite(cfg.suite)
    runner = build_runner(cfg)
    header = {"command": "run", "config": cfg.to_json(), "seed": cfg.seed}
    sink = TraceSink(cfg.out, header) if cfg.out else None
    try:
        records, summary = run_suite(suite, cfg.method_config(), runner, cfg.parallel, sink, cfg.seed)
    finally:
        if sink is not None:
            sink.close()
    rows = [[env, c, s, n, 100.0 * s / n] for (env, c), (s, n) in summary.counts.items()]
    print(analysis.format_table(["environment", "complexity", "successes", "n", "success_pct"], rows))
    total = sum(n for _, n in summary.counts.values())
    ok = sum(s for s, _ in summary.counts.values())
    print(f"{cfg.method}: {ok}/{total} solved, {summary.n_exceptions} runner exception(s)")
    return 0


def cmd_derail(args) -> int:
    cfg = _resolve(args)
    suite = _load_suite(cfg.suite)
    d = cfg.derail
    cases_path = args.cases or d.cases
    if cases_path:
        if not Path(cases_path).is_file():
            raise CLIError(f"case file not found: {cases_path}")
        cases = read_cases(cases_path)
    else:
        skipped: list = []
        cases = make_cases(suite, d.per_problem, cfg.seed, d.total, skipped)
        if skipped:
            print(f"skipped {len(skipped)} problem(s) without a valid injection point", file=sys.stderr)
    conditions = args.conditions.split(",") if args.conditions else (d.conditions or list(CONDITIONS))
    for c in conditions:
        if c != "stateguard_rollback" and c not in REGISTRY:
            raise CLIError(f"unknown derail condition {c!r}; valid: {', '.join(CONDITIONS)}")
    runner = build_runner(cfg)
    settings = DerailSettings(cfg.T, cfg.K, d.stateguard_budget)
    sink = None
    if cfg.out:
        sink = DerailSink(cfg.out, {"command": "derail", "config": cfg.to_json(), "seed": cfg.seed,
                                    "conditions": conditions, "n_cases": len(cases)})
    try:
        _, summary = run_derail(cases, suite, conditions, runner, sink, cfg.parallel, settings)
    finally:
        if sink is not None:
            sink.close()
    print(summary.table(cfg.backend.model_name or "success%"))
    print(f"{len(cases)} case(s); pairing {'verified' if summary.paired else 'BROKEN'}")
    return 0


def load_records(paths: Sequence[str]) -> tuple[list[TraceRecord], list[DerailRecord]]:
    traces: list[TraceRecord] = []
    derail: list[DerailRecord] = []
    for path in paths:
        if not Path(path).is_file():
            raise CLIError(f"trace file not found: {path}")
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    if row.get("kind") == "header":
                        continue
                    if "condition" in row:
                        derail.append(DerailRecord.from_json(row))
                    else:
                        traces.append(TraceRecord.from_json(row))
                except (json.JSONDecodeError, TraceFormatError, TypeError, KeyError) as exc:
                    raise CLIError(f"{path}: line {lineno}: {exc}") from None
    return traces, derail


def cmd_judge(args) -> int:
    traces, derail = load_records(args.traces)
    kind = args.report
    headers: list[str]
    rows: list[list]
    if kind == "headline":
        headers = ["model", "method", "successes", "n", "success_pct"]
        rows = [[m, meth, c.successes, c.total, c.percent] for (m, meth), c in analysis.method_table(traces).items()]
        a, b = args.compare
        for model in sorted({t.model for t in traces}):
            methods = {t.method for t in traces if t.model == model}
            if a in methods and b in methods:
                ci = analysis.paired_bootstrap_ci(
                    analysis.paired_sample(traces, a, b, model), B=args.B, seed=args.seed
                )
                rows.append([model, f"{a}-{b} (95% CI)", "", ci.B, analysis.ci_summary(ci)])
    elif kind == "success":
        headers, rows = analysis.success_rows(traces)
    elif kind == "per-env":
        headers, rows = analysis.delta_rows(traces, *args.compare)
    elif kind == "cost":
        headers, rows = analysis.cost_rows(traces)
    elif kind == "mechanism":
        headers, rows = analysis.mechanism_rows(traces)
    elif kind == "routing":
        hist = analysis.routing_histogram([t for t in traces if t.method == "adaptive_repot"])
        buckets = sorted({r for h in hist.values() for r in h})
        headers = ["model", *buckets, "total"]
        rows = [[m, *[h.get(r, 0) for r in buckets], sum(h.values())] for m, h in sorted(hist.items())]
    elif kind == "eq2":
        headers = ["model", "p", "q", "r", "b", "b_prime", "margin", "holds"]
        rows = []
        for model in sorted({t.model for t in traces}):
            est = analysis.eq2_estimate(traces, model)
            try:
                holds, margin = analysis.eq2_evaluate(est.params())
            except ValueError:
                holds, margin = None, None
            rows.append([model, est.p, est.q, est.r, est.b, est.b_prime, margin, holds])
    else:
        conditions = list(dict.fromkeys(r.condition for r in derail))
        summary = summarize_derail(derail, conditions)
        headers = ["condition", "successes", "n", "success_pct"]
        rows = [[c, s, n, None if n == 0 else 100.0 * s / n] for c, (s, n) in summary.rows.items()]
    print(analysis.format_table(headers, rows))
    if args.csv:
        analysis.write_csv(args.csv, headers, rows)
    return 0


def cmd_gen(args) -> int:
    plan = StratificationPlan.default()
    if args.plan:
        try:
            plan = StratificationPlan.from_json(json.loads(Path(args.plan).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise CLIError(f"cannot read stratification plan {args.plan}: {exc}") from None
    try:
        suite = generate_suite(plan, args.seed)
    except ValueError as exc:
        raise CLIError(str(exc)) from None
    write_suite(suite, args.out)
    print(f"wrote {len(suite)} instances to {args.out}")
    return 0


def cmd_planbench_import(args) -> int:
    from .planbench import attach_oracle, load_planbench_split

    try:
        instances = load_planbench_split(args.dir)
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc)) from None
    if not args.no_oracle:
        attach_oracle(instances)
    write_suite(instances, args.out)
    print(f"imported {len(instances)} instances from {args.dir} to {args.out}")
    return 0


# -- parser ----------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--suite", help="suite JSONL")
    p.add_argument("--out", help="output trace JSONL")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", type=int, help="problems evaluated concurrently")
    p.add_argument("--backend", choices=("scripted", "remote"))
    p.add_argument("--script", help="scripted responses JSONL ({\"key\": ..., \"text\": ...} per line)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repot", description="Verifier-backed planning harness.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="evaluate one method over a suite")
    _common(p)
    p.add_argument("--method", help=f"one of {', '.join(METHODS)}")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("derail", help="run the injected-error recovery benchmark")
    _common(p)
    p.add_argument("--cases", help="derail case JSONL (generated from the suite when omitted)")
    p.add_argument("--conditions", help="comma-separated condition names")
    p.set_defaults(func=cmd_derail)

    p = sub.add_parser("judge", help="analyse trace files")
    p.add_argument("traces", nargs="+")
    p.add_argument("--report", choices=REPORTS, default="headline")
    p.add_argument("--compare", nargs=2, default=("repot", "pot_retry"), metavar=("A", "B"))
    p.add_argument("--B", type=int, default=10_000, help="bootstrap resamples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("gen", help="generate a stratified suite")
    p.add_argument("--plan", help="stratification JSON {env: {complexity: count}}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("planbench-import", help="convert a directory of PDDL problems to suite JSONL")
    p.add_argument("dir")
    p.add_argument("--out", required=True)
    p.add_argument("--no-oracle", action="store_true", help="skip attaching oracle plans")
    p.set_defaults(func=cmd_planbench_import)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CLIError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
