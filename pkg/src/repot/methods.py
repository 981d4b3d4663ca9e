"""Planning methods and the controller that runs them over a suite.

Every method talks to the model only through ``Runner.call`` and to the
environment only through verified replay, so each record's success flag is
the verifier's verdict on the committed plan, never the model's claim.
"""

from __future__ import annotations

import logging
import time
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from .gateway import (
    Backend,
    CompletionRequest,
    ExtractionError,
    Sandbox,
    SandboxLimits,
    extract_plan,
)
from .gateway.sandbox import SandboxResult
from .prompts import build_repair_prompt, make_view, render_prompt, repair_max_moves
from .replay import ReplayOutcome, replay
from .traces import REPOT_METHODS, Attempt, LLMCall, TraceRecord, TraceSink

log = logging.getLogger(__name__)

METHODS = ("cot", "pot", "sc", "pot_retry", "repot", "adaptive_repot")

# Maximum model calls per record for a given config; checked on every record.
def call_budget(config: MethodConfig) -> tuple[int, int]:
    return {
        "cot": (1, 1),
        "pot": (1, 1),
        "sc": (config.k, config.k),
        "pot_retry": (1, 2),
        "repot": (1, 1 + config.R),
        "adaptive_repot": (1, 1 + config.R),
    }[config.method]


@dataclass(frozen=True)
class MethodConfig:
    method: str
    R: int = 1
    T: int = 4
    k: int = 8
    phi_threshold: float = 0.15
    K: int | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.R < 0 or self.T < 0 or self.k < 1:
            raise ValueError(f"need R >= 0, T >= 0, k >= 1 (got R={self.R}, T={self.T}, k={self.k})")
        if not 0.0 <= self.phi_threshold <= 1.0:
            raise ValueError(f"phi_threshold must lie in [0, 1], got {self.phi_threshold}")
        if self.K is not None and self.K < 1:
            raise ValueError(f"K must be positive, got {self.K}")


class _BackendFailure(Exception):
    pass


@dataclass
class _Trace:
    """Mutable working state for one problem."""

    instance: Any
    calls: list[LLMCall] = field(default_factory=list)
    attempts: list[Attempt] = field(default_factory=list)


@dataclass
class Runner:
    """Binds a backend and sandbox to sampling parameters.

    ``executor`` replaces the sandbox for program execution (tests inject a
    pure function here).
    """

    backend: Backend
    sandbox: Sandbox | None = None
    model_name: str = ""
    temperature: float = 0.0
    sc_temperature: float | None = None
    max_output_tokens: int = 16384
    reasoning_level: str = "none"
    limits: SandboxLimits = field(default_factory=SandboxLimits)
    executor: Callable[[str], SandboxResult] | None = None
    clock: Callable[[], float] = time.perf_counter

    # -- primitives ------------------------------------------------------------------

    def call(self, trace: _Trace, prompt: str, temperature: float | None = None) -> str:
        req = CompletionRequest(
            prompt=prompt,
            temperature=self.temperature if temperature is None else temperature,
            max_output_tokens=self.max_output_tokens,
            reasoning_level=self.reasoning_level,
            model_name=self.model_name,
            key=trace.instance.problem_id,
        )
        res = self.backend.complete(req)
        trace.calls.append(LLMCall(prompt, res.text, res.prompt_tokens, res.completion_tokens, res.latency_ms))
        if res.backend_error is not None:
            raise _BackendFailure(res.backend_error)
        return res.text

    def _execute(self, code: str) -> SandboxResult:
        if self.executor is not None:
            return self.executor(code)
        if self.sandbox is None:
            self.sandbox = Sandbox(limits=self.limits)
        return self.sandbox.execute(code, self.limits)

    def attempt(
        self, trace: _Trace, prompt: str, mode: str, start: Any, kind: str, temperature: float | None = None
    ) -> ReplayOutcome:
        """One model call, plan extraction and replay from ``start``.

        Extraction failures are scored as an empty plan.
        """
        inst = trace.instance
        text = self.call(trace, prompt, temperature)
        err = None
        try:
            plan = extract_plan(inst.environment, text, mode, executor=self._execute).plan
        except ExtractionError as exc:
            plan, err = [], str(exc)
        out = replay(inst.environment, start, plan, inst.goal)
        if err is not None:
            out = _with_error(out, f"extraction failed: {err}")
        trace.attempts.append(
            Attempt(kind, out.plan_len, len(out.prefix), out.failure_index, out.goal_reached, err)
        )
        return out


def _with_error(out: ReplayOutcome, error: str) -> ReplayOutcome:
    return ReplayOutcome(out.prefix, out.boundary_state, out.failure_index, error, out.goal_reached, out.plan_len)


# -- record assembly ---------------------------------------------------------------------


def _finish(
    runner: Runner,
    trace: _Trace,
    method: str,
    committed: Sequence[Any],
    last: ReplayOutcome | None,
    offset: int,
    t0: float,
    seed: int,
    exception: str | None = None,
    repair_calls: int | None = None,
    initial_success: bool | None = None,
    route: str | None = None,
) -> TraceRecord:
    """Build the record. ``offset`` is the committed length before ``last`` started."""
    inst = trace.instance
    final = replay(inst.environment, inst.initial_state, list(committed), inst.goal)
    if not final.fully_valid:
        raise AssertionError(f"{inst.problem_id}: committed plan does not replay cleanly")
    success = final.goal_reached and exception is None
    failure_index = None
    error = None
    plan_len = len(committed)
    if last is not None:
        plan_len = offset + last.plan_len
        if not last.fully_valid:
            failure_index = offset + last.failure_index
        error = last.error or None
    if success:
        error = None
    return TraceRecord(
        problem_id=inst.problem_id,
        method=method,
        success=success,
        llm_calls=trace.calls,
        repot_repair_calls=repair_calls,
        repot_initial_pot_success=initial_success,
        verified_prefix_len=len(committed),
        plan_len=plan_len,
        first_failure_index=failure_index,
        verifier_error=error,
        runner_exception=exception,
        wall_ms=int((runner.clock() - t0) * 1000),
        seed=seed,
        environment=inst.environment,
        complexity=inst.complexity,
        model=runner.model_name,
        route_taken=route,
        attempts=trace.attempts,
        verified_plan=[str(a) for a in committed],
    )


# -- methods -------------------------------------------------------------------------------


def run_single(runner: Runner, instance: Any, mode: str, seed: int = 0) -> TraceRecord:
    """One call in ``pot`` or ``cot`` mode; success iff the plan replays to the goal."""
    trace = _Trace(instance)
    t0 = runner.clock()
    try:
        out = runner.attempt(trace, render_prompt(instance, mode), mode, instance.initial_state, "initial")
    except _BackendFailure as exc:
        return _finish(runner, trace, mode, [], None, 0, t0, seed, exception=str(exc))
    return _finish(runner, trace, mode, out.prefix, out, 0, t0, seed)


def run_pot(runner: Runner, instance: Any, seed: int = 0) -> TraceRecord:
    return run_single(runner, instance, "pot", seed)


def run_cot(runner: Runner, instance: Any, seed: int = 0) -> TraceRecord:
    return run_single(runner, instance, "cot", seed)


def run_pot_retry(runner: Runner, instance: Any, seed: int = 0) -> TraceRecord:
    """PoT, then on failure one fresh PoT call with the unchanged prompt."""
    trace = _Trace(instance)
    t0 = runner.clock()
    prompt = render_prompt(instance, "pot")
    out = None
    try:
        out = runner.attempt(trace, prompt, "pot", instance.initial_state, "initial")
        if not out.goal_reached:
            out = runner.attempt(trace, prompt, "pot", instance.initial_state, "retry")
    except _BackendFailure as exc:
        committed = out.prefix if out is not None else ()
        return _finish(runner, trace, "pot_retry", committed, out, 0, t0, seed, exception=str(exc))
    return _finish(runner, trace, "pot_retry", out.prefix, out, 0, t0, seed)


def run_sc(runner: Runner, instance: Any, k: int = 8, seed: int = 0) -> TraceRecord:
    """``k`` CoT samples; majority vote over canonical plans, ties to the earliest sample."""
    trace = _Trace(instance)
    t0 = runner.clock()
    prompt = render_prompt(instance, "cot")
    temp = runner.sc_temperature
    plans: list[tuple[str, ...] | None] = []
    try:
        for _ in range(k):
            text = runner.call(trace, prompt, temp)
            try:
                plan = extract_plan(instance.environment, text, "cot").plan
                plans.append(tuple(str(a) for a in plan))
            except ExtractionError as exc:
                plans.append(None)
                trace.attempts.append(Attempt("sample", 0, 0, 1, False, str(exc)))
                continue
            out = replay(instance.environment, instance.initial_state, plan, instance.goal)
            trace.attempts.append(
                Attempt("sample", out.plan_len, len(out.prefix), out.failure_index, out.goal_reached, None)
            )
    except _BackendFailure as exc:
        return _finish(runner, trace, "sc", [], None, 0, t0, seed, exception=str(exc))
    winner = majority_plan(plans)
    out = replay(instance.environment, instance.initial_state, list(winner or ()), instance.goal)
    if winner is None:
        out = _with_error(out, "extraction failed: no sample produced a plan")
    return _finish(runner, trace, "sc", out.prefix, out, 0, t0, seed)


def majority_plan(plans: Sequence[tuple[str, ...] | None]) -> tuple[str, ...] | None:
    """Most frequent non-None plan; among ties the one sampled first."""
    counts = Counter(p for p in plans if p is not None)
    if not counts:
        return None
    best = max(counts.values())
    for p in plans:
        if p is not None and counts[p] == best:
            return p
    return None  # pragma: no cover


def _repair(
    runner: Runner,
    trace: _Trace,
    config: MethodConfig,
    committed: list,
    boundary: Any,
    last: ReplayOutcome,
) -> ReplayOutcome:
    inst = trace.instance
    view = make_view(inst.environment, committed, boundary, last.error, last.failed_action, config.T)
    prompt = build_repair_prompt(inst, view, max_moves=repair_max_moves(inst, config.K))
    return runner.attempt(trace, prompt, "pot", boundary, "repair")


def run_repot(runner: Runner, instance: Any, config: MethodConfig | None = None, seed: int = 0) -> TraceRecord:
    """Initial PoT, then up to R suffix repairs from the verified boundary.

    Each repair's verified prefix is appended to the committed plan, even when
    it stops short of the goal.
    """
    config = config or MethodConfig("repot")
    trace = _Trace(instance)
    t0 = runner.clock()
    committed: list = []
    last = None
    offset = 0
    repairs = 0
    initial_ok = None
    try:
        last = runner.attempt(trace, render_prompt(instance, "pot"), "pot", instance.initial_state, "initial")
        committed = list(last.prefix)
        initial_ok = last.goal_reached
        boundary = last.boundary_state
        while not last.goal_reached and repairs < config.R:
            repairs += 1
            offset = len(committed)
            last = _repair(runner, trace, config, committed, boundary, last)
            committed += last.prefix
            boundary = last.boundary_state
    except _BackendFailure as exc:
        return _finish(
            runner, trace, "repot", committed, last, offset, t0, seed, str(exc), repairs, bool(initial_ok)
        )
    return _finish(runner, trace, "repot", committed, last, offset, t0, seed, None, repairs, initial_ok)


def choose_route(outcome: ReplayOutcome, phi_threshold: float) -> str:
    if outcome.goal_reached:
        return "initial_success"
    if outcome.plan_len == 0:
        return "fresh_retry_empty"
    if outcome.prefix_fraction < phi_threshold:
        return "fresh_retry_short_prefix"
    return "suffix_repair"


def run_adaptive_repot(
    runner: Runner, instance: Any, config: MethodConfig | None = None, seed: int = 0
) -> TraceRecord:
    """RePoT whose first recovery step is a fresh PoT call when the plan is empty or
    the verified fraction is below ``phi_threshold``. Later steps (R > 1) repair."""
    config = config or MethodConfig("adaptive_repot")
    trace = _Trace(instance)
    t0 = runner.clock()
    prompt = render_prompt(instance, "pot")
    committed: list = []
    last = None
    offset = 0
    repairs = 0
    initial_ok = None
    route = None
    try:
        last = runner.attempt(trace, prompt, "pot", instance.initial_state, "initial")
        committed = list(last.prefix)
        initial_ok = last.goal_reached
        route = choose_route(last, config.phi_threshold)
        boundary = last.boundary_state
        while not last.goal_reached and repairs < config.R:
            repairs += 1
            if repairs == 1 and route.startswith("fresh_retry"):
                offset = 0
                last = runner.attempt(trace, prompt, "pot", instance.initial_state, "retry")
                committed = list(last.prefix)
            else:
                offset = len(committed)
                last = _repair(runner, trace, config, committed, boundary, last)
                committed += last.prefix
            boundary = last.boundary_state
    except _BackendFailure as exc:
        return _finish(
            runner, trace, "adaptive_repot", committed, last, offset, t0, seed, str(exc), repairs,
            bool(initial_ok), route,
        )
    return _finish(
        runner, trace, "adaptive_repot", committed, last, offset, t0, seed, None, repairs, initial_ok, route
    )


def run_method(runner: Runner, instance: Any, config: MethodConfig, seed: int = 0) -> TraceRecord:
    m = config.method
    if m == "cot":
        rec = run_cot(runner, instance, seed)
    elif m == "pot":
        rec = run_pot(runner, instance, seed)
    elif m == "pot_retry":
        rec = run_pot_retry(runner, instance, seed)
    elif m == "sc":
        rec = run_sc(runner, instance, config.k, seed)
    elif m == "repot":
        rec = run_repot(runner, instance, config, seed)
    else:
        rec = run_adaptive_repot(runner, instance, config, seed)
    check_budget(rec, config)
    return rec


def check_budget(record: TraceRecord, config: MethodConfig) -> None:
    lo, hi = call_budget(config)
    n = record.n_calls
    if record.runner_exception is None and not lo <= n <= hi:
        raise AssertionError(f"{record.problem_id}: {config.method} made {n} calls, budget is [{lo}, {hi}]")
    if n > hi:
        raise AssertionError(f"{record.problem_id}: {config.method} exceeded its call budget ({n} > {hi})")
    if (record.repot_repair_calls is not None) != (config.method in REPOT_METHODS):
        raise AssertionError(f"{record.problem_id}: repot fields set for method {config.method}")


# -- suite controller -----------------------------------------------------------------------


@dataclass
class SuiteSummary:
    counts: dict[tuple[str, int], tuple[int, int]]  # (env, complexity) -> (successes, total)
    n_records: int
    n_exceptions: int

    def success_rate(self) -> float | None:
        total = sum(t for _, t in self.counts.values())
        return None if total == 0 else sum(s for s, _ in self.counts.values()) / total


def summarize(records: Sequence[TraceRecord]) -> SuiteSummary:
    acc: dict[tuple[str, int], list[int]] = defaultdict(lambda: [0, 0])
    for r in records:
        cell = acc[(r.environment, r.complexity)]
        cell[0] += int(r.success)
        cell[1] += 1
    return SuiteSummary(
        {k: (v[0], v[1]) for k, v in sorted(acc.items())},
        len(records),
        sum(1 for r in records if r.runner_exception),
    )


def _safe_run(runner: Runner, instance: Any, config: MethodConfig, seed: int) -> TraceRecord:
    try:
        return run_method(runner, instance, config, seed)
    except Exception as exc:  # controller keeps the denominator stable
        log.exception("problem %s crashed", instance.problem_id)
        return TraceRecord(
            problem_id=instance.problem_id,
            method=config.method,
            success=False,
            repot_repair_calls=0 if config.method in REPOT_METHODS else None,
            repot_initial_pot_success=False if config.method in REPOT_METHODS else None,
            runner_exception=f"{exc.__class__.__name__}: {exc}",
            seed=seed,
            environment=instance.environment,
            complexity=instance.complexity,
            model=runner.model_name,
        )


def run_suite(
    instances: Sequence[Any],
    config: MethodConfig,
    runner: Runner,
    parallelism: int = 1,
    sink: TraceSink | None = None,
    seed: int = 0,
) -> tuple[list[TraceRecord], SuiteSummary]:
    """Run ``config.method`` on every instance; one record each, in input order.

    Problems run concurrently but each problem's calls are sequential. A sink
    write failure aborts the run.
    """
    records: list[TraceRecord | None] = [None] * len(instances)
    if parallelism <= 1:
        for i, inst in enumerate(instances):
            records[i] = _safe_run(runner, inst, config, seed)
            if sink is not None:
                sink.write(records[i])
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = [pool.submit(_safe_run, runner, inst, config, seed) for inst in instances]
            try:
                for i, fut in enumerate(futures):
                    records[i] = fut.result()
                    if sink is not None:
                        sink.write(records[i])
            except BaseException:
                for f in futures:
                    f.cancel()
                raise
    done = [r for r in records if r is not None]
    return done, summarize(done)
