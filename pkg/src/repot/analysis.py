"""Statistics over trace records.

Everything here is a pure function of ``TraceRecord`` lists. Rates that would
be computed over an empty set are returned as ``None`` instead of 0.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .traces import ROUTES, TraceRecord


def _rate(num: int, den: int) -> Fraction | None:
    return None if den == 0 else Fraction(num, den)


def pct(x: Fraction | float | None, digits: int = 1) -> str:
    return "-" if x is None else f"{100 * float(x):.{digits}f}"


# -- success tables ------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    successes: int
    total: int

    @property
    def rate(self) -> float | None:
        return None if self.total == 0 else self.successes / self.total

    @property
    def percent(self) -> float | None:
        return None if self.total == 0 else 100.0 * self.successes / self.total


def success_table(traces: Iterable[TraceRecord]) -> dict[tuple[str, str, str, int], Cell]:
    """Success per ``(model, method, environment, complexity)``.

    Records with a runner exception are failures that stay in the denominator.
    """
    acc: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
    for t in traces:
        cell = acc[(t.model, t.method, t.environment, t.complexity)]
        cell[0] += int(t.success and not t.runner_exception)
        cell[1] += 1
    return {k: Cell(*v) for k, v in sorted(acc.items())}


def method_table(traces: Iterable[TraceRecord]) -> dict[tuple[str, str], Cell]:
    """Success per ``(model, method)``, pooled over environments."""
    acc: dict[tuple, list[int]] = defaultdict(lambda: [0, 0])
    for t in traces:
        cell = acc[(t.model, t.method)]
        cell[0] += int(t.success and not t.runner_exception)
        cell[1] += 1
    return {k: Cell(*v) for k, v in sorted(acc.items())}


def delta_table(
    traces: Sequence[TraceRecord], method_a: str = "repot", method_b: str = "pot_retry"
) -> dict[tuple[str, str], tuple[float | None, int]]:
    """Per ``(model, environment)`` difference in success percentage, plus an
    ``"all"`` row per model pooled over environments. Values are ``(delta_pp, n)``."""
    acc: dict[tuple[str, str, str], list[int]] = defaultdict(lambda: [0, 0])
    for t in traces:
        if t.method in (method_a, method_b):
            for env in (t.environment, "all"):
                cell = acc[(t.model, env, t.method)]
                cell[0] += int(t.success and not t.runner_exception)
                cell[1] += 1
    out = {}
    for model, env in sorted({(m, e) for m, e, _ in acc}):
        a = acc.get((model, env, method_a), [0, 0])
        b = acc.get((model, env, method_b), [0, 0])
        if a[1] == 0 or b[1] == 0:
            out[(model, env)] = (None, max(a[1], b[1]))
        else:
            out[(model, env)] = (100.0 * (a[0] / a[1] - b[0] / b[1]), a[1])
    return out


# -- paired bootstrap ----------------------------------------------------------------------


@dataclass(frozen=True)
class PairedSample:
    ids: tuple[str, ...]
    a: tuple[bool, ...]
    b: tuple[bool, ...]

    def __post_init__(self) -> None:
        if not len(self.ids) == len(self.a) == len(self.b):
            raise ValueError("paired sample arms have different lengths")

    @property
    def n(self) -> int:
        return len(self.ids)

    @classmethod
    def from_outcomes(cls, a: dict[str, bool], b: dict[str, bool]) -> PairedSample:
        if set(a) != set(b):
            missing = sorted(set(a) ^ set(b))
            raise ValueError(f"arms are not aligned; unmatched problem ids: {missing[:5]}")
        ids = tuple(sorted(a))
        return cls(ids, tuple(bool(a[i]) for i in ids), tuple(bool(b[i]) for i in ids))


def paired_sample(
    traces: Sequence[TraceRecord], method_a: str, method_b: str, model: str | None = None
) -> PairedSample:
    arms: dict[str, dict[str, bool]] = {method_a: {}, method_b: {}}
    for t in traces:
        if t.method in arms and (model is None or t.model == model):
            if t.problem_id in arms[t.method]:
                raise ValueError(f"duplicate record for {t.problem_id} under {t.method}")
            arms[t.method][t.problem_id] = t.success and not t.runner_exception
    return PairedSample.from_outcomes(arms[method_a], arms[method_b])


@dataclass(frozen=True)
class BootstrapCI:
    delta: float
    lo: float
    hi: float
    B: int
    exhaustive: bool

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _percentiles(values: np.ndarray, level: float) -> tuple[float, float]:
    alpha = (1 - level) / 2
    lo, hi = np.quantile(values, [alpha, 1 - alpha])
    return float(lo), float(hi)


def paired_bootstrap_ci(
    sample: PairedSample, B: int = 10_000, level: float = 0.95, seed: int = 0
) -> BootstrapCI:
    """Percentile CI for ``mean(a) - mean(b)`` in percentage points.

    Problem indices are resampled with replacement. Each resample's delta depends
    only on how many times each distinct per-problem difference (-1, 0, +1) is
    drawn, so counts are drawn from the equivalent multinomial. When ``n ** n <= B``
    all resamples are enumerated instead and the interval is exact.
    """
    n = sample.n
    if n == 0:
        raise ValueError("paired bootstrap needs at least one pair")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    d = np.array(sample.a, dtype=float) - np.array(sample.b, dtype=float)
    delta = 100.0 * float(d.mean())
    if n ** n <= B:
        deltas = np.array([100.0 * float(d[list(idx)].mean()) for idx in product(range(n), repeat=n)])
        lo, hi = _percentiles(deltas, level)
        return BootstrapCI(delta, lo, hi, len(deltas), True)
    values, counts = np.unique(d, return_counts=True)
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(n, counts / n, size=B)
    deltas = 100.0 * (draws @ values) / n
    lo, hi = _percentiles(deltas, level)
    return BootstrapCI(delta, lo, hi, B, False)


# -- recovery model -------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryParams:
    p: float | Fraction
    q: float | Fraction
    r: float | Fraction
    b: float | Fraction
    b_prime: float | Fraction

    def __post_init__(self) -> None:
        for name in ("p", "q", "r", "b", "b_prime"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.p + self.q > 1:
            raise ValueError(f"p + q must not exceed 1 (got {self.p} + {self.q})")
        if self.b_prime > self.b:
            raise ValueError(f"b_prime must not exceed b (got {self.b_prime} > {self.b})")


def eq2_margin(params: RecoveryParams):
    p, q, r, b, bp = params.p, params.q, params.r, params.b, params.b_prime
    return q * (r - b) - (1 - p - q) * (b - bp)


def eq2_evaluate(params: RecoveryParams) -> tuple[bool, float | Fraction]:
    """``(holds, margin)`` for the repair-versus-resample condition.

    Fraction inputs give an exact Fraction margin.
    """
    m = eq2_margin(params)
    return m > 0, m


@dataclass(frozen=True)
class Eq2Estimate:
    """Sample estimates with the size of each conditioning set."""

    p: Fraction | None
    q: Fraction | None
    r: Fraction | None
    b: Fraction | None
    b_prime: Fraction | None
    n_repot: int
    n_recoverable: int
    n_retry_failed: int
    n_retry_failed_empty: int

    def params(self) -> RecoveryParams:
        missing = [k for k in ("p", "q", "r", "b", "b_prime") if getattr(self, k) is None]
        if missing:
            raise ValueError(f"undefined parameters (empty conditioning sets): {missing}")
        return RecoveryParams(self.p, self.q, self.r, self.b, self.b_prime)


def _initial(t: TraceRecord):
    return t.attempts[0] if t.attempts else None


def eq2_estimate(traces: Sequence[TraceRecord], model: str | None = None) -> Eq2Estimate:
    """Estimate p, q, r from repot records and b, b' from pot_retry records.

    A failed initial plan is recoverable when its verified prefix is non-empty.
    """
    rep = [t for t in traces if t.method == "repot" and (model is None or t.model == model)]
    ret = [t for t in traces if t.method == "pot_retry" and (model is None or t.model == model)]
    n = len(rep)
    p_count = sum(1 for t in rep if t.repot_initial_pot_success)
    recoverable = [
        t for t in rep
        if not t.repot_initial_pot_success and _initial(t) is not None and _initial(t).verified_prefix_len > 0
    ]
    r_count = sum(1 for t in recoverable if t.success)
    failed = [t for t in ret if _initial(t) is not None and not _initial(t).goal_reached]
    empty = [t for t in failed if _initial(t).verified_prefix_len == 0]
    return Eq2Estimate(
        p=_rate(p_count, n),
        q=_rate(len(recoverable), n),
        r=_rate(r_count, len(recoverable)),
        b=_rate(sum(1 for t in failed if t.success), len(failed)),
        b_prime=_rate(sum(1 for t in empty if t.success), len(empty)),
        n_repot=n,
        n_recoverable=len(recoverable),
        n_retry_failed=len(failed),
        n_retry_failed_empty=len(empty),
    )


# -- cost ----------------------------------------------------------------------------------


@dataclass(frozen=True)
class CostRow:
    n: int
    mean_tokens_in: float
    median_tokens_in: float
    mean_tokens_out: float
    median_tokens_out: float
    mean_calls: float
    mean_wall_ms: float


def cost_decomposition(traces: Iterable[TraceRecord]) -> dict[tuple[str, str], CostRow]:
    """Per ``(model, method)`` costs; tokens are summed per problem before averaging."""
    groups: dict[tuple[str, str], list[TraceRecord]] = defaultdict(list)
    for t in traces:
        groups[(t.model, t.method)].append(t)
    out = {}
    for key, rows in sorted(groups.items()):
        tin = [sum(c.prompt_tokens for c in t.llm_calls) for t in rows]
        tout = [sum(c.completion_tokens for c in t.llm_calls) for t in rows]
        calls = [len(t.llm_calls) for t in rows]
        out[key] = CostRow(
            n=len(rows),
            mean_tokens_in=sum(tin) / len(rows),
            median_tokens_in=float(median(tin)),
            mean_tokens_out=sum(tout) / len(rows),
            median_tokens_out=float(median(tout)),
            mean_calls=sum(calls) / len(rows),
            mean_wall_ms=sum(t.wall_ms for t in rows) / len(rows),
        )
    return out


# -- prefix-fraction regression -------------------------------------------------------------


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    n_used: int
    skipped: tuple[int, ...]


def prefix_fraction_regression(cells: Sequence[tuple[float | None, float]]) -> Regression:
    """Ordinary least squares of ``y`` on ``x``; cells with ``x is None`` are skipped."""
    used = [(float(x), float(y)) for x, y in cells if x is not None]
    skipped = tuple(i for i, (x, _) in enumerate(cells) if x is None)
    if len(used) < 2:
        raise ValueError(f"regression needs at least two cells with defined x, got {len(used)}")
    xs = np.array([u[0] for u in used])
    ys = np.array([u[1] for u in used])
    xbar, ybar = xs.mean(), ys.mean()
    sxx = float(((xs - xbar) ** 2).sum())
    if sxx == 0:
        raise ValueError("regression is underdetermined: all x values are equal")
    slope = float(((xs - xbar) * (ys - ybar)).sum()) / sxx
    return Regression(slope, float(ybar - slope * xbar), len(used), skipped)


def regression_cells(
    traces: Sequence[TraceRecord], by: str = "environment"
) -> dict[tuple[str, str], tuple[float | None, float | None]]:
    """Per ``(model, group)``: mean verified-prefix fraction over failed initial repot
    plans (non-empty ones) and the repot minus pot_retry success delta in points."""
    fr: dict[tuple[str, str], list[float]] = defaultdict(list)
    for t in traces:
        if t.method == "repot" and not t.repot_initial_pot_success:
            a = _initial(t)
            if a is not None and a.plan_len > 0:
                fr[(t.model, getattr(t, by))].append(a.verified_prefix_len / a.plan_len)
    deltas = delta_table([t for t in traces], "repot", "pot_retry") if by == "environment" else {}
    keys = {(t.model, getattr(t, by)) for t in traces if t.method in ("repot", "pot_retry")}
    out = {}
    for k in sorted(keys):
        x = sum(fr[k]) / len(fr[k]) if fr[k] else None
        out[k] = (x, deltas.get(k, (None, 0))[0])
    return out


# -- mechanism subset and routing -------------------------------------------------------------


@dataclass(frozen=True)
class MechanismRow:
    n: int
    repot: float | None
    retry: float | None

    @property
    def delta(self) -> float | None:
        if self.repot is None or self.retry is None:
            return None
        return self.repot - self.retry


def paired_mechanism_subset(traces: Sequence[TraceRecord]) -> dict[str, MechanismRow]:
    """Per model, restricted to problems where both first attempts failed."""
    by_model: dict[str, dict[str, dict[str, TraceRecord]]] = defaultdict(lambda: {"repot": {}, "pot_retry": {}})
    for t in traces:
        if t.method in ("repot", "pot_retry"):
            by_model[t.model][t.method][t.problem_id] = t
    out = {}
    for model, arms in sorted(by_model.items()):
        ids = []
        for pid in sorted(set(arms["repot"]) & set(arms["pot_retry"])):
            rp, rt = arms["repot"][pid], arms["pot_retry"][pid]
            a0 = _initial(rt)
            if not rp.repot_initial_pot_success and a0 is not None and not a0.goal_reached:
                ids.append(pid)
        n = len(ids)
        rs = sum(arms["repot"][i].success for i in ids)
        ts = sum(arms["pot_retry"][i].success for i in ids)
        out[model] = MechanismRow(n, None if n == 0 else 100.0 * rs / n, None if n == 0 else 100.0 * ts / n)
    return out


def routing_histogram(traces: Iterable[TraceRecord]) -> dict[str, Counter]:
    """Route counts per model over ``adaptive_repot`` records (others are ignored).

    Records that crashed before routing count as ``runner_exception``.
    """
    out: dict[str, Counter] = defaultdict(Counter)
    for t in traces:
        if t.method != "adaptive_repot":
            continue
        route = t.route_taken
        if route is None and t.runner_exception:
            route = "runner_exception"
        elif route not in ROUTES:
            raise ValueError(f"{t.problem_id}: unknown route {route!r}")
        out[t.model][route] += 1
    return dict(out)


# -- emitters ------------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.2f}"
    if isinstance(v, Fraction):
        return f"{float(v):.4f}"
    return str(v)


def format_table(headers: Sequence[str], rows: Sequence[Sequence]) -> str:
    """Aligned plain-text table; text columns left-aligned, everything else right."""
    cells = [[_fmt(v) for v in r] for r in rows]
    widths = [max([len(h)] + [len(r[i]) for r in cells]) for i, h in enumerate(headers)]
    numeric = [all(not isinstance(r[i], str) for r in rows) if rows else False for i in range(len(headers))]

    def line(vals):
        return "  ".join(v.rjust(w) if num else v.ljust(w) for v, w, num in zip(vals, widths, numeric)).rstrip()

    return "\n".join([line(headers), line(["-" * w for w in widths])] + [line(r) for r in cells])


def write_csv(path: str | Path, headers: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(headers)
        for r in rows:
            w.writerow(["" if v is None else (float(v) if isinstance(v, Fraction) else v) for v in r])


def success_rows(traces: Sequence[TraceRecord]) -> tuple[list[str], list[list]]:
    headers = ["model", "method", "environment", "complexity", "successes", "n", "success_pct"]
    rows = [[*k, c.successes, c.total, c.percent] for k, c in success_table(traces).items()]
    return headers, rows


def cost_rows(traces: Sequence[TraceRecord]) -> tuple[list[str], list[list]]:
    headers = ["model", "method", "n", "mean_in", "median_in", "mean_out", "median_out", "mean_calls", "mean_wall_ms"]
    rows = [
        [m, meth, r.n, r.mean_tokens_in, r.median_tokens_in, r.mean_tokens_out, r.median_tokens_out,
         r.mean_calls, r.mean_wall_ms]
        for (m, meth), r in cost_decomposition(traces).items()
    ]
    return headers, rows


def mechanism_rows(traces: Sequence[TraceRecord]) -> tuple[list[str], list[list]]:
    headers = ["model", "N", "repot_pct", "retry_pct", "delta_pp"]
    rows = [[m, r.n, r.repot, r.retry, r.delta] for m, r in paired_mechanism_subset(traces).items()]
    return headers, rows


def delta_rows(traces: Sequence[TraceRecord], a: str = "repot", b: str = "pot_retry") -> tuple[list[str], list[list]]:
    headers = ["model", "environment", "n", f"{a}_minus_{b}_pp"]
    rows = [[m, e, n, d] for (m, e), (d, n) in delta_table(traces, a, b).items()]
    return headers, rows


def ci_summary(ci: BootstrapCI) -> str:
    return f"{ci.delta:+.1f} [{ci.lo:+.1f}, {ci.hi:+.1f}]"

