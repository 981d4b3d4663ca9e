"""Per-problem trace records and their JSONL file format.

A trace file starts with one header line (``{"kind": "header", ...}``) holding
the resolved run configuration and seed; every following line is one
``TraceRecord``. Readers accept files without a header.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import IO, Any, Iterable

TRACE_VERSION = 1

LLM_CALL_FIELDS = ("prompt", "output_text", "prompt_tokens", "completion_tokens", "latency_ms")

REPOT_METHODS = ("repot", "adaptive_repot")

ROUTES = ("initial_success", "fresh_retry_empty", "fresh_retry_short_prefix", "suffix_repair")


class TraceFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class LLMCall:
    prompt: str
    output_text: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: int


@dataclass
class Attempt:
    """One model call's plan as seen by the verifier.

    ``kind`` is ``initial``, ``retry``, ``repair`` or ``sample``. Indices are
    relative to the state the attempt started from.
    """

    kind: str
    plan_len: int
    verified_prefix_len: int
    failure_index: int
    goal_reached: bool
    extraction_error: str | None = None


@dataclass
class TraceRecord:
    problem_id: str
    method: str
    success: bool
    llm_calls: list[LLMCall] = field(default_factory=list)
    repot_repair_calls: int | None = None
    repot_initial_pot_success: bool | None = None
    verified_prefix_len: int = 0
    plan_len: int = 0
    first_failure_index: int | None = None
    verifier_error: str | None = None
    runner_exception: str | None = None
    wall_ms: int = 0
    seed: int = 0
    # Fields beyond the core schema; analysis relies on them for routing and per-environment tables.
    environment: str = ""
    complexity: int = 0
    model: str = ""
    route_taken: str | None = None
    attempts: list[Attempt] = field(default_factory=list)
    verified_plan: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, row: dict) -> TraceRecord:
        validate_row(row)
        data = dict(row)
        data["llm_calls"] = [LLMCall(**c) for c in row["llm_calls"]]
        data["attempts"] = [Attempt(**a) for a in row.get("attempts", [])]
        return cls(**data)

    @property
    def n_calls(self) -> int:
        return len(self.llm_calls)


RECORD_FIELDS = tuple(f.name for f in fields(TraceRecord))
ATTEMPT_FIELDS = tuple(f.name for f in fields(Attempt))

# Documented schema: field -> allowed JSON types.
SCHEMA: dict[str, tuple[type, ...]] = {
    "problem_id": (str,),
    "method": (str,),
    "success": (bool,),
    "llm_calls": (list,),
    "repot_repair_calls": (int, type(None)),
    "repot_initial_pot_success": (bool, type(None)),
    "verified_prefix_len": (int,),
    "plan_len": (int,),
    "first_failure_index": (int, type(None)),
    "verifier_error": (str, type(None)),
    "runner_exception": (str, type(None)),
    "wall_ms": (int,),
    "seed": (int,),
    "environment": (str,),
    "complexity": (int,),
    "model": (str,),
    "route_taken": (str, type(None)),
    "attempts": (list,),
    "verified_plan": (list,),
}


def _is(value: Any, types: tuple[type, ...]) -> bool:
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def validate_row(row: dict) -> None:
    """Check a decoded record against the schema; raises ``TraceFormatError``."""
    if not isinstance(row, dict):
        raise TraceFormatError("record is not a JSON object")
    keys = set(row)
    missing = set(SCHEMA) - keys
    unknown = keys - set(SCHEMA)
    if missing:
        raise TraceFormatError(f"missing fields: {sorted(missing)}")
    if unknown:
        raise TraceFormatError(f"unknown fields: {sorted(unknown)}")
    for name, types in SCHEMA.items():
        if not _is(row[name], types):
            raise TraceFormatError(f"field {name!r} has type {type(row[name]).__name__}")
    for call in row["llm_calls"]:
        if not isinstance(call, dict) or set(call) != set(LLM_CALL_FIELDS):
            raise TraceFormatError(f"llm_calls entry must have exactly {LLM_CALL_FIELDS}")
    for att in row["attempts"]:
        if not isinstance(att, dict) or set(att) != set(ATTEMPT_FIELDS):
            raise TraceFormatError(f"attempts entry must have exactly {ATTEMPT_FIELDS}")
    if row["success"] and row["runner_exception"]:
        raise TraceFormatError("successful record carries a runner_exception")
    if row["route_taken"] is not None and row["route_taken"] not in ROUTES:
        raise TraceFormatError(f"unknown route {row['route_taken']!r}")


class TraceSink:
    """Thread-safe JSONL appender. Write errors propagate to the caller."""

    def __init__(self, target: str | Path | IO[str], header: dict | None = None) -> None:
        if isinstance(target, (str, Path)):
            self._fh = open(target, "w", encoding="utf-8")
            self._owned = True
        else:
            self._fh = target
            self._owned = False
        self._lock = threading.Lock()
        self.count = 0
        if header is not None:
            self._write({"kind": "header", "trace_version": TRACE_VERSION, **header})

    def _write(self, obj: dict) -> None:
        line = json.dumps(obj, ensure_ascii=False, sort_keys=False)
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()

    def write(self, record: TraceRecord) -> None:
        self._write(record.to_json())
        self.count += 1

    def close(self) -> None:
        if self._owned:
            self._fh.close()

    def __enter__(self) -> TraceSink:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_traces(records: Iterable[TraceRecord], path: str | Path, header: dict | None = None) -> None:
    with TraceSink(path, header) as sink:
        for r in records:
            sink.write(r)


def read_traces(path: str | Path) -> tuple[dict | None, list[TraceRecord]]:
    """Return ``(header, records)``. Any malformed line raises with its line number."""
    header = None
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"malformed JSON ({exc.msg})", lineno) from None
            if isinstance(row, dict) and row.get("kind") == "header":
                if lineno != 1 and records:
                    raise TraceFormatError("header after records", lineno)
                header = row
                continue
            try:
                records.append(TraceRecord.from_json(row))
            except TraceFormatError as exc:
                raise TraceFormatError(str(exc), lineno) from None
            except TypeError as exc:
                raise TraceFormatError(f"bad record: {exc}", lineno) from None
    return header, records
