"""Read PDDL Blocksworld problem files into suite instances.

Only the Blocksworld fragment is understood:

    (define (problem NAME) (:domain D)
      (:objects a b c [- block])
      (:init ATOM*)
      (:goal (and ATOM*) | ATOM))

with ATOM one of ``(on x y)``, ``(on-table x)`` / ``(ontable x)``, ``(clear x)``,
``(holding x)``, ``(arm-empty)`` / ``(handempty)``. ``;`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .envs import BlocksGoal, BlocksState, InvalidStateError, get_env
from .envs.blocksworld import Atom
from .zoo import ProblemInstance
from .prompts import problem_statement

PREDICATE_SYNONYMS = {
    "on": "on",
    "on-table": "on_table",
    "ontable": "on_table",
    "on_table": "on_table",
    "clear": "clear",
    "holding": "holding",
    "arm-empty": "arm_empty",
    "armempty": "arm_empty",
    "arm_empty": "arm_empty",
    "handempty": "arm_empty",
    "hand-empty": "arm_empty",
}
ARITY = {"on": 2, "on_table": 1, "clear": 1, "holding": 1, "arm_empty": 0}

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


class PDDLError(ValueError):
    pass


@dataclass
class SplitLoadError(ValueError):
    errors: list[tuple[str, str]]

    def __str__(self) -> str:
        lines = [f"{len(self.errors)} file(s) failed to parse:"]
        lines += [f"  {path}: {msg}" for path, msg in self.errors]
        return "\n".join(lines)


def _tokens(text: str) -> list[str]:
    text = "\n".join(line.split(";", 1)[0] for line in text.splitlines())
    return _TOKEN.findall(text.lower())


def parse_sexpr(text: str) -> list:
    toks = _tokens(text)
    if not toks:
        raise PDDLError("empty input")
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(toks):
            raise PDDLError("unexpected end of input (unbalanced parentheses)")
        tok = toks[pos]
        pos += 1
        if tok == ")":
            raise PDDLError("unexpected ')'")
        if tok != "(":
            return tok
        out = []
        while True:
            if pos >= len(toks):
                raise PDDLError("unexpected end of input (unbalanced parentheses)")
            if toks[pos] == ")":
                pos += 1
                return out
            out.append(read())

    expr = read()
    if pos != len(toks):
        raise PDDLError(f"trailing tokens after the problem: {' '.join(toks[pos:pos + 5])}")
    if not isinstance(expr, list):
        raise PDDLError("expected a parenthesized (define ...) form")
    return expr


def _atom(expr) -> Atom:
    if not isinstance(expr, list) or not expr or not isinstance(expr[0], str):
        raise PDDLError(f"malformed atom {expr!r}")
    name = PREDICATE_SYNONYMS.get(expr[0])
    if name is None:
        raise PDDLError(f"unknown predicate {expr[0]!r}")
    args = expr[1:]
    if len(args) != ARITY[name] or not all(isinstance(a, str) for a in args):
        raise PDDLError(f"predicate {expr[0]} takes {ARITY[name]} argument(s), got {args!r}")
    return (name, *args)


def _objects(items: list) -> list[str]:
    out = []
    skip = False
    for tok in items:
        if skip:
            skip = False
            continue
        if tok == "-":
            skip = True
            continue
        if not isinstance(tok, str):
            raise PDDLError(f"malformed :objects entry {tok!r}")
        out.append(tok)
    return out


def _goal_atoms(expr) -> list[Atom]:
    if isinstance(expr, list) and expr and expr[0] == "and":
        return [_atom(e) for e in expr[1:]]
    return [_atom(expr)]


def parse_pddl_problem(text: str, problem_id: str | None = None) -> ProblemInstance:
    """Parse one problem file. The result carries no oracle plan."""
    expr = parse_sexpr(text)
    if not expr or expr[0] != "define":
        raise PDDLError("expected (define ...)")
    name = None
    objects: list[str] | None = None
    init: list[Atom] | None = None
    goal: list[Atom] | None = None
    for part in expr[1:]:
        if not isinstance(part, list) or not part:
            raise PDDLError(f"unexpected element {part!r} in define")
        head = part[0]
        if head == "problem" and len(part) == 2:
            name = part[1]
        elif head == ":domain":
            continue
        elif head == ":objects":
            objects = _objects(part[1:])
        elif head == ":init":
            init = [_atom(a) for a in part[1:]]
        elif head == ":goal":
            if len(part) != 2:
                raise PDDLError(":goal must hold exactly one formula")
            goal = _goal_atoms(part[1])
        elif head == ":requirements":
            continue
        else:
            raise PDDLError(f"unsupported section {head!r}")
    if init is None or goal is None:
        raise PDDLError("problem needs both :init and :goal")
    state = BlocksState(tuple(sorted(set(init))))
    env = get_env("blocksworld")
    env.validate_state(state)
    placed = set(state.blocks)
    for obj in objects or []:
        if obj not in placed:
            raise InvalidStateError(f"block {obj} has no position in :init")
    unknown = sorted({b for a in goal for b in a[1:]} - placed)
    if unknown:
        raise PDDLError(f"goal mentions undeclared blocks {unknown}")
    goal_obj = BlocksGoal(tuple(goal))
    pid = problem_id or name or "pddl-problem"
    return ProblemInstance(
        problem_id=pid,
        environment="blocksworld",
        complexity=len(placed),
        initial_state=state,
        goal=goal_obj,
        natural_language_prompt=problem_statement("blocksworld", state, goal_obj),
    )


def load_planbench_split(directory: str | Path, pattern: str = "*.pddl") -> list[ProblemInstance]:
    """Every matching file in filename order; ids are the file stems.

    All parse failures are collected and raised together.
    """
    root = Path(directory)
    if not root.is_dir():
        raise NotADirectoryError(f"{root} is not a directory")
    out = []
    errors = []
    for path in sorted(root.glob(pattern), key=lambda p: p.name):
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            errors.append((str(path), f"unreadable: {exc}"))
            continue
        try:
            out.append(parse_pddl_problem(text, problem_id=path.stem))
        except ValueError as exc:
            errors.append((str(path), str(exc)))
    if errors:
        raise SplitLoadError(errors)
    return out


def attach_oracle(instances: list[ProblemInstance]) -> list[ProblemInstance]:
    """Fill in oracle plans; raises if any instance is unsolvable."""
    from .oracle import solve

    for inst in instances:
        plan = solve(inst)
        if plan is None:
            raise PDDLError(f"{inst.problem_id}: goal is unreachable")
        inst.oracle_plan = plan
        inst.oracle_plan_length = len(plan)
    return instances


def _pddl_atom(atom: Atom) -> str:
    name = {"on_table": "ontable", "arm_empty": "handempty"}.get(atom[0], atom[0])
    return "(" + " ".join((name, *atom[1:])) + ")"


def to_pddl(state: BlocksState, goal: BlocksGoal, name: str = "bw") -> str:
    """Render a problem in the PlanBench file layout (used to build fixtures)."""
    init = "\n".join(_pddl_atom(a) for a in state.atoms)
    goals = "\n".join(_pddl_atom(a) for a in goal.atoms)
    return (
        f"(define (problem {name})\n(:domain blocksworld-4ops)\n"
        f"(:objects {' '.join(state.blocks)} )\n(:init\n{init}\n)\n(:goal\n(and\n{goals})\n)\n)\n"
    )
