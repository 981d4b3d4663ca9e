"""Verifier-backed planning harness.

Deterministic puzzle environments, verified plan replay, model-driven planning
methods with checkpointed repair, an injected-error recovery benchmark and the
statistics used to compare them.
"""

from __future__ import annotations

from .envs import ENV_IDS, get_env
from .methods import MethodConfig, Runner, run_method, run_suite
from .oracle import solve
from .replay import ReplayOutcome, replay
from .zoo import ProblemInstance, StratificationPlan, generate_suite, read_suite, write_suite

__version__ = "0.1.0"

__all__ = [
    "ENV_IDS",
    "MethodConfig",
    "ProblemInstance",
    "ReplayOutcome",
    "Runner",
    "StratificationPlan",
    "generate_suite",
    "get_env",
    "read_suite",
    "replay",
    "run_method",
    "run_suite",
    "solve",
    "write_suite",
]
