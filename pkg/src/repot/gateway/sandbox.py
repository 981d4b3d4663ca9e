"""Run model-written programs in an isolated child interpreter.

The child starts in an empty temporary directory with a scrubbed environment,
POSIX resource limits and an audit hook that refuses sockets, subprocesses
and filesystem access outside the temp dir and the interpreter's own library
paths. This guards against accidents, not a determined adversary (ctypes is
not blocked).
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

try:
    import resource
except ImportError:  # pragma: no cover - non-POSIX
    resource = None


class SandboxConfigError(RuntimeError):
    pass


@dataclass(frozen=True)
class SandboxLimits:
    wall_ms: int = 10_000
    mem_bytes: int = 1 << 30


@dataclass(frozen=True)
class SandboxResult:
    stdout: str
    exit_status: int
    timed_out: bool
    stderr: str = ""


_GUARD = r'''
import os, sys, sysconfig, runpy

_root = os.path.realpath(os.getcwd())
_allowed = [_root]
for _k in ("stdlib", "platstdlib", "purelib", "platlib"):
    _p = sysconfig.get_paths().get(_k)
    if _p:
        _allowed.append(os.path.realpath(_p))
_allowed = tuple(_allowed)
_program = os.path.join(_root, "program.py")
_blocked = ("socket.", "subprocess.", "os.system", "os.exec", "os.posix_spawn", "os.spawn", "os.fork", "os.kill", "pty.")

def _inside(path):
    if isinstance(path, int):
        return True
    if isinstance(path, bytes):
        path = os.fsdecode(path)
    full = os.path.realpath(os.path.join(_root, path))
    return full == "/dev/null" or any(full == a or full.startswith(a + os.sep) for a in _allowed)

def _writable(path):
    if isinstance(path, int):
        return True
    if isinstance(path, bytes):
        path = os.fsdecode(path)
    full = os.path.realpath(os.path.join(_root, path))
    return full == "/dev/null" or full == _root or full.startswith(_root + os.sep)

def _hook(event, args):
    if event.startswith(_blocked):
        raise PermissionError(f"sandbox: {event} is not allowed")
    if event == "open":
        path, mode = args[0], args[1]
        write = isinstance(mode, str) and any(c in mode for c in "wax+")
        if path is not None and not (_writable(path) if write else _inside(path)):
            raise PermissionError(f"sandbox: access to {path!r} is not allowed")
    elif event in ("os.listdir", "os.scandir", "os.chdir"):
        path = args[0] if args else "."
        if path is not None and not _inside(path):
            raise PermissionError(f"sandbox: access to {path!r} is not allowed")
    elif event in ("os.remove", "os.rename", "os.rmdir", "os.mkdir", "os.symlink", "os.link", "os.truncate"):
        for p in args[:2]:
            if isinstance(p, (str, bytes)) and not _writable(p):
                raise PermissionError(f"sandbox: access to {p!r} is not allowed")

sys.addaudithook(_hook)
sys.argv = [_program]
runpy.run_path(_program, run_name="__main__")
'''


class Sandbox:
    """Executes code with wall-clock and memory limits.

    ``max_concurrent`` caps simultaneous child processes across threads.
    """

    def __init__(
        self,
        interpreter: str | None = None,
        limits: SandboxLimits | None = None,
        max_concurrent: int = 4,
    ) -> None:
        interpreter = interpreter or sys.executable
        found = shutil.which(interpreter) if os.sep not in interpreter else interpreter
        if not found or not os.access(found, os.X_OK):
            raise SandboxConfigError(f"sandbox interpreter not found: {interpreter!r}")
        self.interpreter = found
        self.limits = limits or SandboxLimits()
        self._slots = threading.BoundedSemaphore(max(1, max_concurrent))

    def _preexec(self, limits: SandboxLimits):
        def apply() -> None:
            os.setsid()
            if resource is None:
                return
            cpu = max(1, -(-limits.wall_ms // 1000) + 1)
            resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu))
            resource.setrlimit(resource.RLIMIT_AS, (limits.mem_bytes, limits.mem_bytes))
            resource.setrlimit(resource.RLIMIT_FSIZE, (16 << 20, 16 << 20))
            resource.setrlimit(resource.RLIMIT_CORE, (0, 0))

        return apply

    def execute(self, code: str, limits: SandboxLimits | None = None) -> SandboxResult:
        limits = limits or self.limits
        with self._slots, tempfile.TemporaryDirectory(prefix="repot-sbx-") as tmp:
            Path(tmp, "program.py").write_text(code, encoding="utf-8")
            guard = Path(tmp, "_guard.py")
            guard.write_text(_GUARD, encoding="utf-8")
            env = {"PATH": "/usr/bin:/bin", "HOME": tmp, "PYTHONHASHSEED": "0", "PYTHONIOENCODING": "utf-8"}
            proc = subprocess.Popen(
                [self.interpreter, "-I", "-B", str(guard)],
                cwd=tmp,
                env=env,
                stdin=subprocess.DEVNULL,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                preexec_fn=self._preexec(limits),
            )
            try:
                out, err = proc.communicate(timeout=limits.wall_ms / 1000)
                timed_out = False
            except subprocess.TimeoutExpired:
                try:
                    os.killpg(proc.pid, signal.SIGKILL)
                except ProcessLookupError:
                    pass
                out, err = proc.communicate()
                timed_out = True
        return SandboxResult(
            stdout=out.decode("utf-8", "replace"),
            exit_status=proc.returncode,
            timed_out=timed_out,
            stderr=err.decode("utf-8", "replace"),
        )


_default: Sandbox | None = None


def default_sandbox() -> Sandbox:
    global _default
    if _default is None:
        _default = Sandbox()
    return _default


def execute_program(code: str, limits: SandboxLimits | None = None, sandbox: Sandbox | None = None) -> SandboxResult:
    return (sandbox or default_sandbox()).execute(code, limits)
