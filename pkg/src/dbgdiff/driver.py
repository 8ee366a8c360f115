"""Trace extraction by single-stepping a binary under gdb's machine interface.

The session breaks on the entry symbol, runs, and then issues source-line
``step`` commands until the inferior exits.  At every stop it records the
line, the backtrace (as a set of bare function names) and the variables of the
innermost frame.
"""
from __future__ import annotations

import enum
import logging
import os
import re
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .mi import GdbMi, MiClosed, MiProtocolError, MiTimeout
from .trace import BOTTOM, OPTIMIZED_OUT, Step, Trace, VariableObservation, VarKind, canonical_value

log = logging.getLogger(__name__)

DEFAULT_STEP_LIMIT = 50_000
DEFAULT_TIMEOUT = 10.0
OPTIMIZED_OUT_MARKERS = frozenset({"<optimized out>", "<variable not available>", "<unavailable>"})
AGGREGATE_VALUE = "{...}"


class DriverError(Exception):
    pass


class BinaryNotFound(DriverError):
    pass


class DebuggerLaunchFailure(DriverError):
    pass


class EntryBreakpointNotHit(DriverError):
    pass


class ProtocolError(DriverError):
    pass


class InferiorCrashed(DriverError):
    pass


class StopReason(str, enum.Enum):
    STEP_COMPLETE = "step-complete"
    EXITED = "exited"
    SIGNAL = "signal"
    ERROR = "error"


@dataclass(frozen=True)
class RawVariable:
    name: str
    value: str | None  # None: no rendering (aggregate)
    is_argument: bool
    type: str = ""
    is_global: bool = False


@dataclass(frozen=True)
class RawStop:
    reason: StopReason
    line: int | None = None
    frames: tuple[str, ...] = ()
    variables: tuple[RawVariable, ...] = ()
    file: str | None = None


@dataclass
class DebuggerSession:
    """Settings for one debugger process; a session is not shared between workers."""

    debugger: str = "gdb"
    extra_args: Sequence[str] = ()
    timeout: float = DEFAULT_TIMEOUT
    step_limit: int = DEFAULT_STEP_LIMIT
    entry_symbol: str = "main"
    descend_into_libraries: bool = False
    collect_globals: bool = False
    backend: str = "gdb-mi"

    def __post_init__(self) -> None:
        if self.step_limit < 1:
            raise ValueError("step_limit must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


_DECORATION = re.compile(r"(\.(isra|constprop|part|cold|lto_priv|llvm)(\.\d+)*)+$|@plt$")


def bare_function_name(name: str) -> str:
    """Strip debugger/compiler decorations: argument lists, clone suffixes, '@plt'."""
    name = name.strip()
    if " " in name and not name.startswith("operator"):
        name = name.split(" ", 1)[0]
    if "(" in name:
        name = name.split("(", 1)[0]
    return _DECORATION.sub("", name) or "??"


def is_pointer_type(type_text: str) -> bool:
    return "*" in type_text


def normalize_stop(raw: RawStop, index: int) -> Step:
    """Turn a raw debugger stop into a trace step."""
    if raw.reason is not StopReason.STEP_COMPLETE:
        raise ProtocolError(f"cannot normalize a stop with reason {raw.reason.value}")
    if raw.line is not None and (not isinstance(raw.line, int) or raw.line < 0):
        raise ProtocolError(f"malformed line {raw.line!r}")
    line = BOTTOM if not raw.line else raw.line
    frames = [bare_function_name(f) for f in raw.frames if f]
    owner = frames[0] if frames else "??"
    by_key: dict[tuple, VariableObservation] = {}
    for rv in raw.variables:
        if not rv.name:
            raise ProtocolError("variable without a name")
        if rv.value is None:
            value = AGGREGATE_VALUE
        elif rv.value.strip() in OPTIMIZED_OUT_MARKERS or rv.value.startswith("<error"):
            # unreadable location: the debugger has no value to show
            value = OPTIMIZED_OUT
        else:
            value = canonical_value(rv.value)
        if rv.is_argument:
            kind, fn = VarKind.PARAMETER, owner
        elif rv.is_global:
            kind, fn = VarKind.GLOBAL, ""
        else:
            kind, fn = VarKind.LOCAL, ""
        obs = VariableObservation(rv.name, kind, value, fn, is_pointer_type(rv.type))
        # shadowed names: last report wins
        by_key.pop(obs.key, None)
        by_key[obs.key] = obs
    return Step(index, line, frozenset(frames), tuple(by_key.values()))


def _same_file(a: str | None, b: str) -> bool:
    if not a:
        return False
    try:
        return os.path.realpath(a) == b
    except (OSError, ValueError):
        return False


class _GdbTracer:
    def __init__(self, binary: Path, cfg: DebuggerSession):
        self.binary = binary
        self.cfg = cfg
        self._nodebug = tempfile.mkdtemp(prefix="dbgdiff-nodebug-")
        argv = [cfg.debugger, "--interpreter=mi3", "-nx", "-q", "-iex", "set debuginfod enabled off"]
        if not cfg.descend_into_libraries:
            # libraries without line info are stepped over, keeping stops in the program
            argv += ["-iex", f"set debug-file-directory {self._nodebug}"]
        argv += list(cfg.extra_args)
        argv += [str(binary)]
        try:
            self.mi = GdbMi(argv, timeout=cfg.timeout)
        except OSError as exc:
            shutil.rmtree(self._nodebug, ignore_errors=True)
            raise DebuggerLaunchFailure(f"cannot start {cfg.debugger}: {exc}") from exc
        self.source: str | None = None
        self.globals: list[tuple[str, str]] = []

    def close(self) -> None:
        self.mi.close()
        shutil.rmtree(self._nodebug, ignore_errors=True)

    def setup(self) -> None:
        try:
            for cmd in (
                "-gdb-set confirm off",
                "-gdb-set pagination off",
                "-gdb-set width 0",
                "-gdb-set print entry-values no",
                "-gdb-set print elements 64",
                "-gdb-set disable-randomization on",
                f"-gdb-set inferior-tty {os.devnull}",
            ):
                self.mi.command(cmd)
        except MiClosed as exc:
            raise DebuggerLaunchFailure(f"{self.cfg.debugger} exited during setup") from exc
        except MiProtocolError as exc:
            log.debug("setup command rejected: %s", exc)

    def start(self) -> dict:
        try:
            bkpt = self.mi.command(f"-break-insert -f {self.cfg.entry_symbol}").get("bkpt", {})
        except MiProtocolError as exc:
            raise EntryBreakpointNotHit(str(exc)) from exc
        except MiClosed as exc:
            raise DebuggerLaunchFailure(str(exc)) from exc
        if isinstance(bkpt, dict) and bkpt.get("fullname"):
            self.source = os.path.realpath(bkpt["fullname"])
        try:
            stop = self.mi.run_until_stop("-exec-run")
        except MiTimeout as exc:
            raise EntryBreakpointNotHit("timed out before reaching the entry breakpoint") from exc
        except (MiProtocolError, MiClosed) as exc:
            raise DebuggerLaunchFailure(str(exc)) from exc
        if stop.get("reason") != "breakpoint-hit":
            raise EntryBreakpointNotHit(f"program stopped with {stop.get('reason')!r} before {self.cfg.entry_symbol}")
        if self.source is None:
            fullname = (stop.get("frame") or {}).get("fullname")
            self.source = os.path.realpath(fullname) if fullname else None
        if self.cfg.collect_globals:
            self.globals = self._source_globals()
        return stop

    def _source_globals(self) -> list[tuple[str, str]]:
        try:
            payload = self.mi.command("-symbol-info-variables")
        except MiProtocolError:
            return []
        out = []
        for unit in (payload.get("symbols") or {}).get("debug", []):
            if self.source and _same_file(unit.get("fullname"), self.source):
                for sym in unit.get("symbols", []):
                    out.append((sym["name"], sym.get("type", "")))
        return out

    def frames(self) -> list[dict]:
        payload = self.mi.command("-stack-list-frames")
        stack = payload.get("stack")
        if not isinstance(stack, list):
            raise ProtocolError(f"unexpected frame list {payload!r}")
        return stack

    def variables(self, have_lines: bool) -> list[RawVariable]:
        try:
            payload = self.mi.command("-stack-list-variables --simple-values")
        except MiProtocolError:
            if have_lines:
                raise
            return []
        raw = payload.get("variables")
        if not isinstance(raw, list):
            raise ProtocolError(f"unexpected variable list {payload!r}")
        out = [
            RawVariable(v.get("name", ""), v.get("value"), v.get("arg") == "1", v.get("type", ""))
            for v in raw
        ]
        base = os.path.basename(self.source or "")
        for name, type_text in self.globals:
            try:
                val = self.mi.command(f"-data-evaluate-expression \"'{base}'::{name}\"").get("value")
            except MiProtocolError:
                val = "<optimized out>"
            out.append(RawVariable(name, val, False, type_text, is_global=True))
        return out

    def in_program(self, frame: dict | None) -> bool:
        return bool(frame) and self.source is not None and _same_file(frame.get("fullname"), self.source)


def _stop_kind(stop: dict) -> StopReason:
    reason = stop.get("reason", "")
    if reason.startswith("exited"):
        if reason == "exited-signalled":
            return StopReason.SIGNAL
        return StopReason.EXITED
    if reason == "signal-received":
        return StopReason.SIGNAL
    return StopReason.STEP_COMPLETE


def _line_of(frame: dict) -> int | None:
    text = frame.get("line")
    if text is None:
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise ProtocolError(f"malformed line {text!r}") from exc


def extract_trace(binary: str | Path, session: DebuggerSession | None = None, binary_id: str | None = None) -> Trace:
    """Single-step ``binary`` from the entry symbol to exit and return its trace."""
    cfg = session or DebuggerSession()
    binary = Path(binary)
    if not binary.is_file():
        raise BinaryNotFound(str(binary))
    if cfg.backend != "gdb-mi":
        raise DebuggerLaunchFailure(f"unknown debugger backend {cfg.backend!r}")
    if shutil.which(cfg.debugger) is None:
        raise DebuggerLaunchFailure(f"debugger {cfg.debugger!r} not found")
    tracer = _GdbTracer(binary.resolve(), cfg)
    steps: list[Step] = []
    truncated = False
    try:
        tracer.setup()
        stop = tracer.start()
        while True:
            kind = _stop_kind(stop)
            if kind is StopReason.EXITED:
                break
            if kind is StopReason.SIGNAL:
                raise InferiorCrashed(f"inferior stopped by {stop.get('signal-name', 'a signal')}")
            frame = stop.get("frame") or {}
            line = _line_of(frame)
            if not cfg.descend_into_libraries and not tracer.in_program(frame):
                stack = tracer.frames()
                if not any(tracer.in_program(f) for f in stack):
                    # left the entry function: run to exit without recording
                    stop = tracer.mi.run_until_stop("-exec-continue")
                    continue
                if frame.get("fullname"):
                    stop = tracer.mi.run_until_stop("-exec-finish")
                    continue
                # a callee of the program with no line information
                line = None
            else:
                stack = tracer.frames()
            raw = RawStop(
                StopReason.STEP_COMPLETE,
                line,
                tuple(f.get("func", "??") for f in stack),
                tuple(tracer.variables(line is not None)),
                frame.get("fullname"),
            )
            steps.append(normalize_stop(raw, len(steps)))
            if len(steps) >= cfg.step_limit:
                truncated = True
                break
            stop = tracer.mi.run_until_stop("-exec-step")
    except MiTimeout:
        log.warning("%s: debugger command timed out after %d steps", binary, len(steps))
        truncated = True
    except MiClosed as exc:
        raise ProtocolError(f"debugger exited unexpectedly: {exc}") from exc
    except MiProtocolError as exc:
        raise ProtocolError(str(exc)) from exc
    finally:
        tracer.close()
    return Trace(tuple(steps), binary_id if binary_id is not None else binary.name, truncated)
