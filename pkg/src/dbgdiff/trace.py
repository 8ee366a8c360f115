"""Trace data model shared by the driver, the invariant checkers and triage.

A trace is the ordered list of debugger stops recorded while single-stepping a
binary from its entry point to exit.  Lines and values each have a sentinel
for "no information": ``BOTTOM`` (no usable line, e.g. the artificial line 0)
and ``OPTIMIZED_OUT`` (the debugger could not recover the value).
"""
from __future__ import annotations

import enum
import io
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Iterator, Union

SCHEMA_VERSION = "1"


class _Bottom(enum.Enum):
    BOTTOM = "BOTTOM"

    def __repr__(self) -> str:
        return "BOTTOM"


class _OptimizedOut(enum.Enum):
    OPTIMIZED_OUT = "OPTIMIZED_OUT"

    def __repr__(self) -> str:
        return "OPTIMIZED_OUT"


BOTTOM = _Bottom.BOTTOM
OPTIMIZED_OUT = _OptimizedOut.OPTIMIZED_OUT

SourceLine = Union[int, _Bottom]
Value = Union[str, _OptimizedOut]


class VarKind(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    PARAMETER = "param"


# (name, kind, owner_function)
VarKey = tuple[str, VarKind, str]
# (owner_function, name)
ParameterKey = tuple[str, str]

_INT_RE = re.compile(r"^([+-]?)0*(\d+)$")


class SchemaError(ValueError):
    """A trace file does not follow the line-delimited record schema."""

    def __init__(self, message: str, record_index: int | None = None):
        self.record_index = record_index
        where = f"record {record_index}: " if record_index is not None else ""
        super().__init__(where + message)


def canonical_value(text: str | None) -> Value:
    """Canonicalize a debugger value rendering.

    Integers lose leading zeros and a leading '+', and "-0" becomes "0", so
    textual equality is integer equality.  Everything else is kept verbatim.
    """
    if text is None:
        return OPTIMIZED_OUT
    m = _INT_RE.match(text.strip())
    if m is None:
        return text
    sign, digits = m.groups()
    digits = digits.lstrip("0") or "0"
    if digits == "0" or sign != "-":
        return digits
    return "-" + digits


def check_line(line: SourceLine) -> SourceLine:
    if line is BOTTOM:
        return line
    if isinstance(line, bool) or not isinstance(line, int) or line < 1:
        raise ValueError(f"source line must be a positive integer or BOTTOM, got {line!r}")
    return line


@dataclass(frozen=True)
class VariableObservation:
    name: str
    kind: VarKind
    value: Value
    owner_function: str = ""
    is_pointer: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be nonempty")
        object.__setattr__(self, "kind", VarKind(self.kind))
        if (self.kind is VarKind.PARAMETER) != bool(self.owner_function):
            raise ValueError(
                f"{self.name}: owner_function is required for parameters and only for them"
            )
        if self.value is not OPTIMIZED_OUT:
            if not isinstance(self.value, str):
                raise TypeError(f"value must be text or OPTIMIZED_OUT, got {self.value!r}")
            object.__setattr__(self, "value", canonical_value(self.value))

    @property
    def key(self) -> VarKey:
        return (self.name, self.kind, self.owner_function)


@dataclass(frozen=True)
class Step:
    index: int
    line: SourceLine
    backtrace: frozenset[str] = frozenset()
    variables: tuple[VariableObservation, ...] = ()

    def __post_init__(self) -> None:
        check_line(self.line)
        object.__setattr__(self, "backtrace", frozenset(self.backtrace))
        object.__setattr__(self, "variables", tuple(self.variables))
        keys = [v.key for v in self.variables]
        if len(keys) != len(set(keys)):
            raise ValueError(f"step {self.index}: duplicate variable keys")

    @property
    def keys(self) -> frozenset[VarKey]:
        return frozenset(v.key for v in self.variables)


@dataclass(frozen=True)
class Trace:
    steps: tuple[Step, ...] = ()
    binary_id: str = ""
    truncated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        for i, step in enumerate(self.steps):
            if step.index != i:
                raise ValueError(f"step indices must be consecutive from 0; got {step.index} at {i}")

    def __len__(self) -> int:
        return len(self.steps)


def make_trace(stops: Iterable[tuple], binary_id: str = "", truncated: bool = False) -> Trace:
    """Build a trace from ``(line, backtrace, variables)`` tuples, numbering steps."""
    steps = [Step(i, line, frozenset(bt), tuple(vs)) for i, (line, bt, vs) in enumerate(stops)]
    return Trace(tuple(steps), binary_id, truncated)


def lines_of(trace: Trace) -> set[SourceLine]:
    return {s.line for s in trace.steps}


def parameters_of(trace: Trace) -> set[ParameterKey]:
    return {
        (v.owner_function, v.name)
        for s in trace.steps
        for v in s.variables
        if v.kind is VarKind.PARAMETER
    }


def values_of(trace: Trace, key: ParameterKey) -> set[Value]:
    fn, name = key
    return {
        v.value
        for s in trace.steps
        for v in s.variables
        if v.kind is VarKind.PARAMETER and v.owner_function == fn and v.name == name
    }


def mask_pointer_values(trace: Trace, mask: str = "<ptr>") -> Trace:
    """Replace every pointer-typed value, so ASLR-sensitive text compares equal."""
    steps = []
    for s in trace.steps:
        vs = tuple(
            replace(v, value=mask) if v.is_pointer and v.value is not OPTIMIZED_OUT else v
            for v in s.variables
        )
        steps.append(replace(s, variables=vs))
    return replace(trace, steps=tuple(steps))


# -- serialization ---------------------------------------------------------


def line_sort_key(line: SourceLine) -> tuple[int, int]:
    return (0, 0) if line is BOTTOM else (1, line)


def value_sort_key(value: Value) -> tuple[int, str]:
    return (0, "") if value is OPTIMIZED_OUT else (1, value)


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False)


def step_record(step: Step) -> dict:
    return {
        "i": step.index,
        "line": None if step.line is BOTTOM else step.line,
        "bt": sorted(step.backtrace),
        "vars": [
            {
                "name": v.name,
                "kind": v.kind.value,
                "fn": v.owner_function,
                "ptr": v.is_pointer,
                "val": None if v.value is OPTIMIZED_OUT else v.value,
            }
            for v in step.variables
        ],
    }


def iter_records(trace: Trace) -> Iterator[dict]:
    yield {"binary_id": trace.binary_id, "truncated": trace.truncated, "schema_version": SCHEMA_VERSION}
    for step in trace.steps:
        yield step_record(step)


def write_trace(trace: Trace, fp: IO[str]) -> None:
    for rec in iter_records(trace):
        fp.write(_dumps(rec) + "\n")


def dumps_trace(trace: Trace) -> str:
    buf = io.StringIO()
    write_trace(trace, buf)
    return buf.getvalue()


def save_trace(trace: Trace, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        write_trace(trace, fp)


def _expect(cond: bool, msg: str, idx: int) -> None:
    if not cond:
        raise SchemaError(msg, idx)


def _parse_step(rec: object, idx: int) -> Step:
    _expect(isinstance(rec, dict), "step record must be an object", idx)
    assert isinstance(rec, dict)
    _expect(set(rec) == {"i", "line", "bt", "vars"}, f"unexpected step fields {sorted(rec)}", idx)
    line = rec["line"]
    _expect(line is None or (type(line) is int and line >= 1), f"bad line {line!r}", idx)
    bt = rec["bt"]
    _expect(isinstance(bt, list) and all(isinstance(f, str) for f in bt), "bt must be a list of strings", idx)
    _expect(isinstance(rec["vars"], list), "vars must be a list", idx)
    _expect(type(rec["i"]) is int, "i must be an integer", idx)
    variables = []
    for v in rec["vars"]:
        _expect(isinstance(v, dict) and set(v) == {"name", "kind", "fn", "ptr", "val"}, "bad variable record", idx)
        _expect(v["kind"] in ("global", "local", "param"), f"bad kind {v['kind']!r}", idx)
        _expect(isinstance(v["name"], str) and isinstance(v["fn"], str), "name/fn must be strings", idx)
        _expect(type(v["ptr"]) is bool, "ptr must be a boolean", idx)
        _expect(v["val"] is None or isinstance(v["val"], str), "val must be a string or null", idx)
        try:
            variables.append(
                VariableObservation(
                    name=v["name"],
                    kind=VarKind(v["kind"]),
                    value=OPTIMIZED_OUT if v["val"] is None else v["val"],
                    owner_function=v["fn"],
                    is_pointer=v["ptr"],
                )
            )
        except (ValueError, TypeError) as exc:
            raise SchemaError(str(exc), idx) from exc
    try:
        return Step(rec["i"], BOTTOM if line is None else line, frozenset(bt), tuple(variables))
    except ValueError as exc:
        raise SchemaError(str(exc), idx) from exc


def loads_trace(text: str) -> Trace:
    """Parse a trace file.  Record 0 is the header; a record index is attached to errors."""
    if not text:
        raise SchemaError("empty trace file (missing header)", 0)
    if not text.endswith("\n"):
        raise SchemaError("last record is not newline-terminated (truncated file?)", text.count("\n"))
    lines = text.split("\n")[:-1]
    records = []
    for idx, raw in enumerate(lines):
        try:
            records.append(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"unparsable record: {exc.msg}", idx) from exc
    header = records[0]
    _expect(
        isinstance(header, dict) and set(header) == {"binary_id", "truncated", "schema_version"},
        "bad header record",
        0,
    )
    _expect(header["schema_version"] == SCHEMA_VERSION, f"unsupported schema {header['schema_version']!r}", 0)
    _expect(isinstance(header["binary_id"], str) and type(header["truncated"]) is bool, "bad header types", 0)
    steps = [_parse_step(rec, idx) for idx, rec in enumerate(records[1:], start=1)]
    for idx, step in enumerate(steps, start=1):
        _expect(step.index == idx - 1, f"step index {step.index} out of sequence", idx)
    return Trace(tuple(steps), header["binary_id"], header["truncated"])


def load_trace(path: str | Path) -> Trace:
    with open(path, encoding="utf-8", newline="") as fp:
        return loads_trace(fp.read())
