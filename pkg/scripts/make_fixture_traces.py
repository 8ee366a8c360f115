"""Record trace-pair fixtures for the four reference programs.

The unoptimized trace of each program is recorded live (gcc -O0 under gdb).
The optimized trace is that same recording with the one documented defect
applied, since the historical compilers that produced the defects are not
installed:

    dead_line    an extra stop on line 4, the ternary's dead arm
    extra_frame  the first line-8 stop reports main, func_1 and func_2 on the stack
    scope_leak   the third line-2 stop exposes main's locals i, j and k
    param_value  every value of fun's parameter p_6 reads -1

Usage: python scripts/make_fixture_traces.py [--out tests/fixtures/traces]
"""
from __future__ import annotations

import argparse
import dataclasses
import subprocess
import tempfile
from pathlib import Path

from dbgdiff.driver import extract_trace
from dbgdiff.synthetic import with_step
from dbgdiff.trace import OPTIMIZED_OUT, Step, Trace, VariableObservation, VarKind, save_trace

HERE = Path(__file__).resolve().parent.parent
PROGRAMS = HERE / "tests" / "fixtures" / "programs"


def record(source: Path, tmp: Path) -> Trace:
    exe = tmp / source.stem
    subprocess.run(["gcc", "-w", "-O0", "-g", str(source), "-o", str(exe)], check=True)
    return extract_trace(exe, binary_id=f"{source.stem}-O0")


def replace_step(trace: Trace, step: Step) -> Trace:
    steps = list(trace.steps)
    steps[step.index] = step
    return Trace(tuple(steps), trace.binary_id, trace.truncated)


def nth_on_line(trace: Trace, line: int, n: int = 0) -> Step:
    return [s for s in trace.steps if s.line == line][n]


def dead_line(t: Trace) -> Trace:
    at3 = nth_on_line(t, 3)
    return with_step(t, at3.index + 1, dataclasses.replace(at3, line=4))


def extra_frame(t: Trace) -> Trace:
    at8 = nth_on_line(t, 8)
    return replace_step(t, dataclasses.replace(at8, backtrace=frozenset({"main", "func_1", "func_2"})))


def scope_leak(t: Trace) -> Trace:
    at2 = nth_on_line(t, 2, 2)
    extra = tuple(VariableObservation(n, VarKind.LOCAL, OPTIMIZED_OUT) for n in ("i", "j", "k"))
    return replace_step(t, dataclasses.replace(at2, variables=at2.variables + extra))


def param_value(t: Trace) -> Trace:
    steps = []
    for s in t.steps:
        vs = tuple(
            dataclasses.replace(v, value="-1") if v.kind is VarKind.PARAMETER and v.name == "p_6" else v
            for v in s.variables
        )
        steps.append(dataclasses.replace(s, variables=vs))
    return Trace(tuple(steps), t.binary_id, t.truncated)


DERIVE = {"dead_line": dead_line, "extra_frame": extra_frame, "scope_leak": scope_leak, "param_value": param_value}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--out", default=str(HERE / "tests" / "fixtures" / "traces"))
    args = p.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name, derive in DERIVE.items():
            unopt = record(PROGRAMS / f"{name}.c", Path(tmp))
            opt = dataclasses.replace(derive(unopt), binary_id=f"{name}-derived-opt")
            save_trace(unopt, out / f"{name}.unopt.trace.jsonl")
            save_trace(opt, out / f"{name}.opt.trace.jsonl")
            print(f"{name}: {len(unopt.steps)} unopt steps, {len(opt.steps)} opt steps")


if __name__ == "__main__":
    main()
