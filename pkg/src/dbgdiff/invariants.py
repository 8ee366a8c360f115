"""The four trace invariants checked on an (optimized, unoptimized) trace pair.

* LI: every line stepped in the optimized trace is stepped in the unoptimized
  one (BOTTOM excused).
* BI: for a line present in both traces, the optimized backtrace must be a
  subset of the backtrace of at least one unoptimized step on that line.
* SI: variables visible on a line in the optimized trace must be visible on
  that line in the unoptimized trace.
* PI: every non-pointer parameter value seen in the optimized trace must be
  seen in the unoptimized trace (OPTIMIZED_OUT excused).

Raw violation instances with identical evidence collapse into one
:class:`Violation` that keeps the first offending step and an occurrence count.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import IO, Iterable

from .trace import (
    BOTTOM,
    OPTIMIZED_OUT,
    ParameterKey,
    SourceLine,
    Step,
    Trace,
    Value,
    VarKey,
    VarKind,
    lines_of,
    parameters_of,
    value_sort_key,
    values_of,
)


class Invariant(str, enum.Enum):
    LI = "LI"
    BI = "BI"
    SI = "SI"
    PI = "PI"


INVARIANT_ORDER = (Invariant.LI, Invariant.BI, Invariant.SI, Invariant.PI)


class ScopeMode(str, enum.Enum):
    """SI quantifier: ``exists`` compares step pairs, ``forall`` the union of same-line steps."""

    EXISTS = "exists"
    FORALL = "forall"


@dataclass(frozen=True)
class LineEvidence:
    line: int


@dataclass(frozen=True)
class FramesEvidence:
    line: int
    functions: frozenset[str]


@dataclass(frozen=True)
class ScopeEvidence:
    line: int
    variables: frozenset[VarKey]


@dataclass(frozen=True)
class ValueEvidence:
    parameter: ParameterKey
    values: frozenset[str]


Evidence = LineEvidence | FramesEvidence | ScopeEvidence | ValueEvidence


@dataclass(frozen=True)
class Violation:
    invariant: Invariant
    opt_step: int
    evidence: Evidence
    unopt_step: int | None = None
    occurrences: int = 1
    case_id: str = ""

    def __post_init__(self) -> None:
        if isinstance(self.evidence, (LineEvidence, FramesEvidence, ScopeEvidence)):
            if self.evidence.line is BOTTOM:
                raise ValueError("violation evidence cannot be on BOTTOM")
        if isinstance(self.evidence, ValueEvidence) and OPTIMIZED_OUT in self.evidence.values:
            raise ValueError("PI evidence cannot contain OPTIMIZED_OUT")


class _Collapser:
    """Groups raw violation instances by evidence, keeping first-seen order."""

    def __init__(self, invariant: Invariant, case_id: str):
        self.invariant = invariant
        self.case_id = case_id
        self._seen: dict[Evidence, list] = {}

    def add(self, evidence: Evidence, opt_step: int, unopt_step: int | None = None, count: int = 1) -> None:
        entry = self._seen.get(evidence)
        if entry is None:
            self._seen[evidence] = [opt_step, unopt_step, count]
        else:
            entry[2] += count

    def result(self) -> list[Violation]:
        out = [
            Violation(self.invariant, opt, ev, unopt, n, self.case_id)
            for ev, (opt, unopt, n) in self._seen.items()
        ]
        out.sort(key=lambda v: v.opt_step)
        return out


def _by_line(trace: Trace) -> dict[SourceLine, list[Step]]:
    index: dict[SourceLine, list[Step]] = {}
    for s in trace.steps:
        index.setdefault(s.line, []).append(s)
    return index


def check_li(t_opt: Trace, t_unopt: Trace, case_id: str = "") -> list[Violation]:
    allowed = lines_of(t_unopt) | {BOTTOM}
    out = _Collapser(Invariant.LI, case_id)
    for s in t_opt.steps:
        if s.line not in allowed:
            out.add(LineEvidence(s.line), s.index)
    return out.result()


def check_bi(t_opt: Trace, t_unopt: Trace, case_id: str = "") -> list[Violation]:
    unopt = _by_line(t_unopt)
    out = _Collapser(Invariant.BI, case_id)
    for s in t_opt.steps:
        same_line = unopt.get(s.line)
        # absent lines are LI's business; BOTTOM carries no location to compare
        if s.line is BOTTOM or not same_line:
            continue
        if any(s.backtrace <= u.backtrace for u in same_line):
            continue
        seen = frozenset().union(*(u.backtrace for u in same_line))
        out.add(FramesEvidence(s.line, s.backtrace - seen), s.index)
    return out.result()


def check_si(
    t_opt: Trace, t_unopt: Trace, case_id: str = "", mode: ScopeMode = ScopeMode.EXISTS
) -> list[Violation]:
    unopt = _by_line(t_unopt)
    out = _Collapser(Invariant.SI, case_id)
    for s in t_opt.steps:
        same_line = unopt.get(s.line)
        if s.line is BOTTOM or not same_line:
            continue
        keys = s.keys
        if mode is ScopeMode.FORALL:
            extra = keys - frozenset().union(*(u.keys for u in same_line))
            if extra:
                out.add(ScopeEvidence(s.line, extra), s.index)
            continue
        # one occurrence per opt step, attributed to the first unopt step showing that difference
        diffs: dict[frozenset, int] = {}
        for u in same_line:
            extra = keys - u.keys
            if extra and extra not in diffs:
                diffs[extra] = u.index
        for extra, u_index in diffs.items():
            out.add(ScopeEvidence(s.line, extra), s.index, u_index)
    return out.result()


def _pointer_keys(*traces: Trace) -> set[ParameterKey]:
    return {
        (v.owner_function, v.name)
        for t in traces
        for s in t.steps
        for v in s.variables
        if v.kind is VarKind.PARAMETER and v.is_pointer
    }


def check_pi(t_opt: Trace, t_unopt: Trace, case_id: str = "") -> list[Violation]:
    shared = (parameters_of(t_opt) & parameters_of(t_unopt)) - _pointer_keys(t_opt, t_unopt)
    out = _Collapser(Invariant.PI, case_id)
    for key in sorted(shared):
        bad = values_of(t_opt, key) - values_of(t_unopt, key) - {OPTIMIZED_OUT}
        if not bad:
            continue
        first, count = None, 0
        for s in t_opt.steps:
            for v in s.variables:
                if v.kind is VarKind.PARAMETER and (v.owner_function, v.name) == key and v.value in bad:
                    count += 1
                    if first is None:
                        first = s.index
        out.add(ValueEvidence(key, frozenset(bad)), first, None, count)
    return out.result()


def check_all(
    t_opt: Trace, t_unopt: Trace, case_id: str = "", scope_mode: ScopeMode = ScopeMode.EXISTS
) -> list[Violation]:
    return (
        check_li(t_opt, t_unopt, case_id)
        + check_bi(t_opt, t_unopt, case_id)
        + check_si(t_opt, t_unopt, case_id, scope_mode)
        + check_pi(t_opt, t_unopt, case_id)
    )


def counts_by_invariant(violations: Iterable[Violation]) -> dict[str, int]:
    counts = {inv.value: 0 for inv in INVARIANT_ORDER}
    for v in violations:
        counts[v.invariant.value] += 1
    return counts


# -- violation records -----------------------------------------------------


def evidence_record(ev: Evidence) -> dict:
    if isinstance(ev, LineEvidence):
        return {"line": ev.line}
    if isinstance(ev, FramesEvidence):
        return {"line": ev.line, "functions": sorted(ev.functions)}
    if isinstance(ev, ScopeEvidence):
        return {
            "line": ev.line,
            "variables": [
                {"name": n, "kind": k.value, "fn": fn} for n, k, fn in sorted(ev.variables)
            ],
        }
    fn, name = ev.parameter
    return {"function": fn, "parameter": name, "values": sorted(ev.values, key=value_sort_key)}


def violation_record(v: Violation) -> dict:
    return {
        "case_id": v.case_id,
        "invariant": v.invariant.value,
        "opt_step": v.opt_step,
        "unopt_step": v.unopt_step,
        "evidence": evidence_record(v.evidence),
        "occurrences": v.occurrences,
    }


def violation_from_record(rec: dict) -> Violation:
    inv = Invariant(rec["invariant"])
    ev = rec["evidence"]
    evidence: Evidence
    if inv is Invariant.LI:
        evidence = LineEvidence(ev["line"])
    elif inv is Invariant.BI:
        evidence = FramesEvidence(ev["line"], frozenset(ev["functions"]))
    elif inv is Invariant.SI:
        evidence = ScopeEvidence(
            ev["line"], frozenset((x["name"], VarKind(x["kind"]), x["fn"]) for x in ev["variables"])
        )
    else:
        vals: frozenset[Value] = frozenset(ev["values"])
        evidence = ValueEvidence((ev["function"], ev["parameter"]), vals)
    return Violation(inv, rec["opt_step"], evidence, rec["unopt_step"], rec["occurrences"], rec["case_id"])


def write_violations(violations: Iterable[Violation], fp: IO[str]) -> None:
    for v in violations:
        fp.write(json.dumps(violation_record(v)) + "\n")


def read_violations(fp: IO[str]) -> list[Violation]:
    return [violation_from_record(json.loads(line)) for line in fp if line.strip()]


def save_violations(path, violations: Iterable[Violation]) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        write_violations(violations, fp)


def load_violations(path) -> list[Violation]:
    with open(path, encoding="utf-8") as fp:
        return read_violations(fp)
