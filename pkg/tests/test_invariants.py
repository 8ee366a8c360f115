import dataclasses
import io
import random

import pytest
from hypothesis import given, strategies as st

from dbgdiff.invariants import (
    FramesEvidence,
    Invariant,
    LineEvidence,
    ScopeMode,
    ValueEvidence,
    Violation,
    check_all,
    check_bi,
    check_li,
    check_pi,
    check_si,
    counts_by_invariant,
    read_violations,
    write_violations,
)
from dbgdiff.synthetic import model_trace, with_step
from dbgdiff.trace import BOTTOM, OPTIMIZED_OUT, Step, Trace, VariableObservation, VarKind, make_trace
from oracle import oracle_all
from strategies import trace_pairs, traces


def loc(name, value="0"):
    return VariableObservation(name, VarKind.LOCAL, value)


def glob(name, value="0"):
    return VariableObservation(name, VarKind.GLOBAL, value)


def param(name, fn, value, ptr=False):
    return VariableObservation(name, VarKind.PARAMETER, value, fn, ptr)


def lines(*ls, bt=("main",)):
    return make_trace((ln, set(bt), ()) for ln in ls)


class TestLines:
    def test_identical(self):
        t = lines(3, 4, 5)
        assert check_li(t, t) == []

    def test_dead_arm_line(self):
        found = check_li(lines(3, 4, 5), lines(3, 5))
        assert [(v.invariant, v.evidence) for v in found] == [(Invariant.LI, LineEvidence(4))]
        assert found[0].opt_step == 1

    def test_bottom_excused(self):
        assert check_li(lines(1, BOTTOM), lines(1)) == []

    def test_first_visit_cited_and_counted(self):
        found = check_li(lines(1, 9, 2, 9), lines(1, 2))
        assert len(found) == 1
        assert found[0].opt_step == 1 and found[0].occurrences == 2


class TestBacktrace:
    def test_identical(self):
        t = make_trace([(8, {"main"}, ()), (7, {"main", "func_1"}, ())])
        assert check_bi(t, t) == []

    def test_extra_frames(self):
        opt = make_trace([(8, {"main", "func_1", "func_2"}, ())])
        unopt = make_trace([(8, {"main"}, ()), (7, {"main", "func_1"}, ()), (8, {"main"}, ())])
        found = check_bi(opt, unopt)
        assert len(found) == 1
        assert found[0].evidence == FramesEvidence(8, frozenset({"func_1", "func_2"}))

    def test_subset_of_some_step_holds(self):
        opt = make_trace([(8, {"main"}, ())])
        unopt = make_trace([(8, {"main", "helper"}, ())])
        assert check_bi(opt, unopt) == []

    def test_needs_all_same_line_steps_to_fail(self):
        opt = make_trace([(8, {"main", "f"}, ())])
        unopt = make_trace([(8, {"main"}, ()), (8, {"main", "f", "g"}, ())])
        assert check_bi(opt, unopt) == []

    def test_lines_absent_from_unopt_are_skipped(self):
        opt = make_trace([(9, {"main", "f"}, ())])
        assert check_bi(opt, lines(8)) == []
        assert len(check_li(opt, lines(8))) == 1

    def test_bottom_skipped(self):
        opt = make_trace([(BOTTOM, {"main", "f"}, ())])
        unopt = make_trace([(BOTTOM, {"main"}, ())])
        assert check_bi(opt, unopt) == []


class TestScope:
    def test_identical(self):
        t = make_trace([(2, {"b"}, (glob("g"), loc("x")))])
        assert check_si(t, t) == []

    def test_out_of_scope_locals(self):
        opt = make_trace([(2, {"f", "b"}, (loc("g"), loc("i"), loc("j"), loc("k")))])
        unopt = make_trace([(2, {"f", "b"}, (loc("g"),))])
        found = check_si(opt, unopt)
        assert len(found) == 1
        keys = {name for name, _, _ in found[0].evidence.variables}
        assert keys == {"i", "j", "k"}

    def test_subset_direction(self):
        opt = make_trace([(2, {"b"}, (loc("g"),))])
        unopt = make_trace([(2, {"b"}, (loc("g"), loc("i")))])
        assert check_si(opt, unopt) == []

    def test_values_ignored(self):
        opt = make_trace([(2, {"b"}, (loc("g", "1"),))])
        unopt = make_trace([(2, {"b"}, (loc("g", "2"),))])
        assert check_si(opt, unopt) == []

    def test_key_includes_kind_and_owner(self):
        opt = make_trace([(2, {"b"}, (param("x", "b", "1"),))])
        unopt = make_trace([(2, {"b"}, (param("x", "c", "1"),))])
        found = check_si(opt, unopt)
        assert found[0].evidence.variables == frozenset({("x", VarKind.PARAMETER, "b")})

    def test_exists_vs_forall(self):
        opt = make_trace([(2, {"b"}, (loc("x"),))])
        unopt = make_trace([(2, {"b"}, ()), (2, {"b"}, (loc("x"),))])
        assert len(check_si(opt, unopt, mode=ScopeMode.EXISTS)) == 1
        assert check_si(opt, unopt, mode=ScopeMode.FORALL) == []

    def test_duplicates_merged(self):
        opt = make_trace([(2, {"b"}, (loc("x"),))])
        unopt = make_trace([(2, {"b"}, ()), (2, {"b"}, ())])
        found = check_si(opt, unopt)
        assert len(found) == 1 and found[0].unopt_step == 0

    def test_bottom_ignored(self):
        opt = make_trace([(BOTTOM, {"b"}, (loc("x"),))])
        unopt = make_trace([(BOTTOM, {"b"}, ())])
        assert check_si(opt, unopt) == []


class TestParameters:
    def test_identical(self):
        t = make_trace([(5, {"fun"}, (param("p_6", "fun", "1"),))])
        assert check_pi(t, t) == []

    def test_impossible_value(self):
        opt = make_trace([(5, {"fun"}, (param("p_6", "fun", "-1"),))])
        unopt = make_trace([(5, {"fun"}, (param("p_6", "fun", "1"),))])
        found = check_pi(opt, unopt)
        assert [v.evidence for v in found] == [ValueEvidence(("fun", "p_6"), frozenset({"-1"}))]

    def test_optimized_out_excused(self):
        opt = make_trace([(5, {"fun"}, (param("p", "fun", "1"),)), (6, {"fun"}, (param("p", "fun", OPTIMIZED_OUT),))])
        unopt = make_trace([(5, {"fun"}, (param("p", "fun", "1"),))])
        assert check_pi(opt, unopt) == []

    def test_pointer_exclusion_is_transitive(self):
        opt = make_trace([(5, {"f"}, (param("p", "f", "0x1", ptr=True),)), (6, {"f"}, (param("p", "f", "9"),))])
        unopt = make_trace([(5, {"f"}, (param("p", "f", "0x2"),))])
        assert check_pi(opt, unopt) == []
        assert check_pi(unopt, opt) == []

    def test_only_shared_parameters(self):
        opt = make_trace([(5, {"f"}, (param("p", "f", "3"),))])
        unopt = make_trace([(5, {"f"}, (param("q", "f", "1"),))])
        assert check_pi(opt, unopt) == []

    def test_integer_canonicalization_applies(self):
        opt = make_trace([(5, {"f"}, (param("p", "f", "007"),))])
        unopt = make_trace([(5, {"f"}, (param("p", "f", "7"),))])
        assert check_pi(opt, unopt) == []


class TestCheckAll:
    def test_empty_opt(self):
        assert check_all(Trace(), lines(1, 2, 3)) == []

    def test_order(self):
        opt = make_trace([
            (5, {"f"}, (param("p", "f", "2"),)),
            (9, {"main"}, ()),
            (4, {"main", "g"}, (loc("z"),)),
        ])
        unopt = make_trace([(5, {"f"}, (param("p", "f", "1"),)), (4, {"main"}, ())])
        kinds = [v.invariant for v in check_all(opt, unopt, "c")]
        assert kinds == [Invariant.LI, Invariant.BI, Invariant.SI, Invariant.PI]
        assert counts_by_invariant(check_all(opt, unopt)) == {"LI": 1, "BI": 1, "SI": 1, "PI": 1}

    def test_evidence_validation(self):
        with pytest.raises(ValueError):
            Violation(Invariant.LI, 0, LineEvidence(BOTTOM))
        with pytest.raises(ValueError):
            Violation(Invariant.PI, 0, ValueEvidence(("f", "p"), frozenset({OPTIMIZED_OUT})))

    def test_record_round_trip(self):
        opt = make_trace([
            (5, {"f"}, (param("p", "f", "2"),)), (9, {"main"}, ()), (4, {"main", "g"}, (loc("z"),)),
        ])
        unopt = make_trace([(5, {"f"}, (param("p", "f", "1"),)), (4, {"main"}, ())])
        found = check_all(opt, unopt, "case-1")
        buf = io.StringIO()
        write_violations(found, buf)
        buf.seek(0)
        assert read_violations(buf) == found


def _model_pair(seed):
    t = model_trace(random.Random(seed))
    return t


class TestProperties:
    @given(st.integers(0, 2**32))
    def test_reflexive_on_line_consistent_traces(self, seed):
        t = _model_pair(seed)
        assert check_all(t, t) == []

    @given(traces())
    def test_reflexive_forall_on_any_trace(self, t):
        assert check_all(t, t, scope_mode=ScopeMode.FORALL) == []

    @given(traces())
    def test_reflexive_li_bi_pi_on_any_trace(self, t):
        assert check_li(t, t) == check_bi(t, t) == check_pi(t, t) == []

    @given(trace_pairs(), st.data())
    def test_li_monotone(self, pair, data):
        opt, unopt = pair
        base = {v.evidence for v in check_li(opt, unopt)}
        # more unopt steps never add LI violations
        extra = data.draw(traces(max_steps=10, max_line=8))
        grown = make_trace([(s.line, s.backtrace, s.variables) for s in unopt.steps + extra.steps])
        assert {v.evidence for v in check_li(opt, grown)} <= base
        # fewer opt steps never add LI violations
        keep = data.draw(st.lists(st.booleans(), min_size=len(opt.steps), max_size=len(opt.steps)))
        shrunk = make_trace([(s.line, s.backtrace, s.variables) for s, k in zip(opt.steps, keep) if k])
        assert {v.evidence for v in check_li(shrunk, unopt)} <= base

    @given(trace_pairs())
    def test_bi_vacuity(self, pair):
        opt, unopt = pair
        covered = all(
            any(u.line == s.line and s.backtrace <= u.backtrace for u in unopt.steps)
            for s in opt.steps
            if s.line is not BOTTOM
        )
        if covered:
            assert check_bi(opt, unopt) == []

    @given(trace_pairs(), st.data())
    def test_pi_bottom_absorption(self, pair, data):
        opt, unopt = pair
        before = sum(v.occurrences for v in check_pi(opt, unopt))
        steps = list(opt.steps)
        for i, s in enumerate(steps):
            vs = tuple(
                dataclasses.replace(v, value=OPTIMIZED_OUT)
                if v.kind is VarKind.PARAMETER and data.draw(st.booleans()) else v
                for v in s.variables
            )
            steps[i] = dataclasses.replace(s, variables=vs)
        after = sum(v.occurrences for v in check_pi(Trace(tuple(steps)), unopt))
        assert after <= before
        assert len(check_pi(Trace(tuple(steps)), unopt)) <= len(check_pi(opt, unopt))

    @given(trace_pairs(), st.sampled_from(list(ScopeMode)))
    def test_oracle_agreement(self, pair, mode):
        opt, unopt = pair
        assert check_all(opt, unopt, "x", mode) == oracle_all(opt, unopt, "x", forall=mode is ScopeMode.FORALL)

    @given(trace_pairs())
    def test_pure(self, pair):
        opt, unopt = pair
        assert check_all(opt, unopt) == check_all(opt, unopt)

    @given(st.integers(0, 2**32), st.integers(0, 60))
    def test_bottom_steps_never_add_li(self, seed, where):
        t = _model_pair(seed)
        pos = min(where, len(t.steps))
        mutated = with_step(t, pos, Step(0, BOTTOM, frozenset({"main"}), ()))
        assert check_li(mutated, t) == []
