"""Hypothesis strategies for traces."""
from hypothesis import strategies as st

from dbgdiff.trace import BOTTOM, OPTIMIZED_OUT, Step, Trace, VariableObservation, VarKind

FUNCTIONS = ("main", "f1", "f2", "f3", "f4")
VALUES = st.sampled_from(["0", "1", "-1", "2", "007", "255", "0x10", "{...}", "'a'"])


@st.composite
def variable_pools(draw, max_vars=8):
    n = draw(st.integers(0, max_vars))
    pool = []
    for i in range(n):
        kind = draw(st.sampled_from(list(VarKind)))
        owner = draw(st.sampled_from(FUNCTIONS)) if kind is VarKind.PARAMETER else ""
        pool.append((f"v{i}", kind, owner, draw(st.booleans())))
    return pool


@st.composite
def traces(draw, max_steps=50, max_line=20, pool=None):
    pool = draw(variable_pools()) if pool is None else pool
    steps = []
    for i in range(draw(st.integers(0, max_steps))):
        line = draw(st.one_of(st.just(BOTTOM), st.integers(1, max_line)))
        bt = draw(st.frozensets(st.sampled_from(FUNCTIONS)))
        chosen = draw(st.lists(st.sampled_from(pool), unique=True)) if pool else []
        vs = tuple(
            VariableObservation(name, kind, draw(st.one_of(st.just(OPTIMIZED_OUT), VALUES)), owner, ptr)
            for name, kind, owner, ptr in chosen
        )
        steps.append(Step(i, line, bt, vs))
    return Trace(tuple(steps), draw(st.text(max_size=5)), draw(st.booleans()))


@st.composite
def trace_pairs(draw, max_steps=30, max_line=8):
    """Two traces over a shared variable pool and a small line range, so they overlap often."""
    pool = draw(variable_pools())
    return draw(traces(max_steps, max_line, pool)), draw(traces(max_steps, max_line, pool))
