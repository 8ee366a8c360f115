"""Random synthetic traces for property tests and oracle sweeps.

Two generators:

* :func:`random_trace` draws every step independently (arbitrary lines,
  backtraces and variable sets); good for exercising checker corner cases.
* :class:`ProgramModel` walks a toy program (functions owning disjoint line
  ranges, each line with a fixed scope) so a line always maps to one frame and
  one set of visible variables, as in traces from a real debugger.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .trace import (
    BOTTOM,
    OPTIMIZED_OUT,
    Step,
    Trace,
    VariableObservation,
    VarKind,
)

SMALL_VALUES = ("0", "1", "-1", "2", "7", "255")


def random_trace(
    rng: random.Random,
    max_steps: int = 50,
    max_line: int = 20,
    n_functions: int = 5,
    n_variables: int = 8,
    p_bottom: float = 0.1,
    p_optimized_out: float = 0.15,
    binary_id: str = "synthetic",
) -> Trace:
    functions = [f"f{i}" for i in range(n_functions)]
    pool = []
    for i in range(n_variables):
        kind = rng.choice(list(VarKind))
        owner = rng.choice(functions) if kind is VarKind.PARAMETER else ""
        pool.append((f"v{i}", kind, owner, rng.random() < 0.15))
    steps = []
    for i in range(rng.randint(0, max_steps)):
        line = BOTTOM if rng.random() < p_bottom else rng.randint(1, max_line)
        bt = frozenset(rng.sample(functions, rng.randint(0, n_functions)))
        chosen = rng.sample(pool, rng.randint(0, n_variables))
        variables = tuple(
            VariableObservation(
                name,
                kind,
                OPTIMIZED_OUT if rng.random() < p_optimized_out else rng.choice(SMALL_VALUES),
                owner,
                ptr,
            )
            for name, kind, owner, ptr in chosen
        )
        steps.append(Step(i, line, bt, variables))
    return Trace(tuple(steps), binary_id, False)


@dataclass
class _Function:
    name: str
    params: list[str]
    pointer_params: set[str]
    lines: list[int]
    scopes: dict[int, list[str]]
    calls: dict[int, int] = field(default_factory=dict)


@dataclass
class ProgramModel:
    """A toy call tree whose lines each belong to exactly one function and scope."""

    functions: list[_Function]
    globals: list[str]
    rng: random.Random

    @classmethod
    def random(cls, rng: random.Random, n_functions: int = 4, max_lines_per_fn: int = 5) -> ProgramModel:
        funcs = []
        next_line = 1
        for i in range(n_functions):
            name = "main" if i == 0 else f"func_{i}"
            params = [] if i == 0 else [f"p_{i}_{k}" for k in range(rng.randint(0, 3))]
            pointer_params = {p for p in params if rng.random() < 0.2}
            n_lines = rng.randint(1, max_lines_per_fn)
            lines = list(range(next_line, next_line + n_lines))
            next_line += n_lines
            locals_ = [f"l_{i}_{k}" for k in range(rng.randint(0, 3))]
            # nested scopes widen as the body goes on
            scopes = {ln: locals_[: rng.randint(0, len(locals_))] for ln in lines}
            funcs.append(_Function(name, params, pointer_params, lines, scopes))
        for i, fn in enumerate(funcs[:-1]):
            for ln in fn.lines:
                if rng.random() < 0.4:
                    fn.calls[ln] = rng.randint(i + 1, n_functions - 1)
        globals_ = [f"g_{k}" for k in range(rng.randint(0, 2))]
        return cls(funcs, globals_, rng)

    def run(self, max_steps: int = 50, p_bottom: float = 0.05, binary_id: str = "model") -> Trace:
        steps: list[Step] = []
        self._call(0, ["main"], {}, steps, max_steps, p_bottom)
        return Trace(tuple(steps), binary_id, False)

    def _call(self, fi, stack, args, steps, max_steps, p_bottom) -> None:
        rng = self.rng
        fn = self.functions[fi]
        for ln in fn.lines:
            for _ in range(rng.choice((1, 1, 1, 2, 3))):
                if len(steps) >= max_steps:
                    return
                variables = [VariableObservation(g, VarKind.GLOBAL, rng.choice(SMALL_VALUES)) for g in self.globals]
                variables += [
                    VariableObservation(p, VarKind.PARAMETER, args[p], fn.name, p in fn.pointer_params)
                    for p in fn.params
                ]
                variables += [VariableObservation(l, VarKind.LOCAL, rng.choice(SMALL_VALUES)) for l in fn.scopes[ln]]
                line = BOTTOM if rng.random() < p_bottom else ln
                steps.append(Step(len(steps), line, frozenset(stack), tuple(variables)))
                callee = fn.calls.get(ln)
                if callee is not None:
                    target = self.functions[callee]
                    callee_args = {p: rng.choice(SMALL_VALUES[:3]) for p in target.params}
                    self._call(callee, stack + [target.name], callee_args, steps, max_steps, p_bottom)


def model_trace(rng: random.Random, max_steps: int = 50) -> Trace:
    return ProgramModel.random(rng).run(max_steps=max_steps)


def with_step(trace: Trace, position: int, step: Step) -> Trace:
    """Insert ``step`` at ``position`` and renumber."""
    steps = list(trace.steps)
    steps.insert(position, step)
    return Trace(tuple(replace(s, index=i) for i, s in enumerate(steps)), trace.binary_id, trace.truncated)
