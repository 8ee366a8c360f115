"""Seed-deterministic random C program generator.

Produces closed, single-threaded programs (no input) built from globals,
functions with scalar and pointer parameters, nested block scopes, bounded
loops, multi-line conditionals and calls.  Arithmetic is kept within small
bounds (masked stores, guarded division) so generated programs are free of
signed overflow and division by zero by construction; the UB filter still
runs on them.

Usage::

    python -m dbgdiff.progen --seed 7 --out case.c
"""
from __future__ import annotations

import argparse
import random
import sys
from dataclasses import dataclass, field

MASK = 255
SCALAR_TYPES = ("int", "short", "char", "unsigned")


@dataclass
class _Fn:
    name: str
    params: list[tuple[str, str]]  # (type, name)
    index: int


@dataclass
class _Scope:
    readable: list[str]
    writable: list[str]
    pointers: list[str] = field(default_factory=list)


class ProgramGenerator:
    def __init__(self, seed: int, max_functions: int = 4, max_depth: int = 2):
        self.rng = random.Random(seed)
        self.max_depth = max_depth
        n_fn = self.rng.randint(1, max_functions)
        self.globals = [f"g_{i}" for i in range(self.rng.randint(2, 4))]
        self.fns: list[_Fn] = []
        for i in range(1, n_fn + 1):
            params = []
            for k in range(self.rng.randint(0, 3)):
                ptype = "int *" if self.rng.random() < 0.15 else self.rng.choice(SCALAR_TYPES)
                params.append((ptype, f"p_{i}_{k}"))
            self.fns.append(_Fn(f"func_{i}", params, i))
        self.lines: list[str] = []
        self._local = 0
        self._loops = 0

    # -- expressions -----------------------------------------------------

    def _atom(self, scope: _Scope) -> str:
        r = self.rng.random()
        if r < 0.25:
            return str(self.rng.randint(0, 9))
        if scope.pointers and r < 0.35:
            return f"*{self.rng.choice(scope.pointers)}"
        return self.rng.choice(scope.readable)

    def expr(self, scope: _Scope, depth: int = 0) -> str:
        if depth >= 2 or self.rng.random() < 0.35:
            return self._atom(scope)
        a = self.expr(scope, depth + 1)
        b = self.expr(scope, depth + 1)
        op = self.rng.choice(("+", "-", "^", "&", "|", "<", "==", "!=", "&&", "||", "/", "%", ">>", "*"))
        if op == "/":
            return f"({a} / (({b} & 7) + 1))"
        if op == "%":
            return f"({a} % (({b} & 7) + 1))"
        if op == ">>":
            return f"(({a} & {MASK}) >> {self.rng.randint(0, 3)})"
        if op == "*":
            return f"({a} * {self.rng.randint(0, 7)})"
        return f"({a} {op} {b})"

    def cond(self, scope: _Scope) -> str:
        a, b = self._atom(scope), self._atom(scope)
        return f"{a} {self.rng.choice(('<', '<=', '>', '>=', '==', '!='))} {b}"

    # -- statements ------------------------------------------------------

    def emit(self, indent: int, text: str) -> None:
        self.lines.append("  " * indent + text)

    def new_local(self) -> str:
        self._local += 1
        return f"l_{self._local}"

    def assign(self, scope: _Scope, indent: int) -> None:
        target = self.rng.choice(scope.writable + scope.pointers * 2) if scope.pointers else self.rng.choice(scope.writable)
        lhs = f"*{target}" if target in scope.pointers else target
        if self.rng.random() < 0.25:
            self.emit(indent, f"{lhs} = ({self.cond(scope)})")
            self.emit(indent + 2, f"? ({self.expr(scope)}) & {MASK}")
            self.emit(indent + 2, f": ({self.expr(scope)}) & {MASK};")
        else:
            self.emit(indent, f"{lhs} = ({self.expr(scope)}) & {MASK};")

    def call(self, caller: int, scope: _Scope, indent: int) -> bool:
        callees = [f for f in self.fns if f.index > caller]
        if not callees:
            return False
        fn = self.rng.choice(callees)
        args = []
        for ptype, _ in fn.params:
            if ptype.endswith("*"):
                args.append(f"&{self.rng.choice(self.globals)}")
            else:
                args.append(f"({self.expr(scope)}) & 127")
        target = self.rng.choice(scope.writable)
        self.emit(indent, f"{target} = {fn.name}({', '.join(args)}) & {MASK};")
        return True

    def block(self, caller: int, scope: _Scope, indent: int, depth: int, budget: int) -> None:
        for _ in range(budget):
            r = self.rng.random()
            if depth < self.max_depth and r < 0.15:
                self.emit(indent, f"if ({self.cond(scope)}) {{")
                self.nested(caller, scope, indent + 1, depth + 1)
                if self.rng.random() < 0.5:
                    self.emit(indent, "} else {")
                    self.nested(caller, scope, indent + 1, depth + 1)
                self.emit(indent, "}")
            elif depth < self.max_depth and r < 0.3 and self._loops < 3:
                self._loops += 1
                var = self.new_local()
                self.emit(indent, f"int {var};")
                bound = self.rng.randint(1, 3)
                self.emit(indent, f"for ({var} = 0; {var} < {bound}; {var}++) {{")
                inner = _Scope(scope.readable + [var], scope.writable, scope.pointers)
                self.nested(caller, inner, indent + 1, depth + 1)
                self.emit(indent, "}")
            elif r < 0.5 and self.call(caller, scope, indent):
                pass
            else:
                self.assign(scope, indent)

    def nested(self, caller: int, scope: _Scope, indent: int, depth: int) -> None:
        fresh = []
        for _ in range(self.rng.randint(0, 2)):
            name = self.new_local()
            self.emit(indent, f"int {name} = ({self.expr(scope)}) & {MASK};")
            fresh.append(name)
        inner = _Scope(scope.readable + fresh, scope.writable + fresh, scope.pointers)
        self.block(caller, inner, indent, depth, self.rng.randint(1, 3))

    def function(self, fn: _Fn) -> None:
        sig = ", ".join(f"{t} {n}" if not t.endswith("*") else f"int *{n}" for t, n in fn.params) or "void"
        storage = "static " if self.rng.random() < 0.5 else ""
        self.emit(0, f"{storage}int {fn.name}({sig}) {{")
        scalars = [n for t, n in fn.params if not t.endswith("*")]
        pointers = [n for t, n in fn.params if t.endswith("*")]
        locals_ = []
        for _ in range(self.rng.randint(1, 2)):
            name = self.new_local()
            init = self.expr(_Scope(self.globals + scalars, [], pointers))
            self.emit(1, f"int {name} = ({init}) & {MASK};")
            locals_.append(name)
        scope = _Scope(self.globals + scalars + locals_, self.globals + locals_, pointers)
        self.block(fn.index, scope, 1, 0, self.rng.randint(2, 4))
        self.emit(1, f"return ({self.expr(scope)}) & {MASK};")
        self.emit(0, "}")

    def program(self) -> str:
        self._loops = 0
        self.emit(0, "#include <stdio.h>")
        for g in self.globals:
            qual = "static " if self.rng.random() < 0.3 else ""
            self.emit(0, f"{qual}int {g} = {self.rng.randint(0, 9)};")
        for fn in reversed(self.fns):
            self._loops = 0
            self.function(fn)
        self._loops = 0
        self.emit(0, "int main(void) {")
        name = self.new_local()
        self.emit(1, f"int {name} = {self.rng.randint(0, 9)};")
        scope = _Scope(self.globals + [name], self.globals + [name])
        if self.fns:
            self.call(0, scope, 1)
        self.block(0, scope, 1, 0, self.rng.randint(2, 4))
        checksum = " ^ ".join(self.globals + [name])
        self.emit(1, f'printf("%d\\n", {checksum});')
        self.emit(1, "return 0;")
        self.emit(0, "}")
        return "\n".join(self.lines) + "\n"


def generate(seed: int, **kwargs) -> str:
    return ProgramGenerator(seed, **kwargs).program()


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-functions", type=int, default=4)
    args = p.parse_args(argv)
    with open(args.out, "w", encoding="utf-8") as fp:
        fp.write(generate(args.seed, max_functions=args.max_functions))
    return 0


if __name__ == "__main__":
    sys.exit(main())
