"""Undefined-behavior filter backed by the compiler's runtime sanitizers.

Compiles the source with UBSan (and ASan where it works), runs it once and
reports through the exit status: 0 clean, 1 rejected (sanitizer report,
non-terminating or crashing program), 2 the filter itself failed.

Usage::

    python -m dbgdiff.ubfilter case.c [--cc gcc] [--timeout 10]
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import tempfile

CLEAN, REJECTED, CRASHED = 0, 1, 2
SANITIZER_EXIT = 86


def _compile(cc: str, src: str, out: str, sanitizers: str) -> subprocess.CompletedProcess:
    argv = [cc, "-w", "-O0", "-g", f"-fsanitize={sanitizers}", "-fno-sanitize-recover=all", src, "-o", out]
    return subprocess.run(argv, capture_output=True, text=True, timeout=120)


def check(src: str, cc: str = "gcc", timeout: float = 10.0) -> tuple[int, str]:
    with tempfile.TemporaryDirectory(prefix="dbgdiff-ub-") as tmp:
        exe = os.path.join(tmp, "a.out")
        built = None
        for sanitizers in ("undefined,address", "undefined"):
            built = _compile(cc, src, exe, sanitizers)
            if built.returncode == 0:
                break
        if built is None or built.returncode != 0:
            return CRASHED, f"filter compile failed: {built.stderr if built else ''}"
        env = dict(os.environ)
        env["UBSAN_OPTIONS"] = f"halt_on_error=1:exitcode={SANITIZER_EXIT}"
        env["ASAN_OPTIONS"] = f"detect_leaks=0:exitcode={SANITIZER_EXIT}"
        try:
            run = subprocess.run([exe], capture_output=True, text=True, timeout=timeout, env=env, stdin=subprocess.DEVNULL)
        except subprocess.TimeoutExpired:
            return REJECTED, "program did not terminate"
        if run.returncode == SANITIZER_EXIT or "runtime error" in run.stderr or "AddressSanitizer" in run.stderr:
            return REJECTED, run.stderr.strip().splitlines()[0] if run.stderr.strip() else "sanitizer report"
        if run.returncode < 0:
            return REJECTED, f"program killed by signal {-run.returncode}"
        return CLEAN, ""


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("src")
    p.add_argument("--cc", default="gcc")
    p.add_argument("--timeout", type=float, default=10.0)
    args = p.parse_args(argv)
    try:
        status, msg = check(args.src, args.cc, args.timeout)
    except (OSError, subprocess.SubprocessError) as exc:
        status, msg = CRASHED, str(exc)
    if msg:
        print(msg, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
