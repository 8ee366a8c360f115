"""Greedy line-chunk reducer with a C-Reduce-style interface.

    python -m dbgdiff.linereduce FILE PREDICATE

Rewrites FILE in place.  PREDICATE is an executable run as ``PREDICATE FILE``
from FILE's directory; exit status 0 means the candidate is still interesting.
Chunks of lines are deleted, halving the chunk size until single lines fail.
"""
from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path


def interesting(predicate: str, path: Path, lines: list[str], timeout: float) -> bool:
    path.write_text("".join(lines), encoding="utf-8")
    try:
        proc = subprocess.run([predicate, str(path)], cwd=path.parent, capture_output=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return False
    return proc.returncode == 0


def reduce(path: Path, predicate: str, timeout: float = 300.0) -> list[str]:
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    if not interesting(predicate, path, lines, timeout):
        raise SystemExit("the input is not interesting")
    chunk = max(1, len(lines) // 2)
    while True:
        progress = False
        i = 0
        while i < len(lines):
            candidate = lines[:i] + lines[i + chunk:]
            if candidate and interesting(predicate, path, candidate, timeout):
                lines = candidate
                progress = True
            else:
                i += chunk
        if chunk == 1 and not progress:
            break
        if not progress:
            chunk = max(1, chunk // 2)
    path.write_text("".join(lines), encoding="utf-8")
    return lines


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(description="line-based test-case reducer")
    p.add_argument("file")
    p.add_argument("predicate")
    p.add_argument("--timeout", type=float, default=300.0)
    args = p.parse_args(argv)
    lines = reduce(Path(args.file), args.predicate, args.timeout)
    print(f"reduced to {len(lines)} lines", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
