"""PASS/FAIL lines collected by the acceptance suite and echoed in the terminal summary."""

LINES: list[str] = []


def verdict(name: str, ok: bool, detail: str = "") -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}" + (f": {detail}" if detail else "")
    LINES.append(line)
    print(line)
    assert ok, line
