"""Collected PASS/FAIL lines for the acceptance suite."""

LINES: list[str] = []


def record(label: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    LINES.append(line)
    print(line)
    return ok
