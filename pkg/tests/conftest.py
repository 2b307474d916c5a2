from collections import defaultdict

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    by_criterion = defaultdict(list)
    for line in ACCEPTANCE_LINES:
        head, detail = line.split("  ", 1)
        _, n, verdict = head.split()
        by_criterion[int(n.rstrip(":"))].append((verdict == "PASS", detail))
    terminalreporter.section("acceptance criteria")
    for n in sorted(by_criterion):
        parts = by_criterion[n]
        ok = all(p for p, _ in parts)
        if len(parts) == 1:
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {parts[0][1]}")
            continue
        passed = sum(p for p, _ in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  ({passed}/{len(parts)} parts)")
        for p, detail in parts:
            terminalreporter.write_line(f"    {'ok  ' if p else 'FAIL'} {detail}")
