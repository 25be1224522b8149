_criterion_lines = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    _criterion_lines.append(f"ACCEPTANCE {number}: {status} - {detail}")


def record_skip(number: int, detail: str) -> None:
    _criterion_lines.append(f"ACCEPTANCE {number}: SKIP - {detail}")


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
