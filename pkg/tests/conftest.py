import oracles


def pytest_terminal_summary(terminalreporter):
    if not oracles.ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(oracles.ACCEPTANCE):
        ok, detail = oracles.ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
