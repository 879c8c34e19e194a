def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
    missing = [n for n in range(1, 9) if n not in verdicts]
    for n in missing:
        terminalreporter.write_line(f"criterion {n} [FAIL] did not record a verdict (test errored or was deselected)")
