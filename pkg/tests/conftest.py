import shared


def pytest_terminal_summary(terminalreporter):
    lines = shared.criterion_lines()
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
