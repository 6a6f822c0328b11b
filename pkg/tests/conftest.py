import os
import sys

# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(cid, passed, detail):
    ACCEPTANCE[cid] = (bool(passed), detail)
    line = f"criterion {str(cid):>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (int(str(c).rstrip("abcdef")), str(c))):
        passed, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {str(cid):>2}: {'PASS' if passed else 'FAIL'}  {detail}")


sys.path.insert(0, os.path.dirname(__file__))
