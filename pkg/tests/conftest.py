import sys


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance check."""
    if report.when != "call":
        return
    module = report.nodeid.split("::")[0]
    if not module.endswith("test_acceptance.py"):
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"[acceptance] {name}: {status}", file=sys.stderr, flush=True)
