import pytest

from twistval.verifier import load_form


@pytest.fixture(scope="session")
def f34():
    return load_form(34)


@pytest.fixture(scope="session")
def f37():
    return load_form(37, "37a1")


@pytest.fixture(scope="session")
def f11():
    return load_form(11)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
