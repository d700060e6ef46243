import numpy as np
import pytest

from degentrace import TestFunction, build_model_symbol
from degentrace.symbol import ModelProblem, PolynomialSymbol

ACCEPTANCE_LINES: list[str] = []


def record(label: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def k3_model():
    return build_model_symbol(3)


@pytest.fixture(scope="session")
def even_phi():
    return TestFunction()


@pytest.fixture(scope="session")
def oscillator():
    return ModelProblem(1, 2, PolynomialSymbol(1, {(2, 0): 1.0, (0, 2): 1.0}), PolynomialSymbol(1, {}))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
