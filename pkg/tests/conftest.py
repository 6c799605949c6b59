from fractions import Fraction

import pytest

from limitsets.family import build_family
from limitsets.poly import parse

ACCEPTANCE_LINES: list[str] = []

SEXTIC = "x*y*(x+1)*(x-1)*(y+1)*(y-1)"
PAPER_GLUING = [(1, Fraction(1, 2)), (1, Fraction(-1, 2)),
                (-1, Fraction(1, 2)), (-1, Fraction(-1, 2))]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ex1():
    return build_family(parse("x*y"), 1)


@pytest.fixture(scope="session")
def ex2():
    return build_family(parse(SEXTIC), 3, PAPER_GLUING)


@pytest.fixture(scope="session")
def ex3():
    return build_family(parse(SEXTIC), 3, variant="star")
