from __future__ import annotations

import pytest

from spectral_shift.generators import ContinuedFraction, SftGraph, Substitution
from spectral_shift.measures import parry_measure, sturmian_measure, substitution_measure

BERNOULLI = [["0", 0, 0], ["1", 0, 0]]
GOLDEN = [["a", 1, 1], ["b", 1, 2], ["c", 2, 1]]
FIBONACCI_RULES = {"a": "ab", "b": "a"}
THUE_MORSE_RULES = {"a": "ab", "b": "ba"}
GOLDEN_CF = [1] * 40
SILVER_CF = [2] * 30
INCREASING_CF = list(range(1, 16))

# criterion lines printed at the end of the session by the acceptance suite
ACCEPTANCE_LINES: dict[int, str] = {}


def _family(name, N):
    if name == "bernoulli":
        g = SftGraph(BERNOULLI)
        t = g.language(N)
        return g, t, parry_measure(g, None, t)
    if name == "golden":
        g = SftGraph(GOLDEN)
        t = g.language(N)
        return g, t, parry_measure(g, None, t)
    if name == "fib_sub":
        s = Substitution(FIBONACCI_RULES)
        t = s.language(N)
        return s, t, substitution_measure(s, t)
    if name == "fib_sturm":
        c = ContinuedFraction(GOLDEN_CF)
        t = c.language(N)
        return c, t, sturmian_measure(c, t)
    if name == "silver_sturm":
        c = ContinuedFraction(SILVER_CF)
        t = c.language(N)
        return c, t, sturmian_measure(c, t)
    raise KeyError(name)


_CACHE: dict = {}


def family(name, N=8):
    key = (name, N)
    if key not in _CACHE:
        _CACHE[key] = _family(name, N)
    return _CACHE[key]


FAMILIES = ["bernoulli", "golden", "fib_sub", "fib_sturm", "silver_sturm"]


@pytest.fixture(params=FAMILIES)
def fam(request):
    return (request.param, *family(request.param))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
