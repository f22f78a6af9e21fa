"""Shared charts and the acceptance summary."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import pytest

from devshell.geometry import CurveSpec, make_chart
from devshell.profiles import Profile

TWO_PI = 2.0 * np.pi


def variable_spec() -> CurveSpec:
    return CurveSpec(TWO_PI, Profile.harmonic("sin", 0.3, 1, TWO_PI),
                     Profile.harmonic("cos", 0.2, 1, TWO_PI, offset=1.0), 0.5, 0.5)


SPECS = {"cylinder": CurveSpec.cylinder, "variable": variable_spec}


@lru_cache(maxsize=None)
def chart_for(kind: str, nt: int, ns: int, order: int = 4):
    return make_chart(SPECS[kind](), nt, ns, order)


@pytest.fixture(scope="session")
def cyl64():
    return chart_for("cylinder", 64, 32)


@pytest.fixture(scope="session")
def var64():
    return chart_for("variable", 64, 32)


# --------------------------------------------------------------------------- acceptance lines

_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one pass/fail line per criterion: ``acceptance(key, passed, detail)``."""

    def record(key: str, passed: bool, detail: str):
        prev = _RESULTS.get(key)
        ok = passed and (prev is None or prev[0])
        text = detail if prev is None else f"{prev[1]}; {detail}"
        _RESULTS[key] = (ok, text)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {key}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: int(k)):
        ok, text = _RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {text}")
