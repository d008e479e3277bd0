from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from gateleak.designs import aes

from campaigns import run_aes_campaign

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} - {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def _label_key(line: str):
    label = line.split(":")[0].removeprefix("criterion ")
    digits = label.rstrip("abcdefghijklmnopqrstuvwxyz")
    return int(digits), label[len(digits):]


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=_label_key):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def aes4():
    return aes.gen_aes_core(4)


@pytest.fixture(scope="session")
def aes16():
    return aes.gen_aes_core(16)


@pytest.fixture(scope="session")
def aes_campaign(aes4):
    """1024 noiseless traces on the four-S-box core, 64 frames per cycle over cycles 12..19."""
    return run_aes_campaign(aes4, 1024, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
