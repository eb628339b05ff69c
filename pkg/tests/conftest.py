import json
from pathlib import Path

import numpy as np
import pytest

from psigrad.fraccalc import SampledFunction
from psigrad.objectives import by_name
from psigrad.weights import from_config

DATA = Path(__file__).parent / "data"

#: criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def load_stored_trajectories():
    index = json.loads((DATA / "trajectories.json").read_text())
    out = []
    for case in index:
        arr = np.loadtxt(DATA / case["file"], delimiter=",", skiprows=1)
        out.append(
            {
                **case,
                "sample": SampledFunction(arr[:, 0], arr[:, 1:], uniform_h=case["h"]),
                "w": from_config(case["weight"]),
                "obj": by_name(case["objective"], **case["params"]),
            }
        )
    return out


@pytest.fixture(scope="session")
def stored_trajectories():
    return load_stored_trajectories()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
