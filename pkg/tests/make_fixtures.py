"""Regenerate the stored gradient-flow trajectories in ``tests/data``.

Run ``python3 tests/make_fixtures.py``; the files are committed so the probe
tests read fixed samples instead of re-solving.
"""

import json
from pathlib import Path

import numpy as np

from psigrad.flows import FlowSpec, run_flow
from psigrad.objectives import by_name
from psigrad.weights import from_config

DATA = Path(__file__).parent / "data"

CASES = [
    {"name": "quad_a05_t2", "objective": "quadratic", "params": {"Q": [[1.0, 0.0], [0.0, 4.0]]}, "alpha": 0.5, "weight": {"family": "power", "k": 2.0}, "init": [1.0, 1.0]},
    {"name": "quad_shift_a08_t", "objective": "quadratic", "params": {"Q": [[1.0, 0.0], [0.0, 4.0]], "b": [1.0, 4.0]}, "alpha": 0.8, "weight": {"family": "identity"}, "init": [3.0, -1.0]},
    {"name": "booth_a08_t", "objective": "booth", "params": {}, "alpha": 0.8, "weight": {"family": "identity"}, "init": [10.0, 5.0]},
    {"name": "booth_a05_tlog1p", "objective": "booth", "params": {}, "alpha": 0.5, "weight": {"family": "t_log1p"}, "init": [10.0, 5.0]},
    {"name": "zakharov_a095_t2", "objective": "zakharov", "params": {}, "alpha": 0.95, "weight": {"family": "power", "k": 2.0}, "init": [1.0, 0.5]},
]
H, T = 1e-3, 1.0


def main() -> None:
    DATA.mkdir(exist_ok=True)
    index = []
    for case in CASES:
        obj = by_name(case["objective"], **case["params"])
        spec = FlowSpec("caputo", obj, 1.0, case["alpha"], from_config(case["weight"]), case["init"], T=T, h=H)
        traj = run_flow(spec)
        path = DATA / f"{case['name']}.csv"
        np.savetxt(path, np.column_stack([traj.grid, traj.states]), fmt="%.17e", delimiter=",", header="t,x_0,x_1", comments="")
        index.append({**case, "file": path.name, "h": H, "T": T, "beta": 1.0})
    (DATA / "trajectories.json").write_text(json.dumps(index, indent=2) + "\n")


if __name__ == "__main__":
    main()
