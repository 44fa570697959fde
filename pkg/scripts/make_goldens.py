#!/usr/bin/env python3
"""Generate the fine-grid (N_r = 200) reference discharge trajectories used
by the grid-fidelity acceptance tests.  Takes a few minutes; output is
committed under tests/data/ so the test suite does not rerun it."""
import csv
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from csespm.params import CellParameters, DiscretizationConfig, params_for_rate  # noqa: E402
from csespm.simulate import SolverConfig, cc_profile, initial_state, simulate  # noqa: E402

RUNS = (("C/4", 0.25, "c4"), ("C/2", 0.5, "c2"), ("1C", 1.0, "1c"))


def main():
    out_dir = ROOT / "tests" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    base = CellParameters()
    for label, c_rate, tag in RUNS:
        params = params_for_rate(base, label)
        disc = DiscretizationConfig(N_r=200, N_e=6)
        profile = cc_profile(params, c_rate, "dis")
        init = initial_state(params, disc, 1.0, "dis")
        t0 = time.time()
        res = simulate(profile, init, params, disc, SolverConfig())
        path = out_dir / f"golden_nr200_{tag}_discharge.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "voltage_V", "r_p_over_R", "soc_p"])
            for i in range(len(res)):
                w.writerow([f"{res.time[i]:.6f}", f"{res.voltage[i]:.9f}",
                            f"{res.r_p[i]:.9f}", f"{res.soc_p[i]:.9f}"])
        print(f"{label}: {len(res)} records, status {res.status}, "
              f"{time.time() - t0:.0f}s -> {path.name}")


if __name__ == "__main__":
    main()
