"""Walk through one small instance: GBD bounds, the chosen placement and a check.

Run with ``python demos/single_instance.py [seed]``. The desk preset has two
movable elements and two users on a 3 x 3 grid, so the result can be checked
against exhaustive search over all 72 ordered placements.
"""

import sys

import numpy as np

from magbd.baselines import oracle_exhaustive
from magbd.experiments import PRESETS
from magbd.gbd import SolverConfig, run
from magbd.scenario import distance_matrix, watts_to_dbm


def main(seed: int = 0) -> None:
    scenario = PRESETS["desk"]
    grid = scenario.grid()
    D = distance_matrix(grid)
    channel = scenario.channel(seed)
    config = SolverConfig(gamma_db=10.0)

    print(f"grid of {grid.N} positions, step {scenario.step_d_m} m, dmin {scenario.dmin_m} m")
    res = run(channel, D, config)
    print("iter  branch      UB [dBm]   LB [dBm]  placement")
    for t in res.trace:
        ub = f"{watts_to_dbm(t.UB):9.3f}" if np.isfinite(t.UB) else "      inf"
        lb = f"{watts_to_dbm(t.LB):9.3f}" if t.LB > 0 else "     -inf"
        print(f"{t.iteration:4d}  {t.branch:10s} {ub}  {lb}  {t.placement}")

    print(f"\nstatus {res.status} after {res.iterations} iterations")
    print(f"placement {res.placement.positions} at {grid.positions[list(res.placement.positions)].tolist()} m")
    print(f"power {watts_to_dbm(res.power):.4f} dBm, SINR {10 * np.log10(res.sinr)} dB")

    ref = oracle_exhaustive(channel, D, scenario.dmin_m, config.gamma(scenario.K))
    print(f"exhaustive search: {watts_to_dbm(ref.power_w):.4f} dBm at {ref.placement} "
          f"({ref.info['solved']} placements solved)")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
