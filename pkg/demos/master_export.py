"""Export the master problem with a GBD cut pool and re-solve it.

Run with ``python demos/master_export.py [out.lp]``. The LP file holds the
linearized distance constraints and every cut; solving it by enumeration
gives the same value as the built-in branch and bound.
"""

import sys

from magbd.experiments import PRESETS
from magbd.gbd import SolverConfig, run
from magbd.master import export_milp, solve_exported_milp, solve_master
from magbd.scenario import distance_matrix


def main(path: str = "master.lp") -> None:
    scenario = PRESETS["desk"]
    D = distance_matrix(scenario.grid())
    res = run(scenario.channel(1), D, SolverConfig())
    text = export_milp(D, scenario.dmin_m, res.cuts, scenario.M)
    with open(path, "w") as fh:
        fh.write(text)
    bb = solve_master(D, scenario.dmin_m, res.cuts, scenario.M)
    eta, placement = solve_exported_milp(text, scenario.M, D.shape[0])
    print(f"wrote {path}: {len(res.cuts)} cuts, {len(text.splitlines())} lines")
    print(f"branch and bound: eta {bb.eta:.6e} at {bb.placement}")
    print(f"exported MILP:    eta {eta:.6e} at {placement}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "master.lp")
