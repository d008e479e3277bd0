"""Register/bus store scenario with and without the register clear.

    python scripts/bus_ablation.py --n 512
"""

from __future__ import annotations

import argparse

from gateleak import leakmodels
from gateleak.aca import backannotate
from gateleak.designs import aes, bus

from _common import run, setup_logging


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--frames-per-cycle", type=int, default=64)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    setup_logging(args.verbose)

    metas = leakmodels.gen_random_vectors(args.n, "random", args.seed)
    for clear in (False, True):
        sc = bus.gen_bus_interface_scenario(clear_register=clear)
        model = leakmodels.specific_model(metas, sc.target)
        c = run(sc.netlist, sc.stimuli(metas), metas, model, aes.AesCampaign().clock_period,
                args.frames_per_cycle, sc.window)
        n = len(sc.netlist.cells)
        print(f"clear_register={clear}: {len(c.ranking.flagged_cells)} of {n} cells flagged")
        for group, cells in sc.watch.items():
            ranks = [c.ranking.cell_rank(x) for x in cells]
            hit = sum(x in set(c.ranking.flagged_cells) for x in cells)
            print(f"  {group:<14} flagged {hit}/{len(cells)}  ranks {ranks}")
        for row in backannotate(c.ranking, sc.netlist):
            print(f"  {row['file']:<18} {row['cells']:>4} cells")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
