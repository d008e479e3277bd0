"""Subtract growing top fractions of the flagged cells and re-run CPA.

Prints MTD per fraction alongside equal-sized random cell sets.

    python scripts/subtraction_sweep.py --n 1024 --seed 1
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

from gateleak import leakmodels, power, verify
from gateleak.designs import aes

from _common import run, setup_logging


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sboxes", type=int, default=4, choices=(4, 16))
    ap.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.5, 1.0])
    ap.add_argument("--random-sets", type=int, default=10)
    ap.add_argument("--csv", help="write the table here as well")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    setup_logging(args.verbose)

    camp = aes.AesCampaign(sboxes_per_cycle=args.sboxes)
    nl = aes.gen_aes_core(args.sboxes)
    metas = leakmodels.gen_random_vectors(args.n, "fixed", args.seed)
    model = leakmodels.specific_model(metas, leakmodels.TargetSpec())
    c = run(nl, aes.aes_stimuli(metas, camp.num_cycles), metas, model, camp.clock_period,
            camp.frames_per_cycle, camp.window)
    orig = verify.cpa_attack(c.power, metas)
    if not orig.disclosed:
        print("CPA does not disclose the key on the unmodified traces", file=sys.stderr)
        return 1

    flagged = set(c.ranking.flagged_cells)
    order = [cell for cell, _ in sorted(c.ranking.cells_by_max_f(), key=lambda t: -t[1]) if cell in flagged]
    sets, labels = [], []
    for f in args.fractions:
        k = max(1, math.ceil(f * len(order)))
        sets.append(order[:k])
        labels.append(f"top {f:.0%} ({k} cells)")
    ids = [cell.instance_id for cell in nl.cells]
    for r in range(args.random_sets):
        sets.append([ids[i] for i in leakmodels.ByteStream(1000 + r).permutation(len(ids))[:len(order)]])
        labels.append(f"random #{r} ({len(order)} cells)")
    rows = power.subset_power_matrix(nl, c.traces, c.frames, sets)

    table = [("set", "mtd", "mtd_ratio")]
    for label, sub in zip(labels, rows):
        res = verify.subtract_and_reattack(c.power, sub, metas, original=orig)
        table.append((label, res.modified.mtd, res.mtd_ratio))
    print(f"{len(nl.cells)} cells, {len(order)} flagged, original MTD {orig.mtd}")
    for label, mtd, ratio in table:
        print(f"{label:<28} {str(mtd):>6} {ratio!s:>9}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(table)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
