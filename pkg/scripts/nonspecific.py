"""Non-specific test: all-byte bias, single-byte bias and same-distribution controls.

    python scripts/nonspecific.py --n-per-group 512 --repeats 20
"""

from __future__ import annotations

import argparse

import numpy as np

from gateleak import aca, leakmodels, power
from gateleak.designs import aes

from _common import run, setup_logging


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-per-group", type=int, default=512)
    ap.add_argument("--round", type=int, default=6)
    ap.add_argument("--repeats", type=int, default=20, help="control relabellings")
    ap.add_argument("--frames-per-cycle", type=int, default=16)
    ap.add_argument("--confidence", type=float, default=0.99)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    setup_logging(args.verbose)

    nl = aes.gen_aes_core(16)
    clock = aes.AesCampaign().clock_period
    window = (aes.START_CYCLE, aes.completion_cycle(16))
    npg = args.n_per_group

    for name, biased in (("all bytes", tuple(range(16))), ("byte 0", (0,))):
        g1, g2, lv = leakmodels.gen_nonspecific_groups(npg, leakmodels.BiasSpec(args.round, biased, 0), 5)
        metas = leakmodels.interleave(g1, g2)
        c = run(nl, aes.aes_stimuli(metas, window[1]), metas, lv, clock, args.frames_per_cycle, window,
                args.confidence)
        print(f"{name:<10} LTI frames {c.lti.num_flagged:>4}  flagged cells {len(c.ranking.flagged_cells):>5}")
        del c

    pool = leakmodels.gen_random_vectors(2 * npg, "random", 11)
    labels = np.tile([-1.0, 1.0], npg)
    c = run(nl, aes.aes_stimuli(pool, window[1]), pool, leakmodels.LeakageVector(labels, "nonspecific"),
            clock, args.frames_per_cycle, window, args.confidence)
    mean_cells = power.mean_cell_frame_power(nl, c.traces, c.frames)
    thr = aca.threshold_from_confidence(2 * npg, args.confidence)
    frames, cells = [], []
    for r in range(args.repeats):
        lab = np.where(leakmodels.ByteStream(100 + r).permutation(2 * npg) % 2 == 0, -1.0, 1.0)
        lv = leakmodels.LeakageVector(lab, "nonspecific")
        lti = aca.detect_lti(c.power, lv, thr)
        frames.append(lti.num_flagged)
        if not lti.num_flagged:
            cells.append(0)
            continue
        cp = power.summarize_cell_power(nl, mean_cells, lti.flagged_frames)
        corr = aca.correlate_traces(c.traces, c.frames, lti, aca.ModelToggleVector.from_leakage(lv),
                                    nl.compiled.n_nets)
        cells.append(len(aca.lif_rank(corr, cp, thr, nl).flagged_cells))
    n_frames = c.frames.num_frames
    print(f"controls   LTI frames {sum(frames)}/{args.repeats * n_frames} "
          f"({sum(frames) / (args.repeats * n_frames):.4f}), flagged cells per repeat {cells}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
