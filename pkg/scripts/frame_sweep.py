"""Flagged sets at several frame sizes over one set of AES traces.

Reports, for each coarser frame size, how many of its flagged cells are also
flagged at the finest size.

    python scripts/frame_sweep.py --n 1024 --frames 64 32 16 8 2
"""

from __future__ import annotations

import argparse

from gateleak import aca, leakmodels, logicsim, power
from gateleak.designs import aes

from _common import setup_logging


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--frames", type=int, nargs="+", default=[64, 32, 16, 8, 2])
    ap.add_argument("--confidence", type=float, default=0.99)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    setup_logging(args.verbose)

    camp = aes.AesCampaign()
    nl = aes.gen_aes_core(camp.sboxes_per_cycle)
    metas = leakmodels.gen_random_vectors(args.n, "fixed", args.seed)
    model = leakmodels.specific_model(metas, leakmodels.TargetSpec())
    cfg = logicsim.SimConfig(camp.clock_period, 1, window_cycles=camp.window)
    traces = logicsim.run_campaign(nl, aes.aes_stimuli(metas, camp.num_cycles), cfg)
    thr = aca.threshold_from_confidence(len(model), args.confidence)
    H = aca.ModelToggleVector.from_leakage(model)

    fine = None
    for fpc in sorted(args.frames, reverse=True):
        fs = power.FrameSpec.from_cycles(camp.clock_period, fpc, *camp.window)
        pm = power.estimate_power_matrix(nl, traces, fs)
        lti = aca.detect_lti(pm, model, thr)
        cp = power.average_cell_power(nl, traces, fs, lti.flagged_frames if lti.num_flagged else None)
        rk = aca.lif_rank(aca.correlate_traces(traces, fs, lti, H, nl.compiled.n_nets), cp, thr, nl)
        flagged = set(rk.flagged_cells)
        if fine is None:
            fine = flagged
        extra = len(flagged - fine)
        print(f"{fpc:>3} frames/cycle  LTI {lti.num_flagged:>4}/{fs.num_frames:<4} flagged {len(flagged):>4}  "
              f"not flagged at finest size {extra}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
