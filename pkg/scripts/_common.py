"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from gateleak import aca, leakmodels, logicsim, power

log = logging.getLogger("scripts")


@dataclass
class Campaign:
    netlist: object
    metas: list
    traces: list
    frames: power.FrameSpec
    power: power.PowerMatrix
    model: leakmodels.LeakageVector
    lti: aca.LtiResult
    ranking: aca.LifRanking


def run(netlist, stimuli, metas, model, clock_period: int, frames_per_cycle: int, window: tuple[int, int],
        confidence: float = 0.99, jobs: int = 1) -> Campaign:
    """Simulate, estimate power, detect the LTI and rank cells."""
    t0 = time.perf_counter()
    cfg = logicsim.SimConfig(clock_period, 1, window_cycles=window)
    traces = logicsim.run_campaign(netlist, stimuli, cfg, jobs=jobs)
    fs = power.FrameSpec.from_cycles(clock_period, frames_per_cycle, *window)
    pm = power.estimate_power_matrix(netlist, traces, fs, jobs=jobs)
    thr = aca.threshold_from_confidence(len(model), confidence)
    lti = aca.detect_lti(pm, model, thr)
    cp = power.average_cell_power(netlist, traces, fs, lti.flagged_frames if lti.num_flagged else None, jobs)
    corr = aca.correlate_traces(traces, fs, lti, aca.ModelToggleVector.from_leakage(model), netlist.compiled.n_nets)
    rk = aca.lif_rank(corr, cp, thr, netlist)
    log.info("%d vectors, %d LTI frames, %d flagged cells in %.1f s", len(metas), lti.num_flagged,
             len(rk.flagged_cells), time.perf_counter() - t0)
    return Campaign(netlist, list(metas), traces, fs, pm, model, lti, rk)


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
