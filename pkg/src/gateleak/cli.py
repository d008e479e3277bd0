"""Command-line campaign runner.

Each subcommand reads the artifacts of its predecessor from the output
directory and writes its own::

    <out>/design/     netlist.net, library.lib, design.json
    <out>/stimuli/    vectors.jsonl
    <out>/traces/     traces.bin
    <out>/power/      power.csv | power.bin, cell_frame_power.npy
    <out>/aca/        lti.json, ranking.json, ranking.csv, origins.json
    <out>/verify/     cpa.json, convergence.csv
    <out>/report.json, <out>/timing.json

Exit codes: 0 success, 1 design or analysis error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import aca, leakmodels, logicsim, power, verify
from .config import CampaignConfig, ConfigError, load_config
from .designs import aes, bus, toy
from .netlist import Netlist, NetlistError, default_library, format_library, format_netlist, parse_library, \
    parse_netlist

log = logging.getLogger("gateleak")

PHASES = ("gen-design", "simulate", "power", "aca", "verify")
PHASE_LABEL = {"gen-design": "design generation", "simulate": "logic simulation", "power": "power estimation",
               "aca": "correlation analysis", "verify": "CPA verification"}


class MissingArtifact(FileNotFoundError):
    pass


class PhaseError(RuntimeError):
    def __init__(self, phase: str, message: str, code: int = 1):
        self.phase = phase
        self.code = code
        super().__init__(f"[{phase}] {message}")


# ---------------------------------------------------------------------------
# Protocols: how a design is driven and what it is expected to leak

@dataclass
class Protocol:
    name: str
    num_cycles: int
    window: tuple[int, int]
    key_policy: str
    target: leakmodels.TargetSpec
    stimulus: Callable[[leakmodels.VectorMeta], logicsim.Stimulus]


def protocol_for(cfg: CampaignConfig) -> Protocol:
    d, sim = cfg.design, cfg.simulation
    kind = d.kind
    if kind == "aes":
        n_cyc = sim.num_cycles or aes.AesCampaign().num_cycles
        proto = Protocol("aes", n_cyc, aes.AesCampaign().window, "fixed", leakmodels.TargetSpec(),
                         lambda m: aes.aes_stimulus(m, n_cyc))
    elif kind == "toy":
        n_cyc = sim.num_cycles or toy.TOY_CYCLES
        target = leakmodels.TargetSpec("round_input", 0, 0, "bit", bit=d.bit_selector)
        proto = Protocol("toy", n_cyc, toy.TOY_WINDOW, "fixed", target,
                         lambda m: toy.toy_stimulus(m, d.bit_selector, n_cyc))
    else:
        n_cyc = sim.num_cycles or bus.BUS_CYCLES
        proto = Protocol("bus", n_cyc, bus.BUS_WINDOW, "random",
                         leakmodels.TargetSpec("round_input", 1, 0, "hamming_weight"),
                         lambda m: bus.bus_stimulus(m, d.clear_register, n_cyc))
    if sim.window_cycles is not None:
        proto.window = (int(sim.window_cycles[0]), int(sim.window_cycles[1]))
    if proto.window[1] > proto.num_cycles:
        raise ConfigError("simulation.window_cycles", f"window {proto.window} ends after num_cycles "
                                                      f"{proto.num_cycles}")
    if cfg.test.target:
        try:
            proto.target = leakmodels.TargetSpec(**cfg.test.target)
        except (TypeError, ValueError) as e:
            raise ConfigError("test.target", str(e)) from None
    return proto


# ---------------------------------------------------------------------------
# Artifact helpers

class Artifacts:
    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, *parts: str, create: bool = False) -> Path:
        p = self.root.joinpath(*parts)
        if create:
            p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def need(self, *parts: str) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise MissingArtifact(f"missing artifact {p}; run the earlier phase first")
        return p

    def write_json(self, obj, *parts: str) -> None:
        self.path(*parts, create=True).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n")

    def read_json(self, *parts: str):
        return json.loads(self.need(*parts).read_text())

    def record_time(self, phase: str, seconds: float) -> None:
        p = self.path("timing.json", create=True)
        timing = json.loads(p.read_text()) if p.exists() else {}
        timing[phase] = round(seconds, 4)
        p.write_text(json.dumps(timing, indent=1, sort_keys=True) + "\n")


def _library(cfg: CampaignConfig):
    if cfg.design.library is None:
        return default_library()
    return parse_library(cfg.resolve(cfg.design.library).read_text())


def _load_design(art: Artifacts) -> Netlist:
    lib = parse_library(art.need("design", "library.lib").read_text())
    return parse_netlist(art.need("design", "netlist.net").read_text(), lib)


def _frame_spec(cfg: CampaignConfig, proto: Protocol) -> power.FrameSpec:
    return power.FrameSpec.from_cycles(cfg.simulation.clock_period, cfg.frames.frames_per_cycle, *proto.window)


def _sim_config(cfg: CampaignConfig, proto: Protocol) -> logicsim.SimConfig:
    return logicsim.SimConfig(cfg.simulation.clock_period, cfg.simulation.reset_cycles, "zero", proto.window)


def _load_power(art: Artifacts) -> power.PowerMatrix:
    if art.path("power", "power.bin").exists():
        return power.load_power_bin(art.path("power", "power.bin"))
    return power.load_power_csv(art.need("power", "power.csv"))


def _model(cfg: CampaignConfig, proto: Protocol, metas) -> leakmodels.LeakageVector:
    if cfg.test.kind == "nonspecific":
        labels = [m.group_label for m in metas]
        if any(lb is None for lb in labels):
            raise PhaseError("aca", "non-specific test needs group labels in stimuli/vectors.jsonl")
        return leakmodels.LeakageVector(np.array(labels, np.float64), "nonspecific")
    return leakmodels.specific_model(metas, proto.target)


def _threshold(cfg: CampaignConfig, m: int) -> float:
    if cfg.test.threshold is not None:
        return float(cfg.test.threshold)
    return aca.threshold_from_confidence(m, cfg.test.confidence)


# ---------------------------------------------------------------------------
# Phases

def phase_gen_design(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    d = cfg.design
    extra: dict = {}
    if d.netlist is not None:
        nl = parse_netlist(cfg.resolve(d.netlist).read_text(), _library(cfg))
    elif d.generator == "aes":
        nl = aes.gen_aes_core(d.sboxes_per_cycle)
    elif d.generator == "toy":
        nl, _ = toy.gen_toy_leaky(d.bit_selector, d.decoy_only)
        if not d.decoy_only:
            extra["designated_cell"] = toy.designated_cell(nl)
    else:
        sc = bus.gen_bus_interface_scenario(d.clear_register)
        nl = sc.netlist
        extra["watch"] = sc.watch
        extra["schedule"] = [f"{c}: {op}" for c, op in sc.schedule]
    art.path("design", "netlist.net", create=True).write_text(format_netlist(nl))
    art.path("design", "library.lib").write_text(format_library(nl.cell_library))
    origins: dict[str, int] = {}
    for c in nl.cells:
        f = c.origin[0] if c.origin else "unattributed"
        origins[f] = origins.get(f, 0) + 1
    art.write_json({"kind": d.kind, "cells": len(nl.cells), "nets": nl.compiled.n_nets,
                    "origin_files": origins, **extra}, "design", "design.json")

    proto = protocol_for(cfg)
    s = cfg.stimuli
    if s.source == "file":
        metas = leakmodels.load_metadata(cfg.resolve(s.path))
    elif s.source == "nonspecific":
        b = s.bias
        bias = leakmodels.BiasSpec(int(b.get("round", 6)), tuple(b.get("bytes", range(16))), int(b.get("value", 0)))
        g1, g2, _ = leakmodels.gen_nonspecific_groups(s.n_per_group, bias, cfg.seed)
        metas = leakmodels.interleave(g1, g2)
    else:
        metas = leakmodels.gen_random_vectors(s.n, s.key_policy or proto.key_policy, cfg.seed)
    leakmodels.save_metadata(metas, art.path("stimuli", "vectors.jsonl", create=True))
    log.info("design %s: %d cells, %d vectors", d.kind, len(nl.cells), len(metas))


def phase_simulate(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    nl = _load_design(art)
    proto = protocol_for(cfg)
    metas = leakmodels.load_metadata(art.need("stimuli", "vectors.jsonl"))
    traces = logicsim.run_campaign(nl, [proto.stimulus(m) for m in metas], _sim_config(cfg, proto), jobs)
    with open(art.path("traces", "traces.bin", create=True), "wb") as fh:
        logicsim.write_traces(fh, traces, nl.compiled.n_nets)
    log.info("simulated %d vectors, %d events", len(traces), sum(len(t) for t in traces))


def _read_traces(art: Artifacts):
    with open(art.need("traces", "traces.bin"), "rb") as fh:
        return logicsim.read_traces(fh)


def phase_power(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    nl = _load_design(art)
    proto = protocol_for(cfg)
    traces = _read_traces(art)
    fs = _frame_spec(cfg, proto)
    pm = power.estimate_power_matrix(nl, traces, fs, jobs)
    for stale in ("power.csv", "power.bin"):
        art.path("power", stale).unlink(missing_ok=True)
    if fmt == "bin":
        power.save_power_bin(pm, art.path("power", "power.bin", create=True))
    else:
        power.save_power_csv(pm, art.path("power", "power.csv", create=True))
    np.save(art.path("power", "cell_frame_power.npy"), power.mean_cell_frame_power(nl, traces, fs, jobs))
    log.info("power matrix %d x %d", *pm.values.shape)


def phase_aca(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    nl = _load_design(art)
    proto = protocol_for(cfg)
    metas = leakmodels.load_metadata(art.need("stimuli", "vectors.jsonl"))
    pm = _load_power(art)
    fs = pm.frame_spec
    model = _model(cfg, proto, metas)
    thr = _threshold(cfg, len(metas))
    lti = aca.detect_lti(pm, model, thr)
    art.write_json(lti.to_dict(), "aca", "lti.json")
    traces = _read_traces(art)
    frame_power = np.load(art.need("power", "cell_frame_power.npy"))
    cell_power = power.summarize_cell_power(nl, frame_power, lti.flagged_frames if lti.num_flagged else None)
    corr = aca.correlate_traces(traces, fs, lti, aca.ModelToggleVector.from_leakage(model), nl.compiled.n_nets)
    ranking = aca.lif_rank(corr, cell_power, thr, nl)
    report = aca.ranking_report(ranking, lti, nl, cfg.to_dict(), cfg.report.top)
    art.path("aca", "ranking.json").write_text(aca.dump_report(report) + "\n")
    art.path("aca", "ranking.csv").write_text(ranking.to_csv())
    art.write_json({"per_site": ranking.per_origin_rollup, "per_file": aca.backannotate(ranking, nl)},
                   "aca", "origins.json")
    log.info("LTI %d frames, %d flagged cells of %d", lti.num_flagged, len(ranking.flagged_cells), len(nl.cells))


def phase_verify(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    if not cfg.verify.enabled:
        log.info("verification disabled")
        return
    nl = _load_design(art)
    metas = leakmodels.load_metadata(art.need("stimuli", "vectors.jsonl"))
    pm = _load_power(art)
    ranking = json.loads(art.need("aca", "ranking.json").read_text())
    flagged = ranking["flagged_cells"]
    v = cfg.verify
    orig = verify.cpa_attack(pm, metas, v.byte_index, v.step)
    out = {"n_traces": len(metas), "byte_index": v.byte_index, "best_guess": orig.best_guess,
           "correct_key": orig.correct_key, "mtd": orig.mtd, "flagged_cells": len(flagged)}
    art.path("verify", "convergence.csv", create=True).write_text(orig.convergence_csv())
    if flagged:
        traces = _read_traces(art)
        rng = leakmodels.ByteStream(cfg.seed)
        all_ids = [c.instance_id for c in nl.cells]
        sets = [flagged] + [[all_ids[i] for i in sorted(rng.permutation(len(all_ids))[:len(flagged)])]
                            for _ in range(v.random_sets)]
        sub = power.subset_power_matrix(nl, traces, pm.frame_spec, sets, jobs)
        res = [verify.subtract_and_reattack(pm, sub[i], metas, v.byte_index, v.step, orig) for i in range(len(sets))]
        cap = len(metas)
        out["flagged_mtd"] = res[0].modified.mtd
        out["mtd_ratio"] = _finite(res[0].mtd_ratio)
        out["random_mtd"] = [r.modified.mtd for r in res[1:]]
        out["beats_random"] = sum(res[0].modified.mtd_or(cap) > r.modified.mtd_or(cap) for r in res[1:])
        out["clamped"] = res[0].clamped
    art.write_json(out, "verify", "cpa.json")
    log.info("CPA best guess %02x, mtd %s", orig.best_guess, orig.mtd)


def _finite(x: float):
    if x != x:
        return None
    return "inf" if x == float("inf") else x


def phase_report(cfg: CampaignConfig, art: Artifacts, jobs: int, fmt: str) -> None:
    timing = art.read_json("timing.json")
    design = art.read_json("design", "design.json")
    rep = {"design": design, "timing_s": timing}
    if art.path("aca", "ranking.json").exists():
        r = art.read_json("aca", "ranking.json")
        rep["aca"] = {"lti_frames": len(r["lti"]["frames"]), "flagged_cells": len(r["flagged_cells"]),
                      "flagged_fraction": len(r["flagged_cells"]) / max(design["cells"], 1),
                      "top_cells": list(dict.fromkeys(e["cell"] for e in r["entries"]))[:10],
                      "backannotation": r["backannotation"]}
    if art.path("verify", "cpa.json").exists():
        rep["verify"] = art.read_json("verify", "cpa.json")
    art.write_json(rep, "report.json")
    print(format_timing(timing))


def format_timing(timing: dict) -> str:
    rows = [(PHASE_LABEL.get(p, p), timing[p]) for p in PHASES if p in timing]
    total = sum(t for _, t in rows)
    width = max([len(r[0]) for r in rows] + [5])
    lines = [f"{'phase':<{width}}  seconds", f"{'-' * width}  -------"]
    lines += [f"{name:<{width}}  {t:7.2f}" for name, t in rows]
    lines.append(f"{'total':<{width}}  {total:7.2f}")
    return "\n".join(lines)


COMMANDS = {
    "gen-design": phase_gen_design,
    "simulate": phase_simulate,
    "power": phase_power,
    "aca": phase_aca,
    "verify": phase_verify,
    "report": phase_report,
}


def run_phase(name: str, cfg: CampaignConfig, art: Artifacts, jobs: int = 1, fmt: str = "csv") -> None:
    t0 = time.perf_counter()
    try:
        COMMANDS[name](cfg, art, jobs, fmt)
    except PhaseError:
        raise
    except (ConfigError, MissingArtifact) as e:
        raise PhaseError(name, str(e), 2) from e
    except (NetlistError, logicsim.SimulationError) as e:
        raise PhaseError(name, str(e), 1) from e
    except (ValueError, KeyError, OSError) as e:
        raise PhaseError(name, f"{type(e).__name__}: {e}", 1) from e
    if name != "report":
        art.record_time(name, time.perf_counter() - t0)


def run_pipeline(cfg: CampaignConfig, out: str | Path, jobs: int = 1, fmt: str = "csv") -> Artifacts:
    art = Artifacts(Path(out))
    for name in PHASES + ("report",):
        run_phase(name, cfg, art, jobs, fmt)
    return art


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="campaign YAML file")
    common.add_argument("--out", default="run", help="artifact directory (default: run)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel per-vector workers")
    common.add_argument("--format", choices=("csv", "bin"), default="csv", help="power matrix format")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="gateleak", description="Gate-level side-channel leakage campaigns.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["pipeline"]:
        sub.add_parser(name, parents=[common])
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be non-negative")
            cfg.seed = args.seed
        if args.jobs < 1:
            raise ConfigError("--jobs", "must be >= 1")
        protocol_for(cfg)
    except ConfigError as e:
        print(f"gateleak: config error: {e}", file=sys.stderr)
        return 2
    try:
        if args.command == "pipeline":
            run_pipeline(cfg, args.out, args.jobs, args.format)
        else:
            run_phase(args.command, cfg, Artifacts(Path(args.out)), args.jobs, args.format)
    except PhaseError as e:
        print(f"gateleak: {e}", file=sys.stderr)
        return e.code
    return 0


if __name__ == "__main__":
    sys.exit(main())
