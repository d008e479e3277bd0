"""Event-driven gate-level simulation of test-vector campaigns.

Each test vector is simulated from a fresh design state: all registers start
at the ``x_pessimism`` value, combinational logic is settled silently, then
the global reset is held for ``reset_cycles`` cycles. The clock is an ideal
square wave rising at ``cycle * clock_period``; primary inputs take their
assigned values at the rising edge of the assigned cycle.
"""

from __future__ import annotations

import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from . import _simkernel
from .netlist import Netlist


class SimulationError(RuntimeError):
    def __init__(self, message: str, vector_id: int | None = None):
        self.vector_id = vector_id
        super().__init__(message if vector_id is None else f"vector {vector_id}: {message}")


@dataclass
class Stimulus:
    vector_id: int
    waveform: dict[str, list[tuple[int, int]]]
    num_cycles: int
    metadata: Any = None

    def __post_init__(self):
        if self.num_cycles < 1:
            raise ValueError("num_cycles must be >= 1")
        for net, assigns in self.waveform.items():
            cycles = [c for c, _ in assigns]
            if cycles != sorted(cycles):
                raise ValueError(f"assignments for {net} are not sorted by cycle")
            if any(v not in (0, 1) for _, v in assigns):
                raise ValueError(f"assignments for {net} must be 0 or 1")


@dataclass(frozen=True)
class SimConfig:
    clock_period: int = 10240
    reset_cycles: int = 1
    x_pessimism: str = "zero"
    window_cycles: tuple[int, int] | None = None

    def __post_init__(self):
        if self.clock_period <= 0:
            raise ValueError("clock_period must be > 0")
        if self.reset_cycles < 0:
            raise ValueError("reset_cycles must be >= 0")
        if self.x_pessimism not in ("zero", "x"):
            raise ValueError("x_pessimism must be 'zero' or 'x'")
        if self.window_cycles is not None and not 0 <= self.window_cycles[0] < self.window_cycles[1]:
            raise ValueError("window_cycles must be an increasing (start, end) pair")


@dataclass(eq=False)
class EventTrace:
    """Net transitions of one simulated vector inside ``window``.

    ``initial_values`` holds every net's value at ``window[0]``, before the
    events stamped at that time are applied.
    """

    vector_id: int
    times: np.ndarray
    nets: np.ndarray
    values: np.ndarray
    window: tuple[int, int]
    clock_period: int
    initial_values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.times)

    @property
    def events(self) -> list[tuple[int, int, int]]:
        return list(zip(self.times.tolist(), self.nets.tolist(), self.values.tolist()))

    def values_at(self, t: int) -> np.ndarray:
        """Net values at time ``t`` (after all events stamped <= t)."""
        vals = self.initial_values.copy()
        k = np.searchsorted(self.times, t, side="right")
        # later events win, so apply in order
        vals[self.nets[:k]] = self.values[:k]
        return vals

    def same_as(self, other: "EventTrace") -> bool:
        return (self.window == other.window and self.clock_period == other.clock_period
                and np.array_equal(self.times, other.times) and np.array_equal(self.nets, other.nets)
                and np.array_equal(self.values, other.values)
                and np.array_equal(self.initial_values, other.initial_values))


def _external_events(netlist: Netlist, stimulus: Stimulus, config: SimConfig):
    idx = netlist.net_index
    period = config.clock_period
    t_end = stimulus.num_cycles * period
    clock, reset = netlist.clock_net, netlist.reset_net
    specials = {clock, reset} - {None}
    pis = set(netlist.primary_inputs)
    for net in stimulus.waveform:
        if net not in pis or net in specials:
            raise SimulationError(f"stimulus references unknown input {net!r}", stimulus.vector_id)
    missing = [n for n in netlist.primary_inputs if n not in specials and n not in stimulus.waveform]
    if missing:
        raise SimulationError(f"stimulus does not drive inputs {missing[:5]}", stimulus.vector_id)

    init = {}
    ts, ns, vs = [], [], []
    if clock is not None:
        c = idx[clock]
        init[c] = 0
        for cyc in range(stimulus.num_cycles):
            ts += [cyc * period, cyc * period + period // 2]
            ns += [c, c]
            vs += [1, 0]
    if reset is not None:
        r = idx[reset]
        init[r] = 1 if config.reset_cycles > 0 else 0
        if 0 < config.reset_cycles * period < t_end:
            ts.append(config.reset_cycles * period)
            ns.append(r)
            vs.append(0)
    for net, assigns in stimulus.waveform.items():
        i = idx[net]
        init[i] = 0
        cur = 0
        for cyc, v in assigns:
            if v != cur:
                ts.append(cyc * period)
                ns.append(i)
                vs.append(v)
                cur = v
    t = np.array(ts, np.int64)
    n = np.array(ns, np.int32)
    v = np.array(vs, np.uint8)
    order = np.lexsort((n, t))
    return init, t[order], n[order], v[order]


def simulate_vector(netlist: Netlist, stimulus: Stimulus, config: SimConfig) -> EventTrace:
    """Simulate one test vector from reset and return its event trace."""
    if config.x_pessimism == "x" and netlist.reset_net is not None and config.reset_cycles == 0:
        raise SimulationError("unresolved X after reset window: register state is unknown without reset",
                              stimulus.vector_id)
    if config.x_pessimism == "x" and netlist.reset_net is None and any(c.is_sequential for c in netlist.cells):
        raise SimulationError("unresolved X after reset window: design has no reset net", stimulus.vector_id)
    cn = netlist.compiled
    init, ext_t, ext_n, ext_v = _external_events(netlist, stimulus, config)
    val = np.zeros(cn.n_nets, np.uint8)
    for i, v in init.items():
        val[i] = v
    _simkernel.settle(cn.cell_class, cn.cell_out, cn.cell_nin, cn.cell_in, cn.cell_tt, cn.topo, val)
    t_end = stimulus.num_cycles * config.clock_period
    if config.window_cycles is None:
        window = (0, t_end)
    else:
        window = (config.window_cycles[0] * config.clock_period,
                  min(config.window_cycles[1] * config.clock_period, t_end))
        if window[0] >= window[1]:
            raise SimulationError("recording window lies beyond the simulated cycles", stimulus.vector_id)
    times, nets, values, snap = _simkernel.simulate(
        cn.cell_class, cn.cell_out, cn.cell_nin, cn.cell_in, cn.cell_delay, cn.cell_tt,
        cn.fan_ptr, cn.fan_cell, cn.clock, cn.reset, val,
        ext_t, ext_n, ext_v, t_end, window[0], window[1])
    return EventTrace(stimulus.vector_id, times, nets, values, window, config.clock_period, snap)


def run_campaign(netlist: Netlist, stimuli: Sequence[Stimulus], config: SimConfig,
                 jobs: int = 1) -> list[EventTrace]:
    """Simulate every stimulus independently; the result order follows ``stimuli``."""
    if not stimuli:
        raise SimulationError("empty stimulus list")
    _ = netlist.compiled  # build once before fanning out

    def one(s):
        try:
            return simulate_vector(netlist, s, config)
        except SimulationError as exc:
            if exc.vector_id is None:
                raise SimulationError(str(exc), s.vector_id) from exc
            raise

    if jobs <= 1:
        return [one(s) for s in stimuli]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, stimuli))


def event_density(trace: EventTrace, bin_width: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram of event counts over the trace window; returns (bin_starts, counts)."""
    if bin_width <= 0:
        raise ValueError("bin_width must be > 0")
    t0, t1 = trace.window
    nbins = max(1, -(-(t1 - t0) // bin_width))
    counts = np.bincount((trace.times - t0) // bin_width, minlength=nbins)
    return t0 + bin_width * np.arange(nbins), counts


# ---------------------------------------------------------------------------
# VCD export

def _vcd_id(i: int) -> str:
    chars = []
    i += 1
    while i > 0:
        i, r = divmod(i - 1, 94)
        chars.append(chr(33 + r))
    return "".join(chars)


def export_vcd(trace: EventTrace, netlist: Netlist, module: str = "top") -> str:
    """Render a trace as a VCD document (timescale 1ps, one scalar wire per net)."""
    names = netlist.net_names
    ids = [_vcd_id(i) for i in range(len(names))]
    out = io.StringIO()
    out.write("$comment gateleak event trace, vector %d $end\n" % trace.vector_id)
    out.write("$timescale 1ps $end\n")
    out.write(f"$scope module {module} $end\n")
    for i, n in enumerate(names):
        out.write(f"$var wire 1 {ids[i]} {n} $end\n")
    out.write("$upscope $end\n$enddefinitions $end\n")
    out.write(f"#{trace.window[0]}\n$dumpvars\n")
    for i, v in enumerate(trace.initial_values.tolist()):
        out.write(f"{v}{ids[i]}\n")
    out.write("$end\n")
    last = None
    for t, n, v in zip(trace.times.tolist(), trace.nets.tolist(), trace.values.tolist()):
        if t != last:
            out.write(f"#{t}\n")
            last = t
        out.write(f"{v}{ids[n]}\n")
    out.write(f"#{trace.window[1]}\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Binary trace cache
#
# header:  magic b"GLTRACE" | version u8 | n_nets u32 | n_vectors u32
# block:   vector_id u32 | n_events u64 | t_start u64 | t_end u64 | clock_period u64
#          initial values, bit-packed (ceil(n_nets / 8) bytes)
#          net ids u32[n] | times u64[n] | values bit-packed (ceil(n / 8) bytes)
# All integers little-endian; bits are packed LSB first.

TRACE_MAGIC = b"GLTRACE"
TRACE_VERSION = 1


def write_traces(fh, traces: Iterable[EventTrace], n_nets: int) -> None:
    traces = list(traces)
    fh.write(TRACE_MAGIC + struct.pack("<BII", TRACE_VERSION, n_nets, len(traces)))
    for tr in traces:
        n = len(tr)
        fh.write(struct.pack("<IQQQQ", tr.vector_id, n, tr.window[0], tr.window[1], tr.clock_period))
        fh.write(np.packbits(tr.initial_values.astype(np.uint8), bitorder="little").tobytes())
        fh.write(tr.nets.astype("<u4").tobytes())
        fh.write(tr.times.astype("<u8").tobytes())
        fh.write(np.packbits(tr.values.astype(np.uint8), bitorder="little").tobytes())


def read_traces(fh) -> list[EventTrace]:
    head = fh.read(len(TRACE_MAGIC) + 9)
    if head[: len(TRACE_MAGIC)] != TRACE_MAGIC:
        raise ValueError("not a gateleak trace file")
    version, n_nets, n_vec = struct.unpack("<BII", head[len(TRACE_MAGIC):])
    if version != TRACE_VERSION:
        raise ValueError(f"unsupported trace file version {version}")
    out = []
    nb_init = (n_nets + 7) // 8
    for _ in range(n_vec):
        vid, n, t0, t1, period = struct.unpack("<IQQQQ", fh.read(36))
        init = np.unpackbits(np.frombuffer(fh.read(nb_init), np.uint8), bitorder="little")[:n_nets]
        nets = np.frombuffer(fh.read(4 * n), "<u4").astype(np.int32)
        times = np.frombuffer(fh.read(8 * n), "<u8").astype(np.int64)
        vals = np.unpackbits(np.frombuffer(fh.read((n + 7) // 8), np.uint8), bitorder="little")[:n]
        out.append(EventTrace(vid, times, nets, vals.astype(np.uint8), (t0, t1), period, init.astype(np.uint8)))
    return out
