"""Frame-partitioned power estimation from event traces.

Per cell, the energy of a frame is the switching energy of its output
toggles (``switching_energy * net load``), the internal energy of its input
pin toggles, and its state-dependent static leakage integrated over the time
each input state was held. Frame power is that energy divided by the frame
width. Units: time ps, energy fJ, static power nW, frame power uW.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .logicsim import EventTrace
from .netlist import Netlist

FJ_PER_PS_TO_UW = 1000.0
NW_PS_TO_FJ = 1e-6


@dataclass(frozen=True)
class FrameSpec:
    """Half-open frames ``[t_start + k*w, t_start + (k+1)*w)`` tiling ``[t_start, t_end)``."""

    frame_width: int
    t_start: int
    t_end: int

    def __post_init__(self):
        if self.frame_width <= 0:
            raise ValueError("frame_width must be > 0")
        if self.t_end <= self.t_start:
            raise ValueError("empty frame window")
        if (self.t_end - self.t_start) % self.frame_width:
            raise ValueError("frame_width does not tile the window")

    @classmethod
    def from_cycles(cls, clock_period: int, frames_per_cycle: int | Fraction,
                    start_cycle: int, end_cycle: int) -> "FrameSpec":
        width = Fraction(clock_period) / Fraction(frames_per_cycle)
        if width.denominator != 1:
            raise ValueError(f"{frames_per_cycle} frames per cycle do not divide the {clock_period} ps period")
        return cls(int(width), start_cycle * clock_period, end_cycle * clock_period)

    @property
    def num_frames(self) -> int:
        return (self.t_end - self.t_start) // self.frame_width

    @property
    def frame_starts(self) -> np.ndarray:
        return self.t_start + self.frame_width * np.arange(self.num_frames, dtype=np.int64)

    def frame_of(self, t: int) -> int:
        return (t - self.t_start) // self.frame_width

    def coarsen(self, ratio: int) -> "FrameSpec":
        return FrameSpec(self.frame_width * ratio, self.t_start, self.t_end)


@dataclass(eq=False)
class PowerMatrix:
    values: np.ndarray  # (vectors, frames), uW
    frame_spec: FrameSpec
    vector_ids: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.vector_ids = np.asarray(self.vector_ids, dtype=np.int64)
        if self.values.shape != (len(self.vector_ids), self.frame_spec.num_frames):
            raise ValueError(f"power matrix shape {self.values.shape} does not match "
                             f"{len(self.vector_ids)} vectors x {self.frame_spec.num_frames} frames")

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values: np.ndarray) -> "PowerMatrix":
        return PowerMatrix(values, self.frame_spec, self.vector_ids.copy())


@dataclass
class CellPowerSummary:
    cell_ids: list[str]
    cell_power: np.ndarray  # uW per cell
    total: float

    def of(self, cell_id: str) -> float:
        return float(self.cell_power[self.cell_ids.index(cell_id)])

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.cell_ids, self.cell_power.tolist()))


@njit(cache=True, nogil=True)
def _group_energy(cell_nin, cell_in, cell_internal, cell_switching, cell_leak,
                  fan_ptr, fan_cell, fan_pin, driver, net_load,
                  init_val, times, nets, group, energy, t0, width):
    """Add energy (fJ) per (group, frame) into ``energy``; cells with group < 0 are ignored."""
    n_groups, n_frames = energy.shape
    t1 = t0 + width * n_frames
    n_cells = cell_nin.shape[0]
    state = np.zeros(n_cells, np.int64)
    for c in range(n_cells):
        s = 0
        for p in range(cell_nin[c]):
            s |= np.int64(init_val[cell_in[c, p]]) << p
        state[c] = s
    # replay events before the window to get the state at t0
    k = 0
    n_ev = times.shape[0]
    while k < n_ev and times[k] < t0:
        n = nets[k]
        for j in range(fan_ptr[n], fan_ptr[n + 1]):
            state[fan_cell[j]] ^= np.int64(1) << fan_pin[j]
        k += 1
    static = np.zeros(n_groups)
    last = np.full(n_groups, t0, np.int64)
    for c in range(n_cells):
        g = group[c]
        if g >= 0:
            static[g] += cell_leak[c, state[c]]

    while k < n_ev and times[k] < t1:
        t = times[k]
        n = nets[k]
        f = (t - t0) // width
        d = driver[n]
        if d >= 0 and group[d] >= 0:
            energy[group[d], f] += cell_switching[d] * net_load[n]
        for j in range(fan_ptr[n], fan_ptr[n + 1]):
            c = fan_cell[j]
            g = group[c]
            old = state[c]
            state[c] = old ^ (np.int64(1) << fan_pin[j])
            if g < 0:
                continue
            energy[g, f] += cell_internal[c]
            delta = cell_leak[c, state[c]] - cell_leak[c, old]
            if delta != 0.0:
                _flush(energy, g, static[g], last[g], t, t0, width)
                last[g] = t
                static[g] += delta
        k += 1
    for g in range(n_groups):
        _flush(energy, g, static[g], last[g], t1, t0, width)


@njit(cache=True, nogil=True)
def _flush(energy, g, p_nw, a, b, t0, width):
    if b <= a or p_nw == 0.0:
        return
    f = (a - t0) // width
    while a < b:
        edge = t0 + (f + 1) * width
        stop = edge if edge < b else b
        energy[g, f] += p_nw * (stop - a) * NW_PS_TO_FJ
        a = stop
        f += 1


def _check_window(trace: EventTrace, fs: FrameSpec):
    if fs.t_start < trace.window[0] or fs.t_end > trace.window[1]:
        raise ValueError(f"frame window [{fs.t_start}, {fs.t_end}) is not covered by trace "
                         f"{trace.vector_id} window {trace.window}")


def _energy(netlist: Netlist, trace: EventTrace, fs: FrameSpec, group: np.ndarray, n_groups: int,
            out: np.ndarray | None = None) -> np.ndarray:
    _check_window(trace, fs)
    cn = netlist.compiled
    energy = np.zeros((n_groups, fs.num_frames)) if out is None else out
    _group_energy(cn.cell_nin, cn.cell_in, cn.cell_internal, cn.cell_switching, cn.cell_leak,
                  cn.fan_ptr, cn.fan_cell, cn.fan_pin, cn.driver, cn.net_load,
                  trace.initial_values, trace.times, trace.nets, group, energy,
                  fs.t_start, fs.frame_width)
    return energy


def group_power(netlist: Netlist, trace: EventTrace, frame_spec: FrameSpec, group: np.ndarray,
                n_groups: int) -> np.ndarray:
    """Per-group frame power (uW) for an arbitrary cell-to-group assignment (-1 = skip)."""
    group = np.asarray(group, dtype=np.int32)
    if group.shape != (len(netlist.cells),):
        raise ValueError("group assignment must cover every cell")
    return _energy(netlist, trace, frame_spec, group, n_groups) * (FJ_PER_PS_TO_UW / frame_spec.frame_width)


def estimate_power(netlist: Netlist, trace: EventTrace, frame_spec: FrameSpec) -> np.ndarray:
    group = np.zeros(len(netlist.cells), np.int32)
    return group_power(netlist, trace, frame_spec, group, 1)[0]


def _cell_indices(netlist: Netlist, cell_ids: Iterable[str]) -> np.ndarray:
    pos = {c.instance_id: i for i, c in enumerate(netlist.cells)}
    out = []
    for cid in cell_ids:
        if cid not in pos:
            raise KeyError(f"unknown cell id {cid!r}")
        out.append(pos[cid])
    return np.array(out, np.int64)


def per_cell_power_trace(netlist: Netlist, trace: EventTrace, frame_spec: FrameSpec,
                         cell_ids: Sequence[str] | None = None) -> np.ndarray:
    """Rows of frame power (uW), one per requested cell (all cells when ``cell_ids`` is None)."""
    n = len(netlist.cells)
    idx = np.arange(n) if cell_ids is None else _cell_indices(netlist, cell_ids)
    group = np.full(n, -1, np.int32)
    group[idx] = np.arange(len(idx), dtype=np.int32)
    if len(set(idx.tolist())) != len(idx):
        # duplicated ids: compute distinct cells then expand
        uniq, inv = np.unique(idx, return_inverse=True)
        group[:] = -1
        group[uniq] = np.arange(len(uniq), dtype=np.int32)
        return group_power(netlist, trace, frame_spec, group, len(uniq))[inv]
    return group_power(netlist, trace, frame_spec, group, len(idx))


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def estimate_power_matrix(netlist: Netlist, traces: Sequence[EventTrace], frame_spec: FrameSpec,
                          jobs: int = 1) -> PowerMatrix:
    _ = netlist.compiled
    rows = _map(lambda tr: estimate_power(netlist, tr, frame_spec), traces, jobs)
    return PowerMatrix(np.array(rows).reshape(len(traces), frame_spec.num_frames), frame_spec,
                       [tr.vector_id for tr in traces])


def subset_power_matrix(netlist: Netlist, traces: Sequence[EventTrace], frame_spec: FrameSpec,
                        cell_sets: Sequence[Sequence[str]], jobs: int = 1) -> np.ndarray:
    """Summed frame power of several cell sets: array (sets, vectors, frames).

    A cell may belong to several sets; each set is evaluated with its own
    group assignment pass only when sets overlap.
    """
    _ = netlist.compiled
    n = len(netlist.cells)
    idx_sets = [_cell_indices(netlist, s) for s in cell_sets]
    # pack disjoint sets into shared passes
    passes: list[tuple[np.ndarray, list[int]]] = []
    for si, idx in enumerate(idx_sets):
        for group, members in passes:
            if np.all(group[idx] < 0):
                group[idx] = len(members)
                members.append(si)
                break
        else:
            group = np.full(n, -1, np.int32)
            group[idx] = 0
            passes.append((group, [si]))
    out = np.zeros((len(cell_sets), len(traces), frame_spec.num_frames))
    for group, members in passes:
        rows = _map(lambda tr: group_power(netlist, tr, frame_spec, group, len(members)), traces, jobs)
        for v, r in enumerate(rows):
            out[members, v] = r
    return out


def mean_cell_frame_power(netlist: Netlist, traces: Sequence[EventTrace], frame_spec: FrameSpec,
                          jobs: int = 1) -> np.ndarray:
    """Per-cell frame power (uW) averaged over vectors: array (cells, frames)."""
    if not traces:
        raise ValueError("no traces")
    n = len(netlist.cells)
    group = np.arange(n, dtype=np.int32)
    _ = netlist.compiled
    jobs = max(1, min(jobs, len(traces)))
    chunks = [traces[i::jobs] for i in range(jobs)]

    def one(chunk):
        acc = np.zeros((n, frame_spec.num_frames))
        for tr in chunk:
            _energy(netlist, tr, frame_spec, group, n, acc)
        return acc

    total = np.zeros((n, frame_spec.num_frames))
    for acc in _map(one, chunks, jobs):
        total += acc
    return total * (FJ_PER_PS_TO_UW / frame_spec.frame_width) / len(traces)


def _frame_selection(n_frames: int, frames: Sequence[int] | None) -> np.ndarray:
    sel = np.arange(n_frames) if frames is None else np.asarray(sorted(set(int(f) for f in frames)), np.int64)
    if sel.size == 0:
        raise ValueError("empty frame set")
    if sel.min() < 0 or sel.max() >= n_frames:
        raise ValueError("frame index out of range")
    return sel


def summarize_cell_power(netlist: Netlist, frame_power: np.ndarray,
                         frames: Sequence[int] | None = None) -> CellPowerSummary:
    """Collapse a (cells, frames) mean power array to per-cell power over the selected frames."""
    sel = _frame_selection(frame_power.shape[1], frames)
    cell_power = frame_power[:, sel].mean(axis=1)
    return CellPowerSummary([c.instance_id for c in netlist.cells], cell_power, float(cell_power.sum()))


def average_cell_power(netlist: Netlist, traces: Sequence[EventTrace], frame_spec: FrameSpec,
                       frames: Sequence[int] | None = None, jobs: int = 1) -> CellPowerSummary:
    """Mean per-cell power over all vectors and the selected frames."""
    _frame_selection(frame_spec.num_frames, frames)
    return summarize_cell_power(netlist, mean_cell_frame_power(netlist, traces, frame_spec, jobs), frames)


# ---------------------------------------------------------------------------
# PowerMatrix persistence

POWER_MAGIC = b"GLPOWER1"


def save_power_csv(pm: PowerMatrix, path) -> None:
    fs = pm.frame_spec
    with open(path, "w") as fh:
        fh.write(f"# units: uW; frame_width_ps={fs.frame_width}; t_start_ps={fs.t_start}; t_end_ps={fs.t_end}\n")
        fh.write("vector_id," + ",".join(str(t) for t in fs.frame_starts.tolist()) + "\n")
        for vid, row in zip(pm.vector_ids.tolist(), pm.values):
            fh.write(str(vid) + "," + ",".join(repr(float(x)) for x in row) + "\n")


def load_power_csv(path) -> PowerMatrix:
    with open(path) as fh:
        meta = fh.readline().lstrip("# ").strip()
        kv = dict(p.strip().split("=") for p in meta.split(";")[1:])
        fh.readline()
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    fs = FrameSpec(int(kv["frame_width_ps"]), int(kv["t_start_ps"]), int(kv["t_end_ps"]))
    if data.size == 0:
        data = np.zeros((0, fs.num_frames + 1))
    return PowerMatrix(data[:, 1:], fs, data[:, 0].astype(np.int64))


def save_power_bin(pm: PowerMatrix, path) -> None:
    """Binary layout: magic | rows u64 | cols u64 | frame_width u64 | t_start u64 | t_end u64
    | vector ids i64[rows] | values f64[rows * cols] row-major; all little-endian."""
    fs = pm.frame_spec
    rows, cols = pm.values.shape
    with open(path, "wb") as fh:
        fh.write(POWER_MAGIC + struct.pack("<QQQQQ", rows, cols, fs.frame_width, fs.t_start, fs.t_end))
        fh.write(pm.vector_ids.astype("<i8").tobytes())
        fh.write(np.ascontiguousarray(pm.values, dtype="<f8").tobytes())


def load_power_bin(path) -> PowerMatrix:
    with open(path, "rb") as fh:
        if fh.read(len(POWER_MAGIC)) != POWER_MAGIC:
            raise ValueError("not a gateleak power matrix file")
        rows, cols, w, t0, t1 = struct.unpack("<QQQQQ", fh.read(40))
        ids = np.frombuffer(fh.read(8 * rows), "<i8")
        vals = np.frombuffer(fh.read(8 * rows * cols), "<f8").reshape(rows, cols)
    return PowerMatrix(vals.astype(np.float64), FrameSpec(w, t0, t1), ids.astype(np.int64))
