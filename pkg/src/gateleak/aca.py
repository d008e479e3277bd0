"""Leakage time intervals and per-cell leakage impact factors.

A frame belongs to the leakage time interval (LTI) when the correlation
between the leakage model and the frame power exceeds a threshold. Inside
the LTI, each net gets a toggle indicator K in {-1, +1} per vector and frame,
and its architecture correlation is C = sum_j K_j * H_j with H the centered
model (specific test) or the group labels (non-specific test). The impact
factor F = C * P_i / P_T scales C by the driving cell's share of the power.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .leakmodels import LeakageVector
from .logicsim import EventTrace
from .netlist import Netlist
from .power import CellPowerSummary, FrameSpec, PowerMatrix


def _pearson_from_sums(n, sx, sy, sxx, syy, sxy):
    """Pearson correlation from raw moment sums; NaN where either variance is zero."""
    n = np.asarray(n, dtype=np.float64)
    cov = n * np.asarray(sxy, dtype=np.float64) - np.asarray(sx, dtype=np.float64) * sy
    vx = n * np.asarray(sxx, dtype=np.float64) - np.asarray(sx, dtype=np.float64) ** 2
    vy = n * np.asarray(syy, dtype=np.float64) - np.asarray(sy, dtype=np.float64) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        den = np.sqrt(np.maximum(vx, 0.0) * np.maximum(vy, 0.0))
        rho = np.where(den > 0, cov / np.where(den > 0, den, 1.0), np.nan)
    return np.clip(rho, -1.0, 1.0)


def pearson(x, y) -> float:
    """Pearson coefficient of two equal-length vectors; NaN if either is constant."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two 1-D vectors of equal length")
    if len(x) < 2:
        raise ValueError("pearson needs at least 2 samples")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    xc, yc = x - x.mean(), y - y.mean()
    return float(np.clip(xc @ yc / math.sqrt((xc @ xc) * (yc @ yc)), -1.0, 1.0))


def pearson_columns(model: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Pearson of ``model`` against every column of ``matrix``; NaN for constant columns."""
    model = np.asarray(model, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[0] != model.shape[0]:
        raise ValueError(f"model has {model.shape[0]} entries, matrix has {matrix.shape[0]} rows")
    if np.ptp(model) == 0:
        return np.full(matrix.shape[1], np.nan)
    mc = model - model.mean()
    pc = matrix - matrix.mean(axis=0)
    num = mc @ pc
    den = np.sqrt((mc @ mc) * np.einsum("ij,ij->j", pc, pc))
    const = np.ptp(matrix, axis=0) == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(const | (den == 0), np.nan, num / np.where(den == 0, 1.0, den))
    return np.clip(rho, -1.0, 1.0)


def threshold_from_confidence(m: int, confidence: float) -> float:
    """Two-sided normal bound z_{(1+c)/2} / sqrt(m) on |rho| under no correlation."""
    if m < 30:
        raise ValueError(f"need at least 30 vectors for the normal approximation, got {m}")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    return NormalDist().inv_cdf((1.0 + confidence) / 2.0) / math.sqrt(m)


# ---------------------------------------------------------------------------
# Leakage time interval

@dataclass
class LtiResult:
    flagged_frames: np.ndarray
    rho_per_frame: np.ndarray  # NaN marks undefined frames
    threshold: float
    test_kind: str = "specific"

    @property
    def num_flagged(self) -> int:
        return int(len(self.flagged_frames))

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "test_kind": self.test_kind,
                "frames": [int(f) for f in self.flagged_frames],
                "rho": [None if math.isnan(r) else float(r) for r in self.rho_per_frame]}


def detect_lti(power: PowerMatrix, model: LeakageVector, threshold: float) -> LtiResult:
    if len(model) != power.values.shape[0]:
        raise ValueError(f"model has {len(model)} values, power matrix has {power.values.shape[0]} vectors")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    rho = pearson_columns(model.values, power.values)
    with np.errstate(invalid="ignore"):
        flagged = np.flatnonzero(np.abs(rho) > threshold)
    return LtiResult(flagged, rho, float(threshold), model.kind)


# ---------------------------------------------------------------------------
# Toggle matrix and architecture correlation

@dataclass
class ModelToggleVector:
    """Model toggle trace H. ``raw`` keeps the uncentered values for exact arithmetic."""

    raw: np.ndarray
    kind: str = "specific"

    @classmethod
    def from_leakage(cls, lv: LeakageVector) -> "ModelToggleVector":
        return cls(np.asarray(lv.values, dtype=np.float64), lv.kind)

    @property
    def H(self) -> np.ndarray:
        if self.kind == "specific":
            return self.raw - self.raw.mean()
        return self.raw

    def __len__(self):
        return len(self.raw)


@dataclass
class ToggleMatrix:
    """Sparse K: for each vector, the sorted keys ``net * J + lti_index`` where the net toggled."""

    keys: list[np.ndarray]
    n_nets: int
    lti_frames: np.ndarray

    @property
    def n_vectors(self) -> int:
        return len(self.keys)

    @property
    def J(self) -> int:
        return len(self.lti_frames)

    def dense(self) -> np.ndarray:
        """K as an int8 array (nets, vectors, LTI frames) with values in {-1, +1}."""
        K = -np.ones((self.n_nets * self.J, self.n_vectors), np.int8)
        for j, k in enumerate(self.keys):
            K[k, j] = 1
        return K.reshape(self.n_nets, self.J, self.n_vectors).transpose(0, 2, 1).copy()


def toggle_keys(trace: EventTrace, frame_spec: FrameSpec, lti_frames: np.ndarray) -> np.ndarray:
    fs = frame_spec
    if fs.t_start < trace.window[0] or fs.t_end > trace.window[1]:
        raise ValueError(f"trace {trace.vector_id} window does not cover the frames")
    J = len(lti_frames)
    lookup = np.full(fs.num_frames, -1, np.int64)
    lookup[np.asarray(lti_frames, dtype=np.int64)] = np.arange(J)
    sel = (trace.times >= fs.t_start) & (trace.times < fs.t_end)
    li = lookup[(trace.times[sel] - fs.t_start) // fs.frame_width]
    ok = li >= 0
    return np.unique(trace.nets[sel][ok].astype(np.int64) * J + li[ok])


def build_toggle_matrix(traces: Sequence[EventTrace], frame_spec: FrameSpec, lti: LtiResult,
                        n_nets: int | None = None) -> ToggleMatrix:
    if n_nets is None:
        n_nets = len(traces[0].initial_values) if traces else 0
    frames = np.asarray(lti.flagged_frames, dtype=np.int64)
    return ToggleMatrix([toggle_keys(tr, frame_spec, frames) for tr in traces], n_nets, frames)


@dataclass
class ArchitectureCorrelation:
    """Per (net, LTI frame) statistics: C, normalized rho, and toggle counts."""

    C: np.ndarray       # (nets, J)
    rho: np.ndarray     # (nets, J), NaN where K or H is constant
    count: np.ndarray   # (nets, J) number of vectors in which the net toggled
    lti_frames: np.ndarray
    n_vectors: int

    @property
    def active_nets(self) -> np.ndarray:
        """Nets whose toggle indicator varies across vectors in at least one LTI frame."""
        var = (self.count > 0) & (self.count < self.n_vectors)
        return np.flatnonzero(var.any(axis=1))


class CorrelationAccumulator:
    """Streams vectors into the sums needed for C and rho; merge-able across workers."""

    def __init__(self, n_nets: int, lti_frames: np.ndarray, model: ModelToggleVector):
        self.n_nets = n_nets
        self.lti_frames = np.asarray(lti_frames, dtype=np.int64)
        self.model = model
        size = n_nets * len(self.lti_frames)
        self.acc = np.zeros(size)
        self.count = np.zeros(size, np.int64)
        self._pending_keys: list[np.ndarray] = []
        self._pending_w: list[np.ndarray] = []
        self._pending_n = 0
        self.n_seen = 0

    def add(self, j: int, keys: np.ndarray) -> None:
        self._pending_keys.append(keys)
        self._pending_w.append(np.full(len(keys), self.model.raw[j]))
        self._pending_n += len(keys)
        self.n_seen += 1
        if self._pending_n > 4_000_000:
            self._flush()

    def _flush(self):
        if not self._pending_keys:
            return
        k = np.concatenate(self._pending_keys)
        w = np.concatenate(self._pending_w)
        size = self.acc.shape[0]
        self.acc += np.bincount(k, weights=w, minlength=size)
        self.count += np.bincount(k, minlength=size)
        self._pending_keys, self._pending_w, self._pending_n = [], [], 0

    def merge(self, other: "CorrelationAccumulator") -> None:
        self._flush()
        other._flush()
        self.acc += other.acc
        self.count += other.count
        self.n_seen += other.n_seen

    def result(self) -> ArchitectureCorrelation:
        self._flush()
        m = len(self.model)
        if self.n_seen != m:
            raise ValueError(f"accumulated {self.n_seen} vectors, model has {m}")
        raw = self.model.raw
        J = len(self.lti_frames)
        sum_l = raw.sum()
        sum_k = 2.0 * self.count - m          # sum_j K_ij
        sum_kl = 2.0 * self.acc - sum_l       # sum_j K_ij * L_j
        if self.model.kind == "specific":
            # C = sum_j K_ij (L_j - mean L), evaluated with a single rounding step
            C = (m * sum_kl - sum_l * sum_k) / m
        else:
            C = sum_kl
        rho = _pearson_from_sums(m, sum_k, sum_l, np.full_like(sum_k, m), (raw ** 2).sum(), sum_kl)
        return ArchitectureCorrelation(C.reshape(self.n_nets, J), rho.reshape(self.n_nets, J),
                                       self.count.reshape(self.n_nets, J), self.lti_frames, m)


def architecture_correlation(K: ToggleMatrix, H: ModelToggleVector) -> ArchitectureCorrelation:
    if K.n_vectors != len(H):
        raise ValueError(f"toggle matrix has {K.n_vectors} vectors, model has {len(H)}")
    acc = CorrelationAccumulator(K.n_nets, K.lti_frames, H)
    for j, keys in enumerate(K.keys):
        acc.add(j, keys)
    return acc.result()


def correlate_traces(traces: Sequence[EventTrace], frame_spec: FrameSpec, lti: LtiResult,
                     model: ModelToggleVector, n_nets: int) -> ArchitectureCorrelation:
    """build_toggle_matrix followed by architecture_correlation without keeping K."""
    frames = np.asarray(lti.flagged_frames, dtype=np.int64)
    acc = CorrelationAccumulator(n_nets, frames, model)
    for j, tr in enumerate(traces):
        acc.add(j, toggle_keys(tr, frame_spec, frames))
    return acc.result()


# ---------------------------------------------------------------------------
# Ranking

@dataclass
class LifRanking:
    """Ranked (cell, frame) entries, kept as parallel arrays sorted by |F| descending."""

    cell_ids: list[str]          # all design cells, index space for ``cell``
    cell: np.ndarray
    frame: np.ndarray
    C: np.ndarray
    F: np.ndarray
    rho: np.ndarray
    flagged_cells: list[str]
    flag_threshold: float
    per_origin_rollup: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cell)

    @property
    def entries(self) -> list[tuple[str, int, float, float]]:
        return [(self.cell_ids[c], int(n), float(ci), float(fi))
                for c, n, ci, fi in zip(self.cell, self.frame, self.C, self.F)]

    def entry_dicts(self, limit: int | None = None) -> list[dict]:
        k = len(self) if limit is None else min(limit, len(self))
        return [{"cell": self.cell_ids[self.cell[i]], "frame": int(self.frame[i]), "c": float(self.C[i]),
                 "f": float(self.F[i]), "rho": None if math.isnan(self.rho[i]) else float(self.rho[i])}
                for i in range(k)]

    def cell_order(self) -> list[str]:
        """Cells in order of their best-ranked entry."""
        seen, out = set(), []
        for c in self.cell.tolist():
            if c not in seen:
                seen.add(c)
                out.append(self.cell_ids[c])
        return out

    def cells_by_max_f(self) -> list[tuple[str, float]]:
        best: dict[int, float] = {}
        for c, f in zip(self.cell.tolist(), np.abs(self.F).tolist()):
            if c not in best:
                best[c] = f
        return [(self.cell_ids[c], f) for c, f in best.items()]

    def rank_of(self, cell_id: str) -> int | None:
        """1-based position of the cell's first entry, or None."""
        idx = self.cell_ids.index(cell_id)
        hits = np.flatnonzero(self.cell == idx)
        return int(hits[0]) + 1 if hits.size else None

    def cell_rank(self, cell_id: str) -> int | None:
        order = self.cell_order()
        return order.index(cell_id) + 1 if cell_id in order else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "cell", "frame", "c", "f", "rho"])
        for i in range(len(self)):
            r = self.rho[i]
            w.writerow([i + 1, self.cell_ids[self.cell[i]], int(self.frame[i]), repr(float(self.C[i])),
                        repr(float(self.F[i])), "" if math.isnan(r) else repr(float(r))])
        return buf.getvalue()


def lif_rank(corr: ArchitectureCorrelation, cell_power: CellPowerSummary, flag_threshold: float,
             netlist: Netlist) -> LifRanking:
    """F = C * P_i / P_T for every (active cell-driven net, LTI frame) pair."""
    cn = netlist.compiled
    cell_ids = [c.instance_id for c in netlist.cells]
    if list(cell_power.cell_ids) != cell_ids:
        pw = cell_power.as_dict()
        missing = [c for c in cell_ids if c not in pw]
        if missing:
            raise KeyError(f"no average power for cells {missing[:5]}")
        p = np.array([pw[c] for c in cell_ids])
    else:
        p = np.asarray(cell_power.cell_power, dtype=np.float64)
    total = float(p.sum()) if cell_power.total is None else float(cell_power.total)
    nets = corr.active_nets
    drv = cn.driver[nets]
    nets, drv = nets[drv >= 0], drv[drv >= 0]
    J = len(corr.lti_frames)
    cell = np.repeat(drv, J).astype(np.int64)
    frame = np.tile(corr.lti_frames, len(nets))
    C = corr.C[nets].reshape(-1)
    rho = corr.rho[nets].reshape(-1)
    share = p[cell] / total if total > 0 else np.zeros(len(cell))
    F = C * share
    name_rank = np.empty(len(cell_ids), np.int64)
    name_rank[np.argsort(np.array(cell_ids, dtype=object), kind="stable")] = np.arange(len(cell_ids))
    order = np.lexsort((frame, name_rank[cell], -np.abs(F)))
    cell, frame, C, F, rho = cell[order], frame[order], C[order], F[order], rho[order]
    with np.errstate(invalid="ignore"):
        hit = np.abs(rho) > flag_threshold
    flagged_idx = sorted(set(cell[hit].tolist()), key=lambda c: cell_ids[c])
    flagged = [cell_ids[c] for c in flagged_idx]
    rollup = Counter()
    for c in flagged_idx:
        o = netlist.cells[c].origin
        rollup[f"{o[0]}:{o[1]}" if o else "unattributed"] += 1
    return LifRanking(cell_ids, cell, frame, C, F, rho, flagged, float(flag_threshold),
                      dict(sorted(rollup.items())))


def backannotate(ranking: LifRanking, netlist: Netlist) -> list[dict]:
    """Flagged cells grouped by origin file: rows of (file, cells, sequential), descending."""
    by_id = netlist.cell_by_id
    cells = Counter()
    seq = Counter()
    sites: dict[str, set] = {}
    for cid in ranking.flagged_cells:
        c = by_id[cid]
        f = c.origin[0] if c.origin else "unattributed"
        cells[f] += 1
        seq[f] += int(c.is_sequential)
        if c.origin:
            sites.setdefault(f, set()).add(c.origin[1])
    rows = [{"file": f, "cells": n, "sequential": seq[f], "sites": len(sites.get(f, ()))}
            for f, n in cells.items()]
    rows.sort(key=lambda r: (-r["cells"], r["file"]))
    return rows


def ranking_report(ranking: LifRanking, lti: LtiResult, netlist: Netlist, config: dict | None = None,
                   top: int = 1000) -> dict:
    return {
        "config": config or {},
        "lti": {"threshold": lti.threshold, "test_kind": lti.test_kind,
                "frames": [int(f) for f in lti.flagged_frames]},
        "num_entries": len(ranking),
        "entries": ranking.entry_dicts(top),
        "flag_threshold": ranking.flag_threshold,
        "flagged_cells": ranking.flagged_cells,
        "origin_rollup": ranking.per_origin_rollup,
        "backannotation": backannotate(ranking, netlist),
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True, allow_nan=False)
