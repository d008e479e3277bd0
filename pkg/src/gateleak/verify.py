"""CPA key recovery, measurements to disclosure, and power-subtraction checks."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aca import _pearson_from_sums
from .leakmodels import HW8, SBOX, VectorMeta, plaintexts_keys
from .power import PowerMatrix

MTD_STEP = 16


@dataclass
class CpaResult:
    correlation_by_hypothesis: np.ndarray  # (256, frames) on the full trace set
    best_guess: int
    correct_key: int | None
    mtd: int | None                        # None: not disclosed
    grid: np.ndarray                       # trace counts evaluated
    max_abs_rho: np.ndarray                # (len(grid), 256) peak |rho| per hypothesis
    correct_first: np.ndarray              # (len(grid),) correct key strictly ranked first

    @property
    def disclosed(self) -> bool:
        return self.mtd is not None

    def mtd_or(self, cap: int) -> int:
        return cap if self.mtd is None else self.mtd

    def convergence_csv(self) -> str:
        buf = io.StringIO()
        buf.write("traces," + ",".join(f"k{g:02x}" for g in range(256)) + "\n")
        for m, row in zip(self.grid.tolist(), self.max_abs_rho):
            buf.write(f"{m}," + ",".join(f"{x:.6g}" for x in row) + "\n")
        return buf.getvalue()


def hypothesis_matrix(plaintext_bytes: np.ndarray) -> np.ndarray:
    """HW(SBOX(pt ^ g)) for all 256 guesses: shape (256, N)."""
    pt = np.asarray(plaintext_bytes, dtype=np.uint8)
    g = np.arange(256, dtype=np.uint8)[:, None]
    return HW8[SBOX[pt[None, :] ^ g]].astype(np.float64)


def cpa_attack(power: PowerMatrix | np.ndarray, metas: Sequence[VectorMeta], byte_index: int = 0,
               step: int = MTD_STEP) -> CpaResult:
    """First-round S-box CPA on one key byte with a stepped disclosure grid."""
    P = np.asarray(power.values if isinstance(power, PowerMatrix) else power, dtype=np.float64)
    n = P.shape[0]
    if n != len(metas):
        raise ValueError(f"{n} traces but {len(metas)} metadata records")
    if n < step:
        raise ValueError(f"insufficient traces: {n} < {step}")
    pts, keys = plaintexts_keys(metas)
    M = hypothesis_matrix(pts[:, byte_index])
    correct = int(keys[0, byte_index]) if np.all(keys[:, byte_index] == keys[0, byte_index]) else None

    grid = np.arange(step, n + 1, step)
    if grid[-1] != n:
        grid = np.append(grid, n)
    sx = np.zeros(256)
    sxx = np.zeros(256)
    sy = np.zeros(P.shape[1])
    syy = np.zeros(P.shape[1])
    sxy = np.zeros((256, P.shape[1]))
    # center power columns for numerical stability; correlation is shift invariant
    Pc = P - P.mean(axis=0)
    peaks = np.zeros((len(grid), 256))
    first = np.zeros(len(grid), bool)
    lo = 0
    rho = None
    for gi, m in enumerate(grid):
        Mc, Pk = M[:, lo:m], Pc[lo:m]
        sx += Mc.sum(axis=1)
        sxx += (Mc * Mc).sum(axis=1)
        sy += Pk.sum(axis=0)
        syy += (Pk * Pk).sum(axis=0)
        sxy += Mc @ Pk
        lo = m
        rho = _pearson_from_sums(m, sx[:, None], sy[None, :], sxx[:, None], syy[None, :], sxy)
        peak = np.nan_to_num(np.abs(rho), nan=0.0).max(axis=1)
        peaks[gi] = peak
        if correct is not None:
            others = np.delete(peak, correct)
            first[gi] = peak[correct] > others.max()
    best = int(np.argmax(peaks[-1]))
    mtd = None
    if correct is not None and first[-1]:
        k = len(first) - 1
        while k > 0 and first[k - 1]:
            k -= 1
        mtd = int(grid[k])
    return CpaResult(rho, best, correct, mtd, grid, peaks, first)


@dataclass
class SubtractionResult:
    original: CpaResult
    modified: CpaResult
    mtd_ratio: float
    clamped: int


def mtd_ratio(original: CpaResult, modified: CpaResult) -> float:
    if original.mtd is None:
        return math.nan
    if modified.mtd is None:
        return math.inf
    return modified.mtd / original.mtd


def subtract_power(power: np.ndarray, subset: np.ndarray) -> tuple[np.ndarray, int]:
    """``power - subset`` with rounding residue zeroed and negatives clamped at 0."""
    power = np.asarray(power, dtype=np.float64)
    subset = np.asarray(subset, dtype=np.float64)
    if subset.ndim == 3:
        subset = subset.sum(axis=0)
    if subset.shape != power.shape:
        raise ValueError(f"subset rows {subset.shape} do not match power matrix {power.shape}")
    out = power - subset
    out[np.abs(out) <= 1e-9 * np.abs(power)] = 0.0
    neg = int((out < 0).sum())
    if neg:
        warnings.warn(f"clamped {neg} negative power values after subtraction", RuntimeWarning, stacklevel=2)
        out = np.maximum(out, 0.0)
    return out, neg


def subtract_and_reattack(power: PowerMatrix | np.ndarray, subset_rows: np.ndarray, metas: Sequence[VectorMeta],
                          byte_index: int = 0, step: int = MTD_STEP,
                          original: CpaResult | None = None) -> SubtractionResult:
    P = np.asarray(power.values if isinstance(power, PowerMatrix) else power, dtype=np.float64)
    orig = original or cpa_attack(P, metas, byte_index, step)
    mod_values, neg = subtract_power(P, subset_rows)
    mod = cpa_attack(mod_values, metas, byte_index, step)
    return SubtractionResult(orig, mod, mtd_ratio(orig, mod), neg)
