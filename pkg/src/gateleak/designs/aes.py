"""AES-128 encryption core generator.

The core stores all eleven round keys, which it expands from the loaded key
before any encryption starts. The datapath either evaluates four S-boxes per
cycle (one state column per cycle plus a fifth cycle for ShiftRows,
MixColumns and AddRoundKey) or sixteen S-boxes, finishing one round per
cycle. In the four-S-box variant the S-box results collect in a SubBytes
buffer register that is cleared at every round boundary.

Vector schedule (cycle numbers; inputs change at the rising edge that
starts the cycle and are sampled at the next edge):

  cycle 0         reset asserted
  cycle 1         load_key = 1, din = key
  cycles 2..11    round-key expansion
  cycle 12        start = 1, din = plaintext
  cycle 13        state holds plaintext ^ rk0, round 1 begins
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..leakmodels import VectorMeta
from ..logicsim import EventTrace, Stimulus
from ..netlist import Netlist
from .builder import NetlistBuilder

LOAD_CYCLE = 1
START_CYCLE = 12
FIRST_ROUND_CYCLE = 13

# Compact S-box circuit (Boyar-Peralta, depth 16). U0 is the input MSB and
# S0 the output MSB; "1 ^ a ^ b" denotes XNOR.
SBOX_SLP = """
T1 = U0 ^ U3
T2 = U0 ^ U5
T3 = U0 ^ U6
T4 = U3 ^ U5
T5 = U4 ^ U6
T6 = T1 ^ T5
T7 = U1 ^ U2
T8 = U7 ^ T6
T9 = U7 ^ T7
T10 = T6 ^ T7
T11 = U1 ^ U5
T12 = U2 ^ U5
T13 = T3 ^ T4
T14 = T6 ^ T11
T15 = T5 ^ T11
T16 = T5 ^ T12
T17 = T9 ^ T16
T18 = U3 ^ U7
T19 = T7 ^ T18
T20 = T1 ^ T19
T21 = U6 ^ U7
T22 = T7 ^ T21
T23 = T2 ^ T22
T24 = T2 ^ T10
T25 = T20 ^ T17
T26 = T3 ^ T16
T27 = T1 ^ T12
M1 = T13 & T6
M2 = T23 & T8
M3 = T14 ^ M1
M4 = T19 & U7
M5 = M4 ^ M1
M6 = T3 & T16
M7 = T22 & T9
M8 = T26 ^ M6
M9 = T20 & T17
M10 = M9 ^ M6
M11 = T1 & T15
M12 = T4 & T27
M13 = M12 ^ M11
M14 = T2 & T10
M15 = M14 ^ M11
M16 = M3 ^ M2
M17 = M5 ^ T24
M18 = M8 ^ M7
M19 = M10 ^ M15
M20 = M16 ^ M13
M21 = M17 ^ M15
M22 = M18 ^ M13
M23 = M19 ^ T25
M24 = M22 ^ M23
M25 = M22 & M20
M26 = M21 ^ M25
M27 = M20 ^ M21
M28 = M23 ^ M25
M29 = M28 & M27
M30 = M26 & M24
M31 = M20 & M23
M32 = M27 & M31
M33 = M27 ^ M25
M34 = M21 & M22
M35 = M24 & M34
M36 = M24 ^ M25
M37 = M21 ^ M29
M38 = M32 ^ M33
M39 = M23 ^ M30
M40 = M35 ^ M36
M41 = M38 ^ M40
M42 = M37 ^ M39
M43 = M37 ^ M38
M44 = M39 ^ M40
M45 = M42 ^ M41
M46 = M44 & T6
M47 = M40 & T8
M48 = M39 & U7
M49 = M43 & T16
M50 = M38 & T9
M51 = M37 & T17
M52 = M42 & T15
M53 = M45 & T27
M54 = M41 & T10
M55 = M44 & T13
M56 = M40 & T23
M57 = M39 & T19
M58 = M43 & T3
M59 = M38 & T22
M60 = M37 & T20
M61 = M42 & T1
M62 = M45 & T4
M63 = M41 & T2
L0 = M61 ^ M62
L1 = M50 ^ M56
L2 = M46 ^ M48
L3 = M47 ^ M55
L4 = M54 ^ M58
L5 = M49 ^ M61
L6 = M62 ^ L5
L7 = M46 ^ L3
L8 = M51 ^ M59
L9 = M52 ^ M53
L10 = M53 ^ L4
L11 = M60 ^ L2
L12 = M48 ^ M51
L13 = M50 ^ L0
L14 = M52 ^ M61
L15 = M55 ^ L1
L16 = M56 ^ L0
L17 = M57 ^ L1
L18 = M58 ^ L8
L19 = M63 ^ L4
L20 = L0 ^ L1
L21 = L1 ^ L7
L22 = L3 ^ L12
L23 = L18 ^ L2
L24 = L15 ^ L9
L25 = L6 ^ L10
L26 = L7 ^ L9
L27 = L8 ^ L10
L28 = L11 ^ L14
L29 = L11 ^ L17
S0 = L6 ^ L24
S1 = 1 ^ L16 ^ L26
S2 = 1 ^ L19 ^ L28
S3 = L6 ^ L21
S4 = L20 ^ L22
S5 = L25 ^ L29
S6 = 1 ^ L13 ^ L27
S7 = 1 ^ L6 ^ L23
"""


def _parse_slp(text: str) -> list[tuple[str, str, str, str]]:
    gates = []
    for line in text.strip().splitlines():
        lhs, rhs = (s.strip() for s in line.split("="))
        tok = rhs.split()
        if tok[0] == "1":
            gates.append((lhs, "XNOR2", tok[2], tok[4]))
        else:
            gates.append((lhs, "XOR2" if tok[1] == "^" else "AND2", tok[0], tok[2]))
    return gates


SBOX_GATES = _parse_slp(SBOX_SLP)

# pseudo-RTL line numbers
SBOX_LINE0 = 20        # one line per S-box circuit statement
ENC = "encipher.v"

KEY = "keymem.v"
IFC = "interface.v"
SBOX = "sbox.v"


def sbox_circuit(b: NetlistBuilder, x: Sequence[str]) -> list[str]:
    """S-box on little-endian input bits; returns little-endian output bits."""
    env = {f"U{i}": x[7 - i] for i in range(8)}
    for line, (lhs, kind, a, c) in enumerate(SBOX_GATES):
        with b.origin(SBOX, SBOX_LINE0 + line):
            env[lhs] = b.cell(kind, (env[a], env[c]))
    return [env[f"S{7 - k}"] for k in range(8)]


def _xtime_bits(b: NetlistBuilder, p: Sequence[str]) -> list[str]:
    return [p[7], b.xor2(p[0], p[7]), p[1], b.xor2(p[2], p[7]), b.xor2(p[3], p[7]), p[4], p[5], p[6]]


def mix_columns(b: NetlistBuilder, s: list[list[str]]) -> list[list[str]]:
    """MixColumns on 16 byte-bit-lists: out_i = a_i ^ t ^ xtime(a_i ^ a_{i+1})."""
    out: list[list[str]] = [None] * 16
    for c in range(4):
        a = [s[4 * c + r] for r in range(4)]
        with b.origin(ENC, 61):
            t = b.xor_bus(b.xor_bus(a[0], a[1]), b.xor_bus(a[2], a[3]))
        for r in range(4):
            with b.origin(ENC, 62):
                p = b.xor_bus(a[r], a[(r + 1) % 4])
            with b.origin(ENC, 63):
                xt = _xtime_bits(b, p)
            with b.origin(ENC, 64):
                out[4 * c + r] = b.xor_bus(b.xor_bus(a[r], t), xt)
    return out


def shift_rows(s: list[list[str]]) -> list[list[str]]:
    return [s[(i % 4) + 4 * (((i // 4) + (i % 4)) % 4)] for i in range(16)]


def _bytes(bits: Sequence[str]) -> list[list[str]]:
    return [list(bits[8 * i:8 * i + 8]) for i in range(16)]


def _flat(byts: list[list[str]]) -> list[str]:
    return [x for byte in byts for x in byte]


def _mux_tree(b: NetlistBuilder, sel: Sequence[str], leaves: dict[int, list[str]], lo: int, bit: int):
    """Select ``leaves[index]`` by the little-endian select word; absent leaves are pruned."""
    if bit < 0:
        return leaves.get(lo)
    half = 1 << bit
    a = _mux_tree(b, sel, leaves, lo, bit - 1)
    c = _mux_tree(b, sel, leaves, lo + half, bit - 1)
    if a is None:
        return c
    if c is None:
        return a
    return b.mux_bus(a, c, sel[bit])


def _key_memory(b: NetlistBuilder, din: list[str], load_key: str, rc: list[str]):
    """Round-key storage and offline expansion; returns (rk0 bits, rk[rc] bits)."""
    with b.origin(KEY, 14):
        ke_busy, ke_busy_d = b.register(1)
        ke_cnt, ke_cnt_d = b.register(4)
    with b.origin(KEY, 18):
        ke_last = b.equals_const(ke_cnt, 10)
        busy_next = b.or2(load_key, b.and2(ke_busy[0], b.inv(ke_last)))
        ke_busy_d([busy_next])
        ke_en = b.or2(load_key, ke_busy[0])
    with b.origin(KEY, 20):
        one = [b.tie(1), b.tie(0), b.tie(0), b.tie(0)]
        ke_cnt_d(b.mux_bus(b.incrementer(ke_cnt), one, load_key), ke_en)

    with b.origin(KEY, 24):
        rcon, rcon_d = b.register(8)
        w, w_d = b.register(128)
    with b.origin(KEY, 27):
        rcon_x = _xtime_bits(b, rcon)
        init = [b.tie(1)] + [b.tie(0)] * 7
        rcon_d(b.mux_bus(rcon_x, init, load_key), ke_en)
    wb = _bytes(w)
    rot = [wb[13], wb[14], wb[15], wb[12]]
    sub = [sbox_circuit(b, x) for x in rot]
    with b.origin(KEY, 33):
        sub[0] = b.xor_bus(sub[0], rcon)
    nxt: list[list[str]] = []
    with b.origin(KEY, 35):
        for word in range(4):
            prev = sub if word == 0 else nxt[4 * (word - 1):4 * word]
            for r in range(4):
                nxt.append(b.xor_bus(wb[4 * word + r], prev[r]))
    expand = _flat(nxt)
    with b.origin(KEY, 38):
        w_d(b.mux_bus(expand, din, load_key), ke_en)
    with b.origin(KEY, 41):
        rk0 = b.dffe_bus(din, load_key)
    rks = {0: rk0}
    with b.origin(KEY, 44):
        ke_inv = [b.inv(x) for x in ke_cnt]
    for i in range(1, 11):
        with b.origin(KEY, 44):
            en = b.and2(ke_busy[0], b.equals_const(ke_cnt, i, ke_inv))
        with b.origin(KEY, 46):
            rks[i] = b.dffe_bus(expand, en)
    with b.origin(KEY, 52):
        rk_sel = _mux_tree(b, rc, {i: rks[i] for i in range(1, 11)}, 0, 3)
    return rk0, rk_sel


def gen_aes_core(sboxes_per_cycle: int = 4) -> Netlist:
    """Deterministic AES-128 encryption core with ``sboxes_per_cycle`` in {4, 16}."""
    if sboxes_per_cycle not in (4, 16):
        raise ValueError("sboxes_per_cycle must be 4 or 16")
    b = NetlistBuilder()
    din_in = b.inputs_bus("din", 128)
    load_key = b.input("load_key")
    start = b.input("start")
    with b.origin(IFC, 9):
        din = [b.buf(x) for x in din_in]

    with b.origin(ENC, 12):
        busy, busy_d = b.register(1)
        rc, rc_d = b.register(4)
        done, done_d = b.register(1)
    with b.origin(ENC, 30):
        S, S_d = b.register(128)
    Sb = _bytes(S)
    with b.origin(ENC, 20):
        last = b.equals_const(rc, 10)

    rk0, rk = _key_memory(b, din, load_key, rc)

    with b.origin(ENC, 40):
        whiten = b.xor_bus(din, rk0)

    if sboxes_per_cycle == 4:
        with b.origin(ENC, 14):
            ph, ph_d = b.register(3)
        with b.origin(ENC, 16):
            ph_inv = [b.inv(x) for x in ph]
            is4 = b.equals_const(ph, 4, ph_inv)
            step = b.and2(busy[0], is4)
            sub = [b.and_tree([busy[0], b.equals_const(ph[:2], c, ph_inv[:2]), ph_inv[2]]) for c in range(4)]
            not_start = b.inv(start)
            keep = b.and2(b.and2(busy[0], b.inv(is4)), not_start)
            ph_d([b.and2(x, keep) for x in b.incrementer(ph)])
        with b.origin(ENC, 34):
            colsel = []
            for r in range(4):
                m01 = b.mux_bus(Sb[r], Sb[4 + r], ph[0])
                m23 = b.mux_bus(Sb[8 + r], Sb[12 + r], ph[0])
                colsel.append(b.mux_bus(m01, m23, ph[1]))
        V = [sbox_circuit(b, colsel[r]) for r in range(4)]
        # SubBytes buffer: filled one column per cycle, cleared at round boundaries
        with b.origin(ENC, 36):
            clear = b.or2(start, step)
            keep_v = b.inv(clear)
            buf_d = [b.and_bus(V[r], keep_v) for r in range(4)]
            buf_en = [b.or2(clear, sub[c]) for c in range(4)]
            T = [b.dffe_bus(buf_d[i % 4], buf_en[i // 4]) for i in range(16)]
        # operand isolation: MixColumns only sees the buffer in the finishing cycle
        with b.origin(ENC, 38):
            Tg = [b.and_bus(T[i], step) for i in range(16)]
        sr = shift_rows(Tg)
        mc = mix_columns(b, sr)
        with b.origin(ENC, 70):
            sel = [b.mux_bus(mc[i], sr[i], last) for i in range(16)]
        with b.origin(ENC, 72):
            rnd = [b.xor_bus(sel[i], rk[8 * i:8 * i + 8]) for i in range(16)]
        with b.origin(ENC, 50):
            d = b.mux_bus(_flat(rnd), whiten, start)
        with b.origin(ENC, 30):
            for k in range(128):
                b.dffe(d[k], clear, S[k])
    else:
        step = busy[0]
        with b.origin(ENC, 16):
            not_start = b.inv(start)
        V = [sbox_circuit(b, Sb[i]) for i in range(16)]
        sr = shift_rows(V)
        mc = mix_columns(b, sr)
        with b.origin(ENC, 70):
            sel = [b.mux_bus(mc[i], sr[i], last) for i in range(16)]
        with b.origin(ENC, 72):
            rnd = [b.xor_bus(sel[i], rk[8 * i:8 * i + 8]) for i in range(16)]
        with b.origin(ENC, 50):
            d = b.mux_bus(_flat(rnd), whiten, start)
            en = b.or2(start, busy[0])
        with b.origin(ENC, 30):
            for k in range(128):
                b.dffe(d[k], en, S[k])

    with b.origin(ENC, 22):
        finish = b.and2(step, last)
        busy_d([b.or2(start, b.and2(busy[0], b.inv(finish)))])
        rc_en = b.or2(start, step)
        one = [b.tie(1), b.tie(0), b.tie(0), b.tie(0)]
        rc_next = b.mux_bus(b.incrementer(rc), one, start)
    rc_d(rc_next, rc_en)
    with b.origin(ENC, 80):
        done_d([b.and2(not_start, b.or2(done[0], finish))])

    with b.origin(IFC, 15):
        for k in range(128):
            b.dff(S[k], b.output(f"dout_{k}"))
    with b.origin(IFC, 18):
        b.buf(done[0], b.output("done"))
    return b.build()


# ---------------------------------------------------------------------------
# Stimuli

def _bits(data: bytes) -> list[int]:
    return [(data[i // 8] >> (i % 8)) & 1 for i in range(128)]


def aes_stimulus(meta: VectorMeta, num_cycles: int = 20) -> Stimulus:
    """Waveform loading ``meta.key`` then encrypting ``meta.plaintext``."""
    kb, pb = _bits(meta.key), _bits(meta.plaintext)
    wave: dict[str, list[tuple[int, int]]] = {
        "load_key": [(LOAD_CYCLE, 1), (LOAD_CYCLE + 1, 0)],
        "start": [(START_CYCLE, 1), (START_CYCLE + 1, 0)],
    }
    for i in range(128):
        wave[f"din_{i}"] = [(0, 0), (LOAD_CYCLE, kb[i]), (START_CYCLE, pb[i])]
    return Stimulus(meta.vector_id, wave, num_cycles, meta)


def aes_stimuli(metas: Sequence[VectorMeta], num_cycles: int = 20) -> list[Stimulus]:
    return [aes_stimulus(m, num_cycles) for m in metas]


def encryption_cycles(sboxes_per_cycle: int) -> int:
    """Cycles from the start of round 1 until dout shows the ciphertext."""
    per_round = 5 if sboxes_per_cycle == 4 else 1
    return 10 * per_round + 1


def completion_cycle(sboxes_per_cycle: int) -> int:
    """Number of simulated cycles needed for dout to hold the ciphertext."""
    return FIRST_ROUND_CYCLE + encryption_cycles(sboxes_per_cycle) + 1


def round_cycles(sboxes_per_cycle: int, rnd: int) -> tuple[int, int]:
    """Half-open cycle span in which round ``rnd`` (1-based) is computed."""
    per_round = 5 if sboxes_per_cycle == 4 else 1
    start = FIRST_ROUND_CYCLE + (rnd - 1) * per_round
    return start, start + per_round


def read_output(netlist: Netlist, trace: EventTrace, t: int | None = None) -> bytes:
    """dout value at time ``t`` (default: end of the trace window) as 16 bytes."""
    vals = trace.values_at(trace.window[1] - 1 if t is None else t)
    idx = netlist.net_index
    bits = [int(vals[idx[f"dout_{k}"]]) for k in range(128)]
    return bytes(sum(bits[8 * i + k] << k for k in range(8)) for i in range(16))


def sbox_cells(netlist: Netlist) -> list[str]:
    return [c.instance_id for c in netlist.cells if c.origin and c.origin[0] == SBOX]


def origin_files(netlist: Netlist) -> dict[str, int]:
    out: dict[str, int] = {}
    for c in netlist.cells:
        f = c.origin[0] if c.origin else "unattributed"
        out[f] = out.get(f, 0) + 1
    return out


@dataclass(frozen=True)
class AesCampaign:
    """Default timing for AES campaigns: 64 frames per cycle over cycles 12..19."""

    sboxes_per_cycle: int = 4
    clock_period: int = 10240
    frames_per_cycle: int = 64
    window: tuple[int, int] = (START_CYCLE, START_CYCLE + 8)

    @property
    def num_cycles(self) -> int:
        return self.window[1]

