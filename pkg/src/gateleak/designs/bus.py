"""Register-file and shared-bus micro-design with a driver-style store sequence.

A small CPU-like register file (a0..a4) loads words from a memory port and
stores them over a shared bus into a crypto peripheral. The store sequence
mirrors a driver that writes the plaintext words first and the key words
afterwards, reusing register a3: the key byte then overwrites the plaintext
byte still held in a3 and on the bus, which leaks HD(pt, key) =
HW(pt ^ key) in the interface cells. ALU and multiplier logic fed from an
independent immediate port provide unrelated activity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..leakmodels import ByteStream, TargetSpec, VectorMeta
from ..logicsim import Stimulus
from ..netlist import Netlist
from .builder import NetlistBuilder

WIDTH = 32
BUS_LOAD = 6.0
BUS_CYCLES = 12
BUS_WINDOW = (1, BUS_CYCLES)
REGS = ("a0", "a1", "a2", "a3", "a4")
CPU = "cpu_regfile.v"
BUS = "bus.v"
ALU = "alu.v"
PER = "aes_periph.v"


def _multiplier(b: NetlistBuilder, x: Sequence[str], y: Sequence[str]) -> list[str]:
    """Unsigned array multiplier, product truncated to len(x) + len(y) bits."""
    acc = [b.and2(x[i], y[0]) for i in range(len(x))] + [b.tie(0)] * len(y)
    for j in range(1, len(y)):
        pp = [b.and2(x[i], y[j]) for i in range(len(x))]
        hi = b.adder(acc[j:j + len(x)] + [acc[j + len(x)]], pp + [b.tie(0)])
        acc[j:j + len(x) + 1] = hi
    return acc


def _build() -> tuple[Netlist, dict[str, list[str]]]:
    b = NetlistBuilder()
    mem = b.inputs_bus("mem", WIDTH)
    imm = b.inputs_bus("imm", WIDTH)
    we = {r: b.input(f"we_{r}") for r in REGS}
    bsel = b.input("bsel")
    pt_en = [b.input(f"pt_en_{w}") for w in range(4)]
    key_en = b.input("key_en")
    go = b.input("go")
    watch: dict[str, list[str]] = {}

    regs = {}
    with b.origin(CPU, 14):
        regs["a0"] = b.dffe_bus(imm, we["a0"])
        regs["a1"] = b.dffe_bus([b.inv(v) for v in imm], we["a1"])
    with b.origin(ALU, 8):
        alu = b.adder(regs["a0"], regs["a1"])
    with b.origin(ALU, 21):
        prod = _multiplier(b, regs["a0"][:8], regs["a1"][:8])
    with b.origin(CPU, 14):
        regs["a2"] = b.dffe_bus([b.xor2(s, p) for s, p in zip(alu, prod + alu[16:])], we["a2"])
        regs["a3"] = b.dffe_bus(mem, we["a3"])
        regs["a4"] = b.dffe_bus(mem, we["a4"])
    # the multiplexer drives the bus wire directly
    with b.origin(BUS, 30):
        bus = b.mux_bus(regs["a4"], regs["a3"], bsel)
    for v in bus:
        b.load(v, BUS_LOAD)

    with b.origin(PER, 40):
        pt = [b.dffe_bus(bus, pt_en[w]) for w in range(4)]
    with b.origin(PER, 44):
        key0 = b.dffe_bus(bus, key_en)
    with b.origin(PER, 52):
        st = b.dff_bus([b.and2(b.xor2(p, k), go) for p, k in zip(pt[0], key0)])
    with b.origin(PER, 60):
        fold = b.xor_bus(b.xor_bus(pt[1], pt[2]), b.xor_bus(pt[3], st))
    with b.origin(PER, 66):
        for i, v in enumerate(fold):
            b.buf(v, b.output(f"dout_{i}"))

    cells = b.cells
    by_out = {c.output: c.instance_id for c in cells}
    watch["a3_byte0"] = [by_out[q] for q in regs["a3"][:8]]
    watch["bus_mux_byte0"] = [by_out[q] for q in bus[:8]]
    return b.build(), watch


@dataclass
class BusScenario:
    """Netlist, leakage target and the scripted load/store sequence."""

    netlist: Netlist
    target: TargetSpec
    clear_register: bool
    watch: dict[str, list[str]]
    schedule: list[tuple[int, str]] = field(default_factory=list)
    num_cycles: int = BUS_CYCLES
    window: tuple[int, int] = BUS_WINDOW

    @property
    def watch_cells(self) -> list[str]:
        return [c for group in self.watch.values() for c in group]

    def stimulus(self, meta: VectorMeta) -> Stimulus:
        return bus_stimulus(meta, self.clear_register, self.num_cycles)

    def stimuli(self, metas: Sequence[VectorMeta]) -> list[Stimulus]:
        return [self.stimulus(m) for m in metas]


def _schedule(clear_register: bool) -> list[tuple[int, str]]:
    ops = [
        (1, "lw a4, pt[1]"),
        (2, "sw a4, PT1; lw a4, pt[2]"),
        (3, "sw a4, PT2; lw a4, pt[3]"),
        (4, "sw a4, PT3; lw a3, pt[0]"),
        (5, "sw a3, PT0; lw a0, imm"),
        (6, "li a3, 0" if clear_register else "nop"),
        (7, "lw a3, key[0]"),
        (8, "sw a3, KEY0; add a2, a0, a1"),
        (9, "go; lw a1, imm"),
        (10, "add a2, a0, a1"),
    ]
    return ops


def gen_bus_interface_scenario(clear_register: bool = False) -> BusScenario:
    """``clear_register`` inserts a register clear between the plaintext and key stores."""
    nl, watch = _build()
    target = TargetSpec(intermediate="round_input", round=1, byte_index=0, model="hamming_weight")
    return BusScenario(nl, target, clear_register, watch, _schedule(clear_register))


def _word(data: bytes, w: int) -> int:
    return int.from_bytes(data[4 * w:4 * w + 4], "little")


def bus_stimulus(meta: VectorMeta, clear_register: bool = False, num_cycles: int = BUS_CYCLES) -> Stimulus:
    """Waveform for one vector: the scripted load/store sequence with ``meta``'s plaintext and key."""
    if num_cycles < BUS_CYCLES:
        raise ValueError(f"the store sequence needs {BUS_CYCLES} cycles")
    pt, key = meta.plaintext, meta.key
    # memory port value from each listed cycle on; it holds between loads
    mem = {1: _word(pt, 1), 2: _word(pt, 2), 3: _word(pt, 3), 4: _word(pt, 0), 7: _word(key, 0)}
    if clear_register:
        mem[6] = 0
    pulses: dict[str, list[int]] = {
        "we_a4": [1, 2, 3], "we_a3": [4, 7] + ([6] if clear_register else []),
        "pt_en_1": [2], "pt_en_2": [3], "pt_en_3": [4], "pt_en_0": [5],
        "key_en": [8], "go": [9],
        # single register-file write port: ALU traffic fills the free slots
        "we_a0": [5], "we_a1": [9], "we_a2": [8, 10],
    }
    wave: dict[str, list[tuple[int, int]]] = {}
    for name, cycles in pulses.items():
        cur, seq = 0, []
        for c in range(1, BUS_CYCLES):
            v = int(c in cycles)
            if v != cur:
                seq.append((c, v))
                cur = v
        wave[name] = seq
    wave["bsel"] = [(5, 1)]
    for i in range(WIDTH):
        seq, cur = [], 0
        for c in sorted(mem):
            v = (mem[c] >> i) & 1
            if v != cur:
                seq.append((c, v))
                cur = v
        wave[f"mem_{i}"] = seq
    # immediates for the ALU are independent of the model byte
    imm = ByteStream(int.from_bytes(pt[8:16], "little") ^ (meta.vector_id << 1)).bytes(4 * 10)
    for i in range(WIDTH):
        seq, cur = [], 0
        for c in range(1, 11):
            v = (imm[4 * (c - 1) + i // 8] >> (i % 8)) & 1
            if v != cur:
                seq.append((c, v))
                cur = v
        wave[f"imm_{i}"] = seq
    return Stimulus(meta.vector_id, wave, num_cycles, meta)
