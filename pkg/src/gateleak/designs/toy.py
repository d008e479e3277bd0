"""Planted-leak toy design for checking the ranking end to end.

One buffer copies a single model bit (a bit of plaintext byte 0) to a
heavily loaded output. Everything else is decoy logic fed from other
plaintext bytes or from a free-running counter, so its activity does not
depend on the model bit.
"""

from __future__ import annotations

from typing import Sequence

from ..leakmodels import TargetSpec, VectorMeta
from ..logicsim import Stimulus
from ..netlist import Netlist
from .builder import NetlistBuilder

LEAK_IN = "leak_in"
LEAK_OUT = "leak_out"
N_DECOY_INPUTS = 8
TOY_CYCLES = 4
TOY_WINDOW = (1, TOY_CYCLES)
LEAK_LOAD = 40.0


def gen_toy_leaky(bit_selector: int = 0, decoy_only: bool = False) -> tuple[Netlist, TargetSpec]:
    """Toy netlist plus the target whose bit the designated buffer carries.

    ``decoy_only`` drops the designated buffer and leaves ``leak_in``
    dangling, which gives a design with no model-dependent activity.
    """
    if not 0 <= bit_selector <= 7:
        raise ValueError("bit_selector must be in [0, 7]")
    b = NetlistBuilder()
    b.input(LEAK_IN)
    dec = b.inputs_bus("dec", N_DECOY_INPUTS)
    if not decoy_only:
        with b.origin("toy.v", 10):
            b.buf(LEAK_IN, b.output(LEAK_OUT))
        b.load(LEAK_OUT, LEAK_LOAD)

    with b.origin("toy.v", 20):
        x = [b.xor2(dec[i], dec[i + 1]) for i in range(0, N_DECOY_INPUTS, 2)]
        a = [b.and2(dec[i], dec[(i + 3) % N_DECOY_INPUTS]) for i in range(N_DECOY_INPUTS)]
        m = [b.mux2(x[i], a[i], dec[(i + 5) % N_DECOY_INPUTS]) for i in range(len(x))]
        par = b.xor2(b.xor2(m[0], m[1]), b.xor2(m[2], m[3]))
    with b.origin("toy.v", 30):
        q = b.dff_bus([b.buf(d) for d in dec[:4]] + [par])
        b.load(q[-1], 8.0)
    with b.origin("toy.v", 40):
        cnt, connect = b.register(4)
        connect(b.incrementer(cnt))
    with b.origin("toy.v", 50):
        mix = b.and2(b.or2(q[0], cnt[1]), b.nand2(q[4], cnt[0]))
        b.buf(mix, b.output("dec_out"))
    b.load("dec_out", 20.0)
    target = TargetSpec(intermediate="round_input", round=0, byte_index=0, model="bit", bit=bit_selector)
    return b.build(), target


def designated_cell(netlist: Netlist) -> str:
    cell = netlist.driver_of(LEAK_OUT)
    if cell is None:
        raise KeyError("netlist has no designated leaking cell")
    return cell.instance_id


def toy_stimulus(meta: VectorMeta, bit_selector: int = 0, num_cycles: int = TOY_CYCLES) -> Stimulus:
    """Inputs rise in cycle 1 and return to 0 in cycle 2."""
    pt = meta.plaintext
    bits = [(pt[0] >> bit_selector) & 1] + [(pt[1 + i // 8] >> (i % 8)) & 1 for i in range(N_DECOY_INPUTS)]
    names = [LEAK_IN] + [f"dec_{i}" for i in range(N_DECOY_INPUTS)]
    wave = {n: [(1, v), (2, 0)] for n, v in zip(names, bits)}
    return Stimulus(meta.vector_id, wave, num_cycles, meta)


def toy_stimuli(metas: Sequence[VectorMeta], bit_selector: int = 0) -> list[Stimulus]:
    return [toy_stimulus(m, bit_selector) for m in metas]
