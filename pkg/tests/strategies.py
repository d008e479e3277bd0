"""Random small designs and stimuli shared by the property tests."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from gateleak.designs.builder import NetlistBuilder
from gateleak.logicsim import Stimulus

COMB2 = ("AND2", "OR2", "NAND2", "NOR2", "XOR2", "XNOR2")


def random_netlist(rng: np.random.Generator, n_inputs: int = 3, n_cells: int = 10, n_flops: int = 2,
                   loads: bool = True):
    """Random acyclic logic plus a few flops; every cell output is observable or feeds later cells."""
    b = NetlistBuilder()
    pool = b.inputs_bus("i", n_inputs)
    flop_q = [b.net() for _ in range(n_flops)]
    pool = pool + flop_q
    with b.origin("rand.v", 1):
        for k in range(n_cells):
            r = rng.random()
            if r < 0.15:
                pool.append(b.inv(pool[rng.integers(len(pool))]))
            elif r < 0.25:
                pool.append(b.buf(pool[rng.integers(len(pool))]))
            elif r < 0.35:
                a, c, s = rng.integers(len(pool), size=3)
                pool.append(b.mux2(pool[a], pool[c], pool[s]))
            else:
                a, c = rng.integers(len(pool), size=2)
                pool.append(b.cell(COMB2[rng.integers(len(COMB2))], (pool[a], pool[c])))
    with b.origin("rand.v", 2):
        for q in flop_q:
            b.dff(pool[rng.integers(n_inputs, len(pool))], q)
    b.buf(pool[-1], b.output("y"))
    if loads:
        for net in pool[n_inputs:][: 3]:
            b.load(net, float(rng.integers(0, 5)))
    return b.build()


def random_stimulus(rng: np.random.Generator, netlist, vector_id: int, num_cycles: int = 4) -> Stimulus:
    wave = {}
    for pi in netlist.primary_inputs:
        if pi in (netlist.clock_net, netlist.reset_net):
            continue
        wave[pi] = [(c, int(rng.integers(2))) for c in range(num_cycles)]
    return Stimulus(vector_id, wave, num_cycles)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
