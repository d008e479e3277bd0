import numpy as np
import pytest

from gateleak.designs import aes, bus, toy
from gateleak.designs.builder import NetlistBuilder
from gateleak.leakmodels import aes_encrypt, gen_random_vectors, plaintexts_keys
from gateleak.logicsim import SimConfig, Stimulus, run_campaign, simulate_vector
from gateleak.netlist import NetlistError, format_netlist, validate
from gateleak.power import FrameSpec, per_cell_power_trace

CLOCK = aes.AesCampaign().clock_period


def _check_functional(netlist, sboxes, n, seed):
    metas = gen_random_vectors(n, "random", seed)
    pts, keys = plaintexts_keys(metas)
    expected = aes_encrypt(pts, keys)
    cfg = SimConfig(CLOCK, 1, window_cycles=(aes.completion_cycle(sboxes) - 1, aes.completion_cycle(sboxes)))
    traces = run_campaign(netlist, aes.aes_stimuli(metas, aes.completion_cycle(sboxes)), cfg)
    return [aes.read_output(netlist, tr) == bytes(c) for tr, c in zip(traces, expected)]


@pytest.mark.parametrize("sboxes", [4, 16])
def test_aes_core_encrypts(sboxes, aes4, aes16):
    nl = aes4 if sboxes == 4 else aes16
    assert all(_check_functional(nl, sboxes, 100, 40 + sboxes))


def test_aes_core_sizes(aes4, aes16):
    assert 3000 < len(aes4.cells) < len(aes16.cells) < 12000
    files = aes.origin_files(aes4)
    assert "unattributed" not in files
    # four datapath S-boxes plus four in the key schedule vs sixteen plus four
    assert aes.origin_files(aes16)["sbox.v"] == 20 * len(aes.SBOX_GATES)
    assert files["sbox.v"] == 8 * len(aes.SBOX_GATES)


def test_aes_generator_is_deterministic():
    assert format_netlist(aes.gen_aes_core(4)) == format_netlist(aes.gen_aes_core(4))
    with pytest.raises(ValueError):
        aes.gen_aes_core(8)


def test_aes_idle_after_reset_holds_outputs(aes4):
    wave = {f"din_{i}": [] for i in range(128)}
    wave.update(load_key=[], start=[])
    tr = simulate_vector(aes4, Stimulus(0, wave, 6), SimConfig(CLOCK, 1, window_cycles=(2, 6)))
    dout = {aes4.net_index[f"dout_{k}"] for k in range(128)}
    assert not dout & set(tr.nets.tolist())


def test_aes_round_cycles():
    assert aes.round_cycles(4, 1) == (aes.FIRST_ROUND_CYCLE, aes.FIRST_ROUND_CYCLE + 5)
    assert aes.round_cycles(16, 10) == (aes.FIRST_ROUND_CYCLE + 9, aes.FIRST_ROUND_CYCLE + 10)
    assert aes.completion_cycle(4) == 65 and aes.completion_cycle(16) == 25


@pytest.mark.parametrize("sboxes", [4, 16])
def test_first_round_cycle_busier_than_idle(sboxes, aes4, aes16):
    nl = aes4 if sboxes == 4 else aes16
    meta = gen_random_vectors(1, "fixed", 5)[0]
    done = aes.completion_cycle(sboxes)
    tr = simulate_vector(nl, aes.aes_stimulus(meta, done + 3), SimConfig(CLOCK, 1))
    per_cycle = np.bincount(tr.times // CLOCK, minlength=done + 3)
    assert per_cycle[aes.FIRST_ROUND_CYCLE] >= 10 * max(per_cycle[done + 1:].max(), 1)


def test_toy_design_shape():
    nl, target = toy.gen_toy_leaky(5)
    assert validate(nl) == []
    assert toy.designated_cell(nl) == nl.driver_of(toy.LEAK_OUT).instance_id
    assert target.model == "bit" and target.bit == 5
    decoy, _ = toy.gen_toy_leaky(5, decoy_only=True)
    with pytest.raises(KeyError):
        toy.designated_cell(decoy)
    with pytest.raises(ValueError):
        toy.gen_toy_leaky(8)


def test_toy_leak_follows_the_selected_bit():
    nl, _ = toy.gen_toy_leaky(2)
    metas = gen_random_vectors(16, "fixed", 0)
    traces = run_campaign(nl, toy.toy_stimuli(metas, 2), SimConfig(1024, 1))
    out = nl.net_index[toy.LEAK_OUT]
    for m, tr in zip(metas, traces):
        toggles = int(np.sum(tr.nets == out))
        assert toggles == 2 * ((m.plaintext[0] >> 2) & 1)


def test_bus_scenario_shape():
    sc = bus.gen_bus_interface_scenario()
    assert validate(sc.netlist) == []
    assert set(sc.watch) == {"a3_byte0", "bus_mux_byte0"}
    assert len(sc.watch_cells) == 16
    assert "unattributed" not in aes.origin_files(sc.netlist)
    cleared = bus.gen_bus_interface_scenario(clear_register=True)
    assert any("li a3, 0" in op for _, op in cleared.schedule)
    with pytest.raises(ValueError):
        bus.bus_stimulus(gen_random_vectors(1)[0], num_cycles=4)


def test_bus_delivers_plaintext_and_key_to_peripheral():
    sc = bus.gen_bus_interface_scenario()
    nl = sc.netlist
    meta = gen_random_vectors(1, "random", 3)[0]
    tr = simulate_vector(nl, sc.stimulus(meta), SimConfig(CLOCK, 1))
    # go is a one-cycle pulse: st holds pt word 0 ^ key word 0 during cycle 10 only
    vals = tr.values_at(11 * CLOCK - 1)
    words = [int.from_bytes(meta.plaintext[4 * w:4 * w + 4], "little") for w in range(4)]
    kw = int.from_bytes(meta.key[:4], "little")
    expected = words[1] ^ words[2] ^ words[3] ^ words[0] ^ kw
    got = sum(int(vals[nl.net_index[f"dout_{i}"]]) << i for i in range(32))
    assert got == expected


def test_idle_bus_has_zero_dynamic_power():
    sc = bus.gen_bus_interface_scenario()
    nl = sc.netlist
    bus_cells = [c.instance_id for c in nl.cells if c.origin and c.origin[0] == bus.BUS]
    metas = gen_random_vectors(4, "random", 1)
    idle = (9, 12)  # after the key store nothing drives the bus
    traces = run_campaign(nl, sc.stimuli(metas), SimConfig(CLOCK, 1, window_cycles=idle))
    fs = FrameSpec.from_cycles(CLOCK, 16, *idle)
    for tr in traces:
        rows = per_cell_power_trace(nl, tr, fs, bus_cells)
        # only state-dependent leakage remains, constant over the idle cycles
        assert np.all(rows == rows[:, :1])
        assert rows.max() < 0.05


def test_builder_rejects_double_drivers():
    b = NetlistBuilder()
    a = b.input("a")
    y = b.output("y")
    b.buf(a, y)
    b.inv(a, y)
    with pytest.raises(NetlistError, match="y"):
        b.build()
