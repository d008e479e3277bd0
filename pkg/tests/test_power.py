import numpy as np
import pytest
from hypothesis import given

from gateleak.designs import aes
from gateleak.leakmodels import gen_random_vectors
from gateleak.logicsim import SimConfig, Stimulus, run_campaign, simulate_vector
from gateleak.netlist import parse_library, parse_netlist
from gateleak.power import (FrameSpec, PowerMatrix, average_cell_power, estimate_power, estimate_power_matrix,
                            load_power_bin, load_power_csv, mean_cell_frame_power, per_cell_power_trace,
                            save_power_bin, save_power_csv, subset_power_matrix, summarize_cell_power)

from strategies import random_netlist, random_stimulus, seeds

UNIT_LIB = parse_library("""
kind INV
  inputs A
  output Y
  function ~A
  delay 20
  internal 0
  switching 1
  default_leakage 0
end
kind BUF
  inputs A
  output Y
  function A
  delay 30
  internal 0.5
  switching 1
  leakage 0:10 1:30
end
""")

FAST = SimConfig(clock_period=1000, reset_cycles=0)


def _inv(load=2.0):
    return parse_netlist(f"input a\noutput y\nload y {load}\ncell u1 INV y a\n", UNIT_LIB)


def test_quiet_design_has_zero_power():
    nl = _inv()
    tr = simulate_vector(nl, Stimulus(0, {"a": []}, 4), FAST)
    assert np.all(estimate_power(nl, tr, FrameSpec(1000, 0, 4000)) == 0)


def test_single_output_toggle_gives_two_microwatts():
    nl = _inv()
    tr = simulate_vector(nl, Stimulus(0, {"a": [(3, 1)]}, 5), FAST)
    p = estimate_power(nl, tr, FrameSpec(1000, 0, 5000))
    assert p.tolist() == pytest.approx([0, 0, 0, 2.0, 0])


def test_static_leakage_is_integrated_by_state():
    nl = parse_netlist("input a\noutput y\ncell u1 BUF y a\n", UNIT_LIB)
    tr = simulate_vector(nl, Stimulus(0, {"a": [(1, 1)]}, 2), FAST)
    p = estimate_power(nl, tr, FrameSpec(500, 0, 2000))
    # 10 nW then 30 nW; one input toggle adds 0.5 fJ over a 500 ps frame
    assert p.tolist() == pytest.approx([0.01, 0.01, 0.03 + 1.0, 0.03])


def test_frame_window_must_be_covered():
    nl = _inv()
    tr = simulate_vector(nl, Stimulus(0, {"a": []}, 2), SimConfig(1000, 0, window_cycles=(1, 2)))
    with pytest.raises(ValueError, match="not covered"):
        estimate_power(nl, tr, FrameSpec(100, 0, 2000))


def test_frame_spec_validation():
    with pytest.raises(ValueError):
        FrameSpec(300, 0, 1000)
    with pytest.raises(ValueError):
        FrameSpec.from_cycles(1000, 3, 0, 1)
    fs = FrameSpec.from_cycles(10240, 64, 12, 20)
    assert fs.frame_width == 160 and fs.num_frames == 512
    assert fs.frame_of(12 * 10240 + 161) == 1


@given(seeds)
def test_per_cell_rows_sum_to_total(seed):
    rng = np.random.default_rng(seed)
    nl = random_netlist(rng, n_cells=14)
    tr = simulate_vector(nl, random_stimulus(rng, nl, 0), FAST)
    fs = FrameSpec(125, 0, 4000)
    rows = per_cell_power_trace(nl, tr, fs)
    total = estimate_power(nl, tr, fs)
    np.testing.assert_allclose(rows.sum(axis=0), total, rtol=1e-9, atol=1e-12)


@given(seeds)
def test_coarse_frames_average_fine_frames(seed):
    rng = np.random.default_rng(seed)
    nl = random_netlist(rng, n_cells=14)
    tr = simulate_vector(nl, random_stimulus(rng, nl, 0), FAST)
    fine = FrameSpec(125, 0, 4000)
    p_fine = estimate_power(nl, tr, fine)
    for ratio in (2, 8, 32):
        p_coarse = estimate_power(nl, tr, fine.coarsen(ratio))
        np.testing.assert_allclose(p_coarse, p_fine.reshape(-1, ratio).mean(axis=1), rtol=1e-9, atol=1e-12)


def test_single_cell_row_equals_total():
    nl = _inv()
    tr = simulate_vector(nl, Stimulus(0, {"a": [(1, 1), (2, 0)]}, 3), FAST)
    fs = FrameSpec(100, 0, 3000)
    np.testing.assert_array_equal(per_cell_power_trace(nl, tr, fs)[0], estimate_power(nl, tr, fs))


def test_power_increases_with_load():
    tr_args = (Stimulus(0, {"a": [(1, 1)]}, 2), FAST)
    fs = FrameSpec(1000, 0, 2000)
    light = estimate_power(_inv(1.0), simulate_vector(_inv(1.0), *tr_args), fs)
    heavy = estimate_power(_inv(5.0), simulate_vector(_inv(5.0), *tr_args), fs)
    assert heavy[1] > light[1] and heavy[0] == light[0]


def test_matrix_of_one_trace_equals_estimate():
    nl = _inv()
    tr = simulate_vector(nl, Stimulus(4, {"a": [(1, 1)]}, 2), FAST)
    fs = FrameSpec(250, 0, 2000)
    pm = estimate_power_matrix(nl, [tr], fs)
    assert pm.shape == (1, 8)
    assert pm.vector_ids.tolist() == [4]
    np.testing.assert_array_equal(pm.values[0], estimate_power(nl, tr, fs))


def test_uniform_single_cell_carries_all_power():
    nl = _inv()
    traces = run_campaign(nl, [Stimulus(v, {"a": [(1, 1)]}, 2) for v in range(3)], FAST)
    cp = average_cell_power(nl, traces, FrameSpec(1000, 0, 2000))
    assert cp.of("u1") == pytest.approx(cp.total)


def test_identical_cells_get_equal_power():
    nl = parse_netlist("input a\noutput y\noutput z\ncell u1 INV y a\ncell u2 INV z a\n", UNIT_LIB)
    traces = run_campaign(nl, [Stimulus(0, {"a": [(1, 1)]}, 2)], FAST)
    cp = average_cell_power(nl, traces, FrameSpec(1000, 0, 2000))
    assert cp.of("u1") == cp.of("u2")


def test_cell_power_frame_selection():
    nl = _inv()
    traces = run_campaign(nl, [Stimulus(0, {"a": [(1, 1)]}, 2)], FAST)
    fs = FrameSpec(1000, 0, 2000)
    assert average_cell_power(nl, traces, fs, [1]).of("u1") == pytest.approx(2.0)
    assert average_cell_power(nl, traces, fs, [0]).of("u1") == 0.0
    with pytest.raises(ValueError, match="empty frame set"):
        average_cell_power(nl, traces, fs, [])
    with pytest.raises(ValueError, match="out of range"):
        summarize_cell_power(nl, np.zeros((1, 2)), [5])


def test_subset_matrix_matches_per_cell_rows():
    rng = np.random.default_rng(9)
    nl = random_netlist(rng, n_cells=12)
    traces = [simulate_vector(nl, random_stimulus(rng, nl, v), FAST) for v in range(3)]
    fs = FrameSpec(250, 0, 4000)
    ids = [c.instance_id for c in nl.cells]
    sets = [ids[:3], ids[2:6], []]
    out = subset_power_matrix(nl, traces, fs, sets)
    for v, tr in enumerate(traces):
        rows = per_cell_power_trace(nl, tr, fs)
        np.testing.assert_allclose(out[0, v], rows[:3].sum(axis=0), rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(out[1, v], rows[2:6].sum(axis=0), rtol=1e-12, atol=1e-15)
        assert not out[2, v].any()


def test_mean_cell_frame_power_matches_rows():
    rng = np.random.default_rng(2)
    nl = random_netlist(rng, n_cells=12)
    traces = [simulate_vector(nl, random_stimulus(rng, nl, v), FAST) for v in range(4)]
    fs = FrameSpec(500, 0, 4000)
    expected = np.mean([per_cell_power_trace(nl, tr, fs) for tr in traces], axis=0)
    np.testing.assert_allclose(mean_cell_frame_power(nl, traces, fs), expected, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(mean_cell_frame_power(nl, traces, fs, jobs=3), expected, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("save,load", [(save_power_csv, load_power_csv), (save_power_bin, load_power_bin)])
def test_power_matrix_persistence(tmp_path, save, load):
    rng = np.random.default_rng(0)
    pm = PowerMatrix(rng.random((3, 5)) * 1e3, FrameSpec(10, 100, 150), [7, 8, 9])
    path = tmp_path / "p"
    save(pm, path)
    back = load(path)
    np.testing.assert_array_equal(back.values, pm.values)
    assert back.frame_spec == pm.frame_spec
    assert back.vector_ids.tolist() == [7, 8, 9]


def test_power_matrix_shape_check():
    with pytest.raises(ValueError, match="does not match"):
        PowerMatrix(np.zeros((2, 3)), FrameSpec(10, 0, 40), [0, 1])


@pytest.fixture(scope="module")
def aes_settling(aes4):
    camp = aes.AesCampaign()
    metas = gen_random_vectors(8, "fixed", 11)
    traces = run_campaign(aes4, aes.aes_stimuli(metas, camp.num_cycles),
                          SimConfig(camp.clock_period, 1, window_cycles=camp.window))
    fs = FrameSpec.from_cycles(camp.clock_period, 64, *camp.window)
    return traces, fs


def test_aes_power_matrix_has_per_cycle_peaks(aes4, aes_settling):
    traces, fs = aes_settling
    pm = estimate_power_matrix(aes4, traces, fs)
    assert pm.shape == (8, 512)
    mean = pm.values.mean(axis=0).reshape(-1, 64)
    # the clock-edge frame or its neighbour carries the peak of each busy cycle
    for cyc in range(3):
        assert int(np.argmax(mean[cyc])) < 8
        assert mean[cyc].max() > 5 * np.median(mean[cyc])


def test_aes_sbox_cells_dominate_registers_while_settling(aes4, aes_settling):
    """Between clock edges, S-box logic outweighs every register of the design.

    The first window cycle is skipped: the last key-expansion write lands on it.
    """
    traces, fs = aes_settling
    frame_power = mean_cell_frame_power(aes4, traces, fs)
    settling = [64 * cyc + f for cyc in range(1, 8) for f in range(1, 32)]
    cp = summarize_cell_power(aes4, frame_power, settling)
    sbox = set(aes.sbox_cells(aes4))
    regs = {c.instance_id for c in aes4.cells if c.is_sequential}
    p = cp.as_dict()
    assert sum(p[c] for c in sbox) > 3 * sum(p[c] for c in regs)
