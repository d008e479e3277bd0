import numpy as np
import pytest
from hypothesis import given

from gateleak.designs import gen_bus_interface_scenario, gen_toy_leaky
from gateleak.netlist import (Cell, Netlist, NetlistError, default_library, format_library, format_netlist,
                              parse_library, parse_netlist, structurally_equal, truth_table, validate)

from strategies import random_netlist, seeds

INV_DESIGN = """
# one inverter
input a
output y
cell u1 INV y a
"""


def test_single_inverter_design():
    nl = parse_netlist(INV_DESIGN)
    assert len(nl.cells) == 1
    assert len(nl.nets) == 2
    assert nl.driver_of("y").instance_id == "u1"
    assert nl.net_by_name["a"].fanout == (("u1", 0),)


def test_multiply_driven_net_is_named():
    text = "input a\noutput n3\ncell u1 INV n3 a\ncell u2 BUF n3 a\n"
    with pytest.raises(NetlistError, match="n3") as exc:
        parse_netlist(text)
    assert exc.value.line == 4


def test_unknown_kind_and_syntax_errors_carry_line_numbers():
    with pytest.raises(NetlistError, match="unknown cell kind") as exc:
        parse_netlist("input a\ncell u1 FOO y a\n")
    assert exc.value.line == 2
    with pytest.raises(NetlistError, match="unknown statement") as exc:
        parse_netlist("input a\nwire y\n")
    assert exc.value.line == 2
    with pytest.raises(NetlistError, match="bad origin"):
        parse_netlist("input a\noutput y\ncell u1 INV y a @ nowhere\n")


def test_undriven_net_reported():
    with pytest.raises(NetlistError, match="no driver"):
        parse_netlist("input a\noutput y\ncell u1 AND2 y a q\n")


def test_combinational_cycle_lists_cells():
    text = "input a\noutput y\ncell u1 NAND2 y a z\ncell u2 INV z y\n"
    nl = parse_netlist(text, check=False)
    diags = validate(nl)
    cyc = [d for d in diags if d.code == "comb-cycle"]
    assert len(cyc) == 1
    assert set(cyc[0].subjects) >= {"u1", "u2"}
    with pytest.raises(NetlistError, match="combinational cycle"):
        parse_netlist(text)


def test_self_loop_nand():
    nl = parse_netlist("input a\noutput y\ncell u1 NAND2 y a y\n", check=False)
    assert any(d.code == "comb-cycle" for d in validate(nl))


def test_cycle_through_register_is_legal():
    text = "clock clk\noutput q\ncell r1 DFF q d clk\ncell u1 INV d q\n"
    nl = parse_netlist(text)
    assert validate(nl) == []


def test_negative_wire_load_diagnostic():
    nl = parse_netlist("input a\noutput y\nload y -1.5\ncell u1 INV y a\n", check=False)
    assert [d.code for d in validate(nl)] == ["negative-load"]


def test_net_load_is_pin_capacitance_plus_wire_load():
    lib = default_library()
    nl = parse_netlist("input a\noutput y\nload a 2.5\ncell u1 INV y a\ncell u2 NAND2 z a a\noutput z\n")
    expected = lib["INV"].capacitance[0] + 2 * lib["NAND2"].capacitance[0] + 2.5
    assert nl.net_by_name["a"].load == pytest.approx(expected)
    assert nl.net_by_name["y"].load == 0.0


def test_truth_tables():
    assert truth_table("~(A & B)", ("A", "B")) == 0b0111
    assert truth_table("A ^ B", ("A", "B")) == 0b0110
    assert truth_table("S & B | ~S & A", ("A", "B", "S")) == sum(
        1 << s for s in range(8) if ((s >> 2) & 1 and (s >> 1) & 1) or (not (s >> 2) & 1 and s & 1))


def test_library_round_trip():
    lib = default_library()
    again = parse_library(format_library(lib))
    assert {k: v.to_text() for k, v in again.items()} == {k: v.to_text() for k, v in lib.items()}
    assert {"INV", "BUF", "NAND2", "NAND3", "NOR2", "AND2", "OR2", "XOR2", "XNOR2", "MUX2", "DFF", "DFFE",
            "TIE0", "TIE1"} <= set(lib)


def test_library_rejects_missing_leakage():
    bad = "kind X\n  inputs A B\n  output Y\n  function A & B\n  delay 10\n  internal 0.1\n  switching 0.1\n" \
          "  leakage 00:1\nend\n"
    with pytest.raises(NetlistError, match="leakage"):
        parse_library(bad)


def test_library_rejects_negative_energy():
    bad = "kind X\n  inputs A\n  output Y\n  function ~A\n  delay 10\n  internal -0.1\n  switching 0.1\n" \
          "  default_leakage 1\nend\n"
    with pytest.raises(NetlistError, match=">= 0"):
        parse_library(bad)


def test_generated_aes_round_trip(aes4):
    text = format_netlist(aes4)
    again = parse_netlist(text)
    assert structurally_equal(aes4, again)
    assert format_netlist(again) == text


def test_structural_equality_detects_rewiring():
    a = parse_netlist("input a\ninput b\noutput y\ncell u1 AND2 y a b\n")
    b = parse_netlist("input a\ninput b\noutput y\ncell u1 AND2 y b b\n")
    assert not structurally_equal(a, b)
    renamed = parse_netlist("input p\ninput q\noutput r\ncell u1 AND2 r p q\n")
    assert structurally_equal(a, renamed)


@pytest.mark.parametrize("make", [lambda: gen_toy_leaky(3)[0], lambda: gen_toy_leaky(0, True)[0],
                                  lambda: gen_bus_interface_scenario().netlist])
def test_generators_validate(make):
    assert validate(make()) == []


def test_aes_generators_validate(aes4, aes16):
    assert validate(aes4) == []
    assert validate(aes16) == []


@given(seeds)
def test_random_round_trip_is_isomorphic(seed):
    nl = random_netlist(np.random.default_rng(seed), n_cells=12)
    again = parse_netlist(format_netlist(nl))
    assert structurally_equal(nl, again)


@given(seeds)
def test_each_net_has_one_driver(seed):
    nl = random_netlist(np.random.default_rng(seed), n_cells=15)
    outs = [c.output for c in nl.cells]
    assert len(outs) == len(set(outs))
    assert not set(outs) & set(nl.primary_inputs)


def test_duplicate_instance_ids():
    lib = default_library()
    cells = (Cell("u1", lib["INV"], ("a",), "y"), Cell("u1", lib["INV"], ("y",), "z"))
    nl = Netlist(cells, ("a",), ("z",), cell_library=lib)
    assert [d.code for d in validate(nl)] == ["duplicate-instance"]
