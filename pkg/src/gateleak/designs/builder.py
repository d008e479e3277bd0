"""Small structural netlist builder used by the design generators."""

from __future__ import annotations

from contextlib import contextmanager
from typing import Sequence

from ..netlist import Cell, CellKind, Netlist, default_library, validate, NetlistError


class NetlistBuilder:
    """Accumulates cells with auto-numbered instance ids and nets.

    Instance ids (``g<n>``) and internal nets (``n<n>``) carry no meaning,
    like a flattened synthesized netlist; the ``origin`` context attaches a
    pseudo-RTL (file, line) to every cell created inside it.
    """

    def __init__(self, library: dict[str, CellKind] | None = None, clock: str = "clk",
                 reset: str | None = "rst"):
        self.library = library or default_library()
        self.cells: list[Cell] = []
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.loads: dict[str, float] = {}
        self.clock = clock
        self.reset = reset
        self._n = 0
        self._g = 0
        self._origin: tuple[str, int] | None = None
        self._ties: dict[int, str] = {}
        self.input(clock)
        if reset:
            self.input(reset)

    # -- naming and provenance

    def net(self) -> str:
        self._n += 1
        return f"n{self._n}"

    @contextmanager
    def origin(self, file: str, line: int):
        prev = self._origin
        self._origin = (file, line)
        try:
            yield
        finally:
            self._origin = prev

    def input(self, name: str) -> str:
        self.inputs.append(name)
        return name

    def inputs_bus(self, prefix: str, width: int) -> list[str]:
        return [self.input(f"{prefix}_{i}") for i in range(width)]

    def output(self, name: str) -> str:
        self.outputs.append(name)
        return name

    def load(self, net: str, value: float) -> None:
        self.loads[net] = value

    def cell(self, kind: str, inputs: Sequence[str], out: str | None = None) -> str:
        out = out or self.net()
        self._g += 1
        self.cells.append(Cell(f"g{self._g}", self.library[kind], tuple(inputs), out, self._origin))
        return out

    # -- gates

    def tie(self, value: int) -> str:
        if value not in self._ties:
            self._ties[value] = self.cell("TIE1" if value else "TIE0", ())
        return self._ties[value]

    def inv(self, a, out=None):
        return self.cell("INV", (a,), out)

    def buf(self, a, out=None):
        return self.cell("BUF", (a,), out)

    def and2(self, a, b, out=None):
        return self.cell("AND2", (a, b), out)

    def or2(self, a, b, out=None):
        return self.cell("OR2", (a, b), out)

    def nand2(self, a, b, out=None):
        return self.cell("NAND2", (a, b), out)

    def nor2(self, a, b, out=None):
        return self.cell("NOR2", (a, b), out)

    def xor2(self, a, b, out=None):
        return self.cell("XOR2", (a, b), out)

    def xnor2(self, a, b, out=None):
        return self.cell("XNOR2", (a, b), out)

    def mux2(self, a, b, s, out=None):
        """``s ? b : a``."""
        return self.cell("MUX2", (a, b, s), out)

    def dff(self, d, out=None):
        return self.cell("DFF", (d, self.clock), out)

    def dffe(self, d, en, out=None):
        return self.cell("DFFE", (d, en, self.clock), out)

    # -- word-level helpers

    def xor_bus(self, a: Sequence[str], b: Sequence[str]) -> list[str]:
        return [self.xor2(x, y) for x, y in zip(a, b)]

    def mux_bus(self, a: Sequence[str], b: Sequence[str], s: str) -> list[str]:
        return [self.mux2(x, y, s) for x, y in zip(a, b)]

    def and_bus(self, a: Sequence[str], en: str) -> list[str]:
        return [self.and2(x, en) for x in a]

    def dffe_bus(self, d: Sequence[str], en: str) -> list[str]:
        return [self.dffe(x, en) for x in d]

    def dff_bus(self, d: Sequence[str]) -> list[str]:
        return [self.dff(x) for x in d]

    def and_tree(self, terms: Sequence[str]) -> str:
        terms = list(terms)
        if not terms:
            return self.tie(1)
        while len(terms) > 1:
            nxt = [self.and2(terms[i], terms[i + 1]) for i in range(0, len(terms) - 1, 2)]
            if len(terms) % 2:
                nxt.append(terms[-1])
            terms = nxt
        return terms[0]

    def or_tree(self, terms: Sequence[str]) -> str:
        terms = list(terms)
        if not terms:
            return self.tie(0)
        while len(terms) > 1:
            nxt = [self.or2(terms[i], terms[i + 1]) for i in range(0, len(terms) - 1, 2)]
            if len(terms) % 2:
                nxt.append(terms[-1])
            terms = nxt
        return terms[0]

    def equals_const(self, bits: Sequence[str], value: int, inverted: Sequence[str] | None = None) -> str:
        """1 when the little-endian word ``bits`` equals ``value``."""
        inverted = inverted or [self.inv(b) for b in bits]
        return self.and_tree([bits[i] if (value >> i) & 1 else inverted[i] for i in range(len(bits))])

    def incrementer(self, bits: Sequence[str]) -> list[str]:
        out, carry = [], None
        for i, b in enumerate(bits):
            if i == 0:
                out.append(self.inv(b))
                carry = b
            else:
                out.append(self.xor2(b, carry))
                if i < len(bits) - 1:
                    carry = self.and2(b, carry)
        return out

    def adder(self, a: Sequence[str], b: Sequence[str]) -> list[str]:
        """Ripple-carry sum, carry-out dropped."""
        out, carry = [], None
        for i, (x, y) in enumerate(zip(a, b)):
            p = self.xor2(x, y)
            if carry is None:
                out.append(p)
                carry = self.and2(x, y)
            else:
                out.append(self.xor2(p, carry))
                if i < len(a) - 1:
                    carry = self.or2(self.and2(x, y), self.and2(p, carry))
        return out

    def register(self, width: int) -> tuple[list[str], callable]:
        """Forward-declared register: returns its Q nets and a ``connect(d_bits, enable=None)`` closure."""
        qs = [self.net() for _ in range(width)]
        origin = self._origin

        def connect(ds: Sequence[str], enable: str | None = None):
            prev = self._origin
            self._origin = origin
            for d, q in zip(ds, qs):
                if enable is None:
                    self.dff(d, q)
                else:
                    self.dffe(d, enable, q)
            self._origin = prev

        return qs, connect

    def build(self, check: bool = True) -> Netlist:
        nl = Netlist(tuple(self.cells), tuple(self.inputs), tuple(self.outputs), self.clock, self.reset,
                     dict(self.loads), dict(self.library))
        if check:
            diags = validate(nl)
            if diags:
                raise NetlistError("; ".join(str(d) for d in diags[:10]))
        return nl
