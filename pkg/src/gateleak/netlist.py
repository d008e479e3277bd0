"""Structural gate-level netlists, cell libraries and their text formats.

A netlist is a flat list of cell instances connected by named nets. Every net
is driven by exactly one cell output or is a primary input; constant nets are
driven by 0-input TIE cells. Sequential cells share a single ideal clock net.

Netlist text format (whitespace-insensitive, ``#`` starts a comment)::

    input <net>
    output <net>
    clock <net>
    reset <net>
    load <net> <wire load>
    cell <instance> <kind> <out net> <in net>... [@ <file>:<line>]

Library text format: one ``kind ... end`` record per cell kind, see
``data/synth12.lib`` for the bundled library.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

MAX_INPUTS = 6
SEQUENTIAL_FUNCTIONS = {"dff": ("D", "CLK"), "dffe": ("D", "EN", "CLK")}

# cell-class codes used by the compiled representation
COMB, DFF, DFFE, CONST = 0, 1, 2, 3


class NetlistError(ValueError):
    """Raised for malformed netlist or library text and invalid designs."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    subjects: tuple[str, ...] = ()

    def __str__(self):
        return f"[{self.code}] {self.message}"


# ---------------------------------------------------------------------------
# Boolean expressions

_ALLOWED_BINOPS = {ast.BitAnd: np.bitwise_and, ast.BitOr: np.bitwise_or, ast.BitXor: np.bitwise_xor}


def _eval_expr(node, env):
    if isinstance(node, ast.Expression):
        return _eval_expr(node.body, env)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise NetlistError(f"unknown pin {node.id!r} in function")
        return env[node.id]
    if isinstance(node, ast.Constant) and node.value in (0, 1):
        return int(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.Invert, ast.Not)):
        return 1 - _eval_expr(node.operand, env)
    if isinstance(node, ast.BinOp) and type(node.op) in _ALLOWED_BINOPS:
        return _ALLOWED_BINOPS[type(node.op)](_eval_expr(node.left, env), _eval_expr(node.right, env))
    raise NetlistError(f"unsupported construct in function: {ast.dump(node)}")


def truth_table(expr: str, pins: tuple[str, ...]) -> int:
    """Truth table of ``expr`` as an integer bitmask.

    Bit ``s`` of the result is the output for input state ``s``, where pin ``k``
    contributes ``value << k`` to the state index.
    """
    tree = ast.parse(expr, mode="eval")
    tt = 0
    for s in range(1 << len(pins)):
        env = {p: (s >> k) & 1 for k, p in enumerate(pins)}
        if int(_eval_expr(tree, env)) & 1:
            tt |= 1 << s
    return tt


# ---------------------------------------------------------------------------
# Cell library


@dataclass(frozen=True)
class CellKind:
    name: str
    inputs: tuple[str, ...]
    output: str
    function: str
    delay: int
    internal_energy: float
    switching_energy: float
    capacitance: tuple[float, ...] = ()
    leakage: dict[int, float] = field(default_factory=dict)
    default_leakage: float | None = None

    def __post_init__(self):
        n = len(self.inputs)
        if n > MAX_INPUTS:
            raise NetlistError(f"kind {self.name}: at most {MAX_INPUTS} inputs supported")
        if len(set(self.inputs)) != n:
            raise NetlistError(f"kind {self.name}: duplicate pin names")
        if self.function in SEQUENTIAL_FUNCTIONS:
            if self.inputs != SEQUENTIAL_FUNCTIONS[self.function]:
                raise NetlistError(
                    f"kind {self.name}: {self.function} pins must be {SEQUENTIAL_FUNCTIONS[self.function]}")
        elif n == 0 and self.function.strip() not in ("0", "1"):
            raise NetlistError(f"kind {self.name}: 0-input kinds must be constant drivers")
        if not self.capacitance:
            object.__setattr__(self, "capacitance", (1.0,) * n)
        elif len(self.capacitance) == 1 and n > 1:
            object.__setattr__(self, "capacitance", tuple(self.capacitance) * n)
        if len(self.capacitance) != n:
            raise NetlistError(f"kind {self.name}: capacitance needs one value per input pin")
        if self.delay <= 0 or self.delay != int(self.delay):
            raise NetlistError(f"kind {self.name}: delay must be a positive integer (ps)")
        values = [self.internal_energy, self.switching_energy, *self.capacitance, *self.leakage.values()]
        if self.default_leakage is not None:
            values.append(self.default_leakage)
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise NetlistError(f"kind {self.name}: energies, capacitances and leakage must be >= 0")
        missing = [s for s in range(1 << n) if s not in self.leakage]
        if missing and self.default_leakage is None:
            raise NetlistError(f"kind {self.name}: leakage missing for {len(missing)} input states and no default")
        # validates the expression eagerly
        _ = self.truth_table

    @property
    def is_sequential(self) -> bool:
        return self.function in SEQUENTIAL_FUNCTIONS

    @property
    def cell_class(self) -> int:
        if self.function == "dff":
            return DFF
        if self.function == "dffe":
            return DFFE
        return CONST if not self.inputs else COMB

    @cached_property
    def truth_table(self) -> int:
        if self.is_sequential:
            return 0
        return truth_table(self.function, self.inputs)

    def leakage_for(self, state: int) -> float:
        if state in self.leakage:
            return self.leakage[state]
        return float(self.default_leakage)

    def to_text(self) -> str:
        lines = [f"kind {self.name}", "  inputs " + " ".join(self.inputs), f"  output {self.output}",
                 f"  function {self.function}", f"  delay {self.delay}"]
        if self.inputs:
            lines.append("  capacitance " + " ".join(repr(c) for c in self.capacitance))
        lines.append(f"  internal {self.internal_energy!r}")
        lines.append(f"  switching {self.switching_energy!r}")
        if self.leakage:
            n = len(self.inputs)
            items = []
            for s in sorted(self.leakage):
                key = "".join(str((s >> k) & 1) for k in range(n))
                items.append(f"{key}:{self.leakage[s]!r}")
            lines.append("  leakage " + " ".join(items))
        if self.default_leakage is not None:
            lines.append(f"  default_leakage {self.default_leakage!r}")
        lines.append("end")
        return "\n".join(lines)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_library(text: str) -> dict[str, CellKind]:
    """Parse library text into a name -> CellKind mapping."""
    library: dict[str, CellKind] = {}
    record: dict | None = None
    start = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "kind":
            if record is not None:
                raise NetlistError("nested kind record (missing 'end')", lineno)
            if not rest:
                raise NetlistError("kind without a name", lineno)
            record, start = {"name": rest}, lineno
        elif record is None:
            raise NetlistError(f"field {key!r} outside of a kind record", lineno)
        elif key == "end":
            try:
                kind = _kind_from_record(record)
            except NetlistError as exc:
                raise NetlistError(str(exc), start) from None
            if kind.name in library:
                raise NetlistError(f"duplicate kind {kind.name}", start)
            library[kind.name] = kind
            record = None
        else:
            record[key] = rest
            record.setdefault("_lines", {})[key] = lineno
    if record is not None:
        raise NetlistError("unterminated kind record", start)
    return library


def _kind_from_record(rec: dict) -> CellKind:
    def number(key, conv=float, default=None):
        if key not in rec:
            if default is not None:
                return default
            raise NetlistError(f"kind {rec['name']}: missing field {key!r}")
        try:
            return conv(rec[key])
        except ValueError:
            raise NetlistError(f"kind {rec['name']}: bad value for {key!r}") from None

    inputs = tuple(rec.get("inputs", "").split())
    leakage = {}
    for item in rec.get("leakage", "").split():
        bits, _, value = item.partition(":")
        if len(bits) != len(inputs) or set(bits) - {"0", "1"}:
            raise NetlistError(f"kind {rec['name']}: bad leakage key {bits!r}")
        state = sum(int(b) << k for k, b in enumerate(bits))
        leakage[state] = float(value)
    default = float(rec["default_leakage"]) if "default_leakage" in rec else None
    caps = tuple(float(c) for c in rec.get("capacitance", "").split())
    if "output" not in rec or "function" not in rec:
        raise NetlistError(f"kind {rec['name']}: output and function are required")
    return CellKind(
        name=rec["name"], inputs=inputs, output=rec["output"], function=rec["function"],
        delay=number("delay", int), internal_energy=number("internal"),
        switching_energy=number("switching"), capacitance=caps, leakage=leakage,
        default_leakage=default,
    )


def format_library(library: dict[str, CellKind]) -> str:
    return "\n\n".join(k.to_text() for k in library.values()) + "\n"


def default_library() -> dict[str, CellKind]:
    """The bundled synthetic library (INV, BUF, NAND2/3, NOR2, AND2, OR2, XOR2, XNOR2, MUX2, DFF, DFFE, TIE0/1)."""
    text = resources.files("gateleak").joinpath("data/synth12.lib").read_text()
    return parse_library(text)


# ---------------------------------------------------------------------------
# Netlist


@dataclass(frozen=True)
class Cell:
    instance_id: str
    kind: CellKind
    inputs: tuple[str, ...]
    output: str
    origin: tuple[str, int] | None = None

    @property
    def is_sequential(self) -> bool:
        return self.kind.is_sequential


@dataclass(frozen=True)
class Net:
    name: str
    driver: str | None
    fanout: tuple[tuple[str, int], ...]
    load: float


@dataclass(frozen=True, eq=False)
class Netlist:
    """A flat gate-level design. Treat as immutable once built."""

    cells: tuple[Cell, ...]
    primary_inputs: tuple[str, ...]
    primary_outputs: tuple[str, ...] = ()
    clock_net: str | None = None
    reset_net: str | None = None
    wire_loads: dict[str, float] = field(default_factory=dict)
    cell_library: dict[str, CellKind] = field(default_factory=dict)

    @cached_property
    def cell_by_id(self) -> dict[str, Cell]:
        return {c.instance_id: c for c in self.cells}

    @cached_property
    def net_names(self) -> tuple[str, ...]:
        """Net order: primary inputs, then cell outputs, then any dangling names."""
        seen: dict[str, None] = {}
        for n in self.primary_inputs:
            seen.setdefault(n)
        for c in self.cells:
            seen.setdefault(c.output)
        for c in self.cells:
            for n in c.inputs:
                seen.setdefault(n)
        for n in self.primary_outputs:
            seen.setdefault(n)
        return tuple(seen)

    @cached_property
    def net_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.net_names)}

    @cached_property
    def nets(self) -> tuple[Net, ...]:
        drivers: dict[str, str] = {}
        fanout: dict[str, list] = {n: [] for n in self.net_names}
        load = dict.fromkeys(self.net_names, 0.0)
        for c in self.cells:
            drivers.setdefault(c.output, c.instance_id)
            for k, n in enumerate(c.inputs):
                fanout[n].append((c.instance_id, k))
                load[n] += c.kind.capacitance[k]
        for n, w in self.wire_loads.items():
            if n in load:
                load[n] += w
        return tuple(Net(n, drivers.get(n), tuple(fanout[n]), load[n]) for n in self.net_names)

    @cached_property
    def net_by_name(self) -> dict[str, Net]:
        return {n.name: n for n in self.nets}

    def driver_of(self, net: str) -> Cell | None:
        d = self.net_by_name[net].driver
        return None if d is None else self.cell_by_id[d]

    @cached_property
    def compiled(self) -> "CompiledNetlist":
        return CompiledNetlist.build(self)

    def __len__(self):
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class CompiledNetlist:
    """Array form of a validated netlist, shared read-only by the kernels."""

    n_nets: int
    n_cells: int
    cell_class: np.ndarray
    cell_out: np.ndarray
    cell_nin: np.ndarray
    cell_in: np.ndarray
    cell_delay: np.ndarray
    cell_tt: np.ndarray
    cell_internal: np.ndarray
    cell_switching: np.ndarray
    cell_leak: np.ndarray
    fan_ptr: np.ndarray
    fan_cell: np.ndarray
    fan_pin: np.ndarray
    driver: np.ndarray
    net_load: np.ndarray
    topo: np.ndarray
    clock: int
    reset: int

    @classmethod
    def build(cls, nl: Netlist) -> "CompiledNetlist":
        idx = nl.net_index
        n_cells, n_nets = len(nl.cells), len(nl.net_names)
        cell_class = np.zeros(n_cells, np.int8)
        cell_out = np.zeros(n_cells, np.int32)
        cell_nin = np.zeros(n_cells, np.int8)
        cell_in = np.full((n_cells, MAX_INPUTS), -1, np.int32)
        cell_delay = np.zeros(n_cells, np.int64)
        cell_tt = np.zeros(n_cells, np.int64)
        cell_internal = np.zeros(n_cells)
        cell_switching = np.zeros(n_cells)
        cell_leak = np.zeros((n_cells, 1 << MAX_INPUTS))
        leak_cache: dict[str, np.ndarray] = {}
        for i, c in enumerate(nl.cells):
            k = c.kind
            cell_class[i] = k.cell_class
            cell_out[i] = idx[c.output]
            cell_nin[i] = len(c.inputs)
            cell_in[i, : len(c.inputs)] = [idx[n] for n in c.inputs]
            cell_delay[i] = k.delay
            cell_tt[i] = k.truth_table
            cell_internal[i] = k.internal_energy
            cell_switching[i] = k.switching_energy
            if k.name not in leak_cache:
                row = np.zeros(1 << MAX_INPUTS)
                row[: 1 << len(k.inputs)] = [k.leakage_for(s) for s in range(1 << len(k.inputs))]
                leak_cache[k.name] = row
            cell_leak[i] = leak_cache[k.name]
        counts = np.zeros(n_nets + 1, np.int64)
        for c in nl.cells:
            for n in c.inputs:
                counts[idx[n] + 1] += 1
        fan_ptr = np.cumsum(counts).astype(np.int64)
        fill = fan_ptr[:-1].copy()
        fan_cell = np.zeros(fan_ptr[-1], np.int32)
        fan_pin = np.zeros(fan_ptr[-1], np.int32)
        for i, c in enumerate(nl.cells):
            for k, n in enumerate(c.inputs):
                j = idx[n]
                fan_cell[fill[j]] = i
                fan_pin[fill[j]] = k
                fill[j] += 1
        driver = np.full(n_nets, -1, np.int32)
        for i, c in enumerate(nl.cells):
            driver[idx[c.output]] = i
        net_load = np.array([n.load for n in nl.nets])
        topo = np.array(_comb_topo_order(nl), np.int32)
        return cls(
            n_nets=n_nets, n_cells=n_cells, cell_class=cell_class, cell_out=cell_out, cell_nin=cell_nin,
            cell_in=cell_in, cell_delay=cell_delay, cell_tt=cell_tt, cell_internal=cell_internal,
            cell_switching=cell_switching, cell_leak=cell_leak, fan_ptr=fan_ptr, fan_cell=fan_cell,
            fan_pin=fan_pin, driver=driver, net_load=net_load, topo=topo,
            clock=idx[nl.clock_net] if nl.clock_net else -1,
            reset=idx[nl.reset_net] if nl.reset_net else -1,
        )


def _comb_topo_order(nl: Netlist) -> list[int]:
    """Indices of constant and combinational cells in evaluation order (Kahn)."""
    comb = [i for i, c in enumerate(nl.cells) if not c.is_sequential]
    driver = {c.output: i for i, c in enumerate(nl.cells) if not c.is_sequential}
    indeg = {i: 0 for i in comb}
    succ: dict[int, list[int]] = {i: [] for i in comb}
    for i in comb:
        for n in nl.cells[i].inputs:
            d = driver.get(n)
            if d is not None:
                indeg[i] += 1
                succ[d].append(i)
    ready = [i for i in comb if indeg[i] == 0]
    order = []
    while ready:
        i = ready.pop()
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    return order


# ---------------------------------------------------------------------------
# Validation


def _find_comb_cycle(nl: Netlist) -> list[str] | None:
    driver = {c.output: c for c in nl.cells if not c.is_sequential}
    color: dict[str, int] = {}
    for start in nl.cells:
        if start.is_sequential or start.instance_id in color:
            continue
        # iterative DFS over combinational predecessors
        stack = [(start, iter(start.inputs))]
        path = [start.instance_id]
        color[start.instance_id] = 1
        while stack:
            cell, it = stack[-1]
            advanced = False
            for n in it:
                pred = driver.get(n)
                if pred is None:
                    continue
                st = color.get(pred.instance_id, 0)
                if st == 1:
                    k = path.index(pred.instance_id)
                    return path[k:]
                if st == 0:
                    color[pred.instance_id] = 1
                    path.append(pred.instance_id)
                    stack.append((pred, iter(pred.inputs)))
                    advanced = True
                    break
            if not advanced:
                color[cell.instance_id] = 2
                path.pop()
                stack.pop()
    return None


def validate(nl: Netlist) -> list[Diagnostic]:
    """Check the structural invariants; returns one diagnostic per violation."""
    diags: list[Diagnostic] = []
    seen_ids: set[str] = set()
    for c in nl.cells:
        if c.instance_id in seen_ids:
            diags.append(Diagnostic("duplicate-instance", f"instance id {c.instance_id} used twice", (c.instance_id,)))
        seen_ids.add(c.instance_id)
        if nl.cell_library and c.kind.name not in nl.cell_library:
            diags.append(Diagnostic("unknown-kind", f"cell {c.instance_id}: kind {c.kind.name} not in library",
                                    (c.instance_id,)))
        if len(c.inputs) != len(c.kind.inputs):
            diags.append(Diagnostic("pin-count", f"cell {c.instance_id}: {c.kind.name} expects "
                                    f"{len(c.kind.inputs)} inputs, got {len(c.inputs)}", (c.instance_id,)))
        if c.is_sequential and len(c.inputs) == len(c.kind.inputs) and c.inputs[-1] != nl.clock_net:
            diags.append(Diagnostic("clock-pin", f"cell {c.instance_id}: CLK pin must connect to the clock net",
                                    (c.instance_id,)))

    pis = set(nl.primary_inputs)
    if len(pis) != len(nl.primary_inputs):
        diags.append(Diagnostic("duplicate-input", "primary input declared twice"))
    for special, name in (("clock", nl.clock_net), ("reset", nl.reset_net)):
        if name is not None and name not in pis:
            diags.append(Diagnostic(f"{special}-not-input", f"{special} net {name} is not a primary input", (name,)))

    drivers: dict[str, list[str]] = {}
    for c in nl.cells:
        drivers.setdefault(c.output, []).append(c.instance_id)
    for net, ds in drivers.items():
        if len(ds) > 1 or net in pis:
            who = ds + (["<primary input>"] if net in pis else [])
            diags.append(Diagnostic("multiply-driven", f"net {net} has {len(who)} drivers: {', '.join(who)}", (net,)))
    used = {n for c in nl.cells for n in c.inputs} | set(nl.primary_outputs)
    for net in sorted(used - pis - set(drivers)):
        diags.append(Diagnostic("undriven", f"net {net} has no driver", (net,)))

    known = set(nl.net_names)
    for net, w in nl.wire_loads.items():
        if net not in known:
            diags.append(Diagnostic("unknown-net", f"load declared for unknown net {net}", (net,)))
        elif not (w >= 0 and math.isfinite(w)):
            diags.append(Diagnostic("negative-load", f"net {net} has invalid wire load {w}", (net,)))

    cycle = _find_comb_cycle(nl)
    if cycle:
        diags.append(Diagnostic("comb-cycle", "combinational cycle through " + " -> ".join(cycle), tuple(cycle)))
    return diags


# ---------------------------------------------------------------------------
# Text format


def parse_netlist(text: str, library: dict[str, CellKind] | None = None, check: bool = True) -> Netlist:
    """Parse netlist text. With ``check`` the design invariants must hold."""
    if library is None:
        library = default_library()
    inputs: list[str] = []
    outputs: list[str] = []
    clock = reset = None
    loads: dict[str, float] = {}
    cells: list[Cell] = []
    driver_line: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        origin = None
        if "@" in line:
            line, _, tag = line.partition("@")
            line = line.strip()
            fname, sep, ln = tag.strip().rpartition(":")
            if not sep or not fname or not ln.isdigit():
                raise NetlistError(f"bad origin tag {tag.strip()!r} (expected file:line)", lineno)
            origin = (fname, int(ln))
        tok = line.split()
        key = tok[0]
        if key in ("input", "output", "clock", "reset"):
            if len(tok) != 2:
                raise NetlistError(f"{key} takes exactly one net name", lineno)
            if key == "input":
                inputs.append(tok[1])
            elif key == "output":
                outputs.append(tok[1])
            elif key == "clock":
                clock = tok[1]
                if tok[1] not in inputs:
                    inputs.append(tok[1])
            else:
                reset = tok[1]
                if tok[1] not in inputs:
                    inputs.append(tok[1])
        elif key == "load":
            if len(tok) != 3:
                raise NetlistError("load takes a net name and a value", lineno)
            try:
                loads[tok[1]] = float(tok[2])
            except ValueError:
                raise NetlistError(f"bad load value {tok[2]!r}", lineno) from None
        elif key == "cell":
            if len(tok) < 4:
                raise NetlistError("cell needs an instance id, a kind and an output net", lineno)
            inst, kind_name, out, ins = tok[1], tok[2], tok[3], tuple(tok[4:])
            kind = library.get(kind_name)
            if kind is None:
                raise NetlistError(f"unknown cell kind {kind_name!r}", lineno)
            if len(ins) != len(kind.inputs):
                raise NetlistError(f"{kind_name} expects {len(kind.inputs)} inputs, got {len(ins)}", lineno)
            if out in driver_line:
                raise NetlistError(f"net {out} is multiply driven (first driver on line {driver_line[out]})", lineno)
            driver_line[out] = lineno
            cells.append(Cell(inst, kind, ins, out, origin))
        else:
            raise NetlistError(f"unknown statement {key!r}", lineno)
    nl = Netlist(tuple(cells), tuple(inputs), tuple(outputs), clock, reset, loads, dict(library))
    if check:
        diags = validate(nl)
        if diags:
            raise NetlistError("; ".join(str(d) for d in diags))
    return nl


def format_netlist(nl: Netlist) -> str:
    out = []
    for n in nl.primary_inputs:
        if n == nl.clock_net:
            out.append(f"clock {n}")
        elif n == nl.reset_net:
            out.append(f"reset {n}")
        else:
            out.append(f"input {n}")
    out.extend(f"output {n}" for n in nl.primary_outputs)
    out.extend(f"load {n} {w!r}" for n, w in nl.wire_loads.items())
    for c in nl.cells:
        line = f"cell {c.instance_id} {c.kind.name} {c.output} {' '.join(c.inputs)}".rstrip()
        if c.origin is not None:
            line += f" @ {c.origin[0]}:{c.origin[1]}"
        out.append(line)
    return "\n".join(out) + "\n"


def structurally_equal(a: Netlist, b: Netlist) -> bool:
    """Isomorphism check under net renaming: cell ids, kinds, attributes and connectivity."""
    if len(a.cells) != len(b.cells):
        return False
    mapping: dict[str, str] = {}

    def same(x: str, y: str) -> bool:
        if x in mapping:
            return mapping[x] == y
        if y in mapping.values():
            return False
        mapping[x] = y
        return True

    for pa, pb in ((a.primary_inputs, b.primary_inputs), (a.primary_outputs, b.primary_outputs)):
        if len(pa) != len(pb) or not all(same(x, y) for x, y in zip(pa, pb)):
            return False
    if (a.clock_net is None) != (b.clock_net is None) or (a.clock_net and not same(a.clock_net, b.clock_net)):
        return False
    if (a.reset_net is None) != (b.reset_net is None) or (a.reset_net and not same(a.reset_net, b.reset_net)):
        return False
    bcells = b.cell_by_id
    for ca in a.cells:
        cb = bcells.get(ca.instance_id)
        if cb is None or ca.kind.name != cb.kind.name or ca.origin != cb.origin:
            return False
        if ca.kind.to_text() != cb.kind.to_text():
            return False
        if not same(ca.output, cb.output) or len(ca.inputs) != len(cb.inputs):
            return False
        if not all(same(x, y) for x, y in zip(ca.inputs, cb.inputs)):
            return False
    la = {mapping.get(k, k): v for k, v in a.wire_loads.items()}
    return la == dict(b.wire_loads)
