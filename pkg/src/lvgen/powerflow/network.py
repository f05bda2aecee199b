"""Medium-voltage network model, text file loader and admittance assembly.

Network file layout (``#`` starts a comment, fields are whitespace separated)::

    [system]
    base_mva = 10
    v_min = 0.97
    v_max = 1.03

    [buses]
    # id  kv  type
    0  33  slack
    1  11  PQ

    [lines]
    # id  from  to  r_pu  x_pu  b_pu
    L1  1  2  0.0102  0.0050  0.00086

    [trafos]
    # id  from  to  r_pu  x_pu  tap
    T1  0  1  0.004  0.10  0.985

    [slack]
    bus = 0

Impedances are per unit on the system base. A transformer tap ``t`` sits on
the ``from`` side, so ``t < 1`` raises the ``to``-side voltage.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BUS_TYPES = ("slack", "PQ")


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    kv: float
    type: str = "PQ"


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0


@dataclass(frozen=True)
class Transformer:
    id: str
    from_bus: int
    to_bus: int
    r: float
    x: float
    tap: float = 1.0


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...] = ()
    trafos: tuple[Transformer, ...] = ()
    base_mva: float = 10.0
    v_min: float = 0.97
    v_max: float = 1.03
    name: str = "network"
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "trafos", tuple(self.trafos))
        object.__setattr__(self, "_index", {b.id: i for i, b in enumerate(self.buses)})
        self.validate()

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    def index(self, bus_id: int) -> int:
        return self._index[bus_id]

    @property
    def slack(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.type == "slack")

    @property
    def pq(self) -> np.ndarray:
        return np.array([i for i, b in enumerate(self.buses) if b.type == "PQ"], dtype=np.int64)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def branches(self):
        yield from self.lines
        yield from self.trafos

    def validate(self):
        ids = [b.id for b in self.buses]
        if not ids:
            raise NetworkError("network has no buses")
        seen = set()
        for i in ids:
            if i in seen:
                raise NetworkError(f"duplicate bus id {i}")
            seen.add(i)
        for b in self.buses:
            if b.type not in BUS_TYPES:
                raise NetworkError(f"bus {b.id}: unknown type {b.type!r}")
            if not (b.kv > 0 and math.isfinite(b.kv)):
                raise NetworkError(f"bus {b.id}: nominal kV must be positive")
        n_slack = sum(b.type == "slack" for b in self.buses)
        if n_slack != 1:
            raise NetworkError(f"network needs exactly one slack bus, found {n_slack}")
        if not (self.base_mva > 0 and 0 < self.v_min < self.v_max):
            raise NetworkError("invalid base MVA or voltage limits")
        adj = {i: [] for i in ids}
        for br in self.branches():
            for end in (br.from_bus, br.to_bus):
                if end not in seen:
                    raise NetworkError(f"branch {br.id} references unknown bus {end}")
            if br.from_bus == br.to_bus:
                raise NetworkError(f"branch {br.id} connects bus {br.from_bus} to itself")
            vals = (br.r, br.x, getattr(br, "b", 0.0), getattr(br, "tap", 1.0))
            if not all(math.isfinite(v) for v in vals):
                raise NetworkError(f"branch {br.id} has non-finite parameters")
            if isinstance(br, Transformer) and br.tap <= 0:
                raise NetworkError(f"transformer {br.id}: tap must be positive")
            adj[br.from_bus].append(br.to_bus)
            adj[br.to_bus].append(br.from_bus)
        reached, todo = {ids[0]}, deque([ids[0]])
        while todo:
            for nxt in adj[todo.popleft()]:
                if nxt not in reached:
                    reached.add(nxt)
                    todo.append(nxt)
        if len(reached) != len(ids):
            missing = sorted(set(ids) - reached)
            raise NetworkError(f"network is disconnected; unreachable buses {missing[:10]}")


def _series_admittance(br) -> complex:
    z = complex(br.r, br.x)
    if z == 0:
        raise NetworkError(f"branch {br.id} has zero series impedance")
    return 1.0 / z


def build_ybus(network: NetworkModel) -> np.ndarray:
    """Dense complex nodal admittance matrix (π lines, off-nominal taps)."""
    n = network.n_bus
    y = np.zeros((n, n), dtype=complex)
    for ln in network.lines:
        i, j = network.index(ln.from_bus), network.index(ln.to_bus)
        ys = _series_admittance(ln)
        sh = 0.5j * ln.b
        y[i, i] += ys + sh
        y[j, j] += ys + sh
        y[i, j] -= ys
        y[j, i] -= ys
    for tr in network.trafos:
        i, j = network.index(tr.from_bus), network.index(tr.to_bus)
        ys = _series_admittance(tr)
        t = tr.tap
        y[i, i] += ys / (t * t)
        y[j, j] += ys
        y[i, j] -= ys / t
        y[j, i] -= ys / t
    return y


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_network(text: str, name: str = "network") -> NetworkModel:
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise NetworkError(f"line {lineno}: section [{current}] repeated")
            sections[current] = []
            continue
        if current is None:
            raise NetworkError(f"line {lineno}: content before any section header")
        sections[current].append((lineno, line))
    unknown = set(sections) - {"system", "buses", "lines", "trafos", "slack"}
    if unknown:
        raise NetworkError(f"unknown section(s) {sorted(unknown)}")
    if "buses" not in sections:
        raise NetworkError("network file has no [buses] section")

    def keyvals(sec):
        out = {}
        for lineno, line in sections.get(sec, []):
            if "=" not in line:
                raise NetworkError(f"line {lineno}: expected key = value in [{sec}]")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k] = (lineno, v)
        return out

    def fields(lineno, line, n, sec):
        parts = line.split()
        if len(parts) != n:
            raise NetworkError(f"line {lineno}: [{sec}] rows need {n} fields, got {len(parts)}")
        return parts

    def num(lineno, v):
        try:
            return float(v)
        except ValueError:
            raise NetworkError(f"line {lineno}: {v!r} is not a number") from None

    system = {k: num(ln, v) for k, (ln, v) in keyvals("system").items() if k != "name"}
    name = keyvals("system").get("name", (0, name))[1]
    buses = []
    for lineno, line in sections["buses"]:
        bid, kv, btype = fields(lineno, line, 3, "buses")
        btype = "slack" if btype.lower() == "slack" else btype.upper()
        try:
            buses.append(Bus(int(bid), num(lineno, kv), btype))
        except ValueError:
            raise NetworkError(f"line {lineno}: bus id {bid!r} is not an integer") from None
    lines = []
    for lineno, line in sections.get("lines", []):
        lid, f, t, r, x, b = fields(lineno, line, 6, "lines")
        lines.append(Line(lid, int(f), int(t), num(lineno, r), num(lineno, x), num(lineno, b)))
    trafos = []
    for lineno, line in sections.get("trafos", []):
        tid, f, t, r, x, tap = fields(lineno, line, 6, "trafos")
        trafos.append(Transformer(tid, int(f), int(t), num(lineno, r), num(lineno, x), num(lineno, tap)))
    slack = keyvals("slack")
    if "bus" in slack:
        lineno, v = slack["bus"]
        declared = [b.id for b in buses if b.type == "slack"]
        if declared and declared != [int(v)]:
            raise NetworkError(f"line {lineno}: [slack] bus {v} disagrees with bus types {declared}")
        if not declared:
            buses = [Bus(b.id, b.kv, "slack") if b.id == int(v) else b for b in buses]
    return NetworkModel(
        tuple(buses), tuple(lines), tuple(trafos),
        base_mva=system.get("base_mva", 10.0), v_min=system.get("v_min", 0.97),
        v_max=system.get("v_max", 1.03), name=name,
    )


def load_network_file(path) -> NetworkModel:
    path = Path(path)
    return parse_network(path.read_text(), name=path.stem)


def format_network(network: NetworkModel) -> str:
    out = ["[system]", f"name = {network.name}", f"base_mva = {float(network.base_mva)!r}",
           f"v_min = {float(network.v_min)!r}", f"v_max = {float(network.v_max)!r}", "", "[buses]",
           "# id kv type"]
    f = lambda v: repr(float(v))  # noqa: E731
    out += [f"{b.id} {f(b.kv)} {b.type}" for b in network.buses]
    out += ["", "[lines]", "# id from to r_pu x_pu b_pu"]
    out += [f"{ln.id} {ln.from_bus} {ln.to_bus} {f(ln.r)} {f(ln.x)} {f(ln.b)}" for ln in network.lines]
    out += ["", "[trafos]", "# id from to r_pu x_pu tap"]
    out += [f"{t.id} {t.from_bus} {t.to_bus} {f(t.r)} {f(t.x)} {f(t.tap)}" for t in network.trafos]
    out += ["", "[slack]", f"bus = {network.buses[network.slack].id}", ""]
    return "\n".join(out)


def fixture_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "ukgds77.net"


def load_fixture() -> NetworkModel:
    return load_network_file(fixture_path())
