"""Public circuit interconnect for programs built from gate-OTPs.

A :class:`Circuit` is a DAG of typed nodes. Only ``otp`` nodes carry secret
truth tables; XOR, NOT and fan-out are public and evaluated by the receiver.
Every node produces a single bit; only ``fanout`` nodes may feed more than one
consumer.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from .encoding import GateTable
from .errors import InvalidArgument, UnsupportedTopologyError

KINDS = ("input", "const", "otp", "not", "xor", "fanout", "output")
_ARITY = {"input": 0, "const": 0, "not": 1, "xor": 2, "fanout": 1, "output": 1}

AND = GateTable.parse("0001")
OR = GateTable.parse("0111")


@dataclass(frozen=True)
class Node:
    id: str
    kind: str
    label: str | None = None  # input/output name
    value: int | None = None  # const bit
    table: GateTable | None = None  # otp truth table; None once redacted
    k: int | None = None  # otp input count

    def arity(self) -> int:
        if self.kind == "otp":
            return self.k if self.k is not None else self.table.k
        return _ARITY[self.kind]


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    port: int


@dataclass
class Circuit:
    nodes: dict[str, Node]
    edges: list[Edge]
    output_pads: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        self._inputs: dict[str, list[str]] = {}
        self._outputs: dict[str, list[str]] = defaultdict(list)
        self.validate()

    # -- structure -------------------------------------------------------
    def validate(self) -> None:
        ins: dict[str, dict[int, str]] = defaultdict(dict)
        self._outputs = defaultdict(list)
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise InvalidArgument(f"edge {e} references an unknown node")
            if e.port in ins[e.dst]:
                raise InvalidArgument(f"port {e.port} of {e.dst} is wired twice")
            ins[e.dst][e.port] = e.src
            self._outputs[e.src].append(e.dst)
        for n in self.nodes.values():
            if n.kind not in KINDS:
                raise InvalidArgument(f"unsupported node type {n.kind!r}")
            if n.kind == "otp" and n.table is None and n.k is None:
                raise InvalidArgument(f"otp node {n.id} has neither a table nor k")
            a = n.arity()
            if sorted(ins[n.id]) != list(range(a)):
                raise InvalidArgument(f"node {n.id} ({n.kind}) needs inputs on ports 0..{a - 1}")
            fan = len(self._outputs[n.id])
            if n.kind == "output":
                if fan:
                    raise InvalidArgument(f"output {n.id} cannot drive wires")
            elif n.kind == "fanout":
                if fan < 1:
                    raise InvalidArgument(f"fanout {n.id} drives nothing")
            elif fan != 1:
                raise InvalidArgument(f"node {n.id} ({n.kind}) must drive exactly one wire; use a fanout")
        self._inputs = {nid: [ins[nid][p] for p in sorted(ins[nid])] for nid in self.nodes}
        self.order = self._topological_order()

    def _topological_order(self) -> list[str]:
        indeg = {nid: len(srcs) for nid, srcs in self._inputs.items()}
        ready = [nid for nid in self.nodes if indeg[nid] == 0]
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for dst in self._outputs[nid]:
                indeg[dst] -= 1
                if indeg[dst] == 0:
                    ready.append(dst)
        if len(order) != len(self.nodes):
            raise InvalidArgument("circuit contains a cycle")
        return order

    def with_nodes(self, nodes: dict[str, Node], output_pads: dict[str, int]) -> "Circuit":
        """Copy with replaced node payloads (same ids, kinds and wiring) without re-validating."""
        new = object.__new__(Circuit)
        new.nodes, new.edges, new.output_pads = nodes, self.edges, output_pads
        new._inputs, new._outputs, new.order = self._inputs, self._outputs, self.order
        return new

    def sources(self, node_id: str) -> list[str]:
        return self._inputs[node_id]

    def consumers(self, node_id: str) -> list[str]:
        return self._outputs[node_id]

    @property
    def input_labels(self) -> list[str]:
        return [self.nodes[n].label for n in self.order if self.nodes[n].kind == "input"]

    @property
    def output_labels(self) -> list[str]:
        return [self.nodes[n].label for n in self.order if self.nodes[n].kind == "output"]

    @property
    def otp_ids(self) -> list[str]:
        return [n for n in self.order if self.nodes[n].kind == "otp"]

    # -- serialisation ---------------------------------------------------
    def to_dict(self, redact: bool = False) -> dict:
        """JSON-able form; ``redact`` drops truth tables and output pads (the public view)."""
        nodes = []
        for nid in self.order:
            n = self.nodes[nid]
            d = {"id": n.id, "type": n.kind}
            if n.label is not None:
                d["label"] = n.label
            if n.value is not None:
                d["value"] = n.value
            if n.kind == "otp":
                d["k"] = n.arity()
                if not redact and n.table is not None:
                    d["table"] = n.table.label
            nodes.append(d)
        out = {"nodes": nodes, "edges": [[e.src, e.dst, e.port] for e in self.edges]}
        if not redact:
            out["output_pads"] = dict(self.output_pads)
        return out

    def public_view(self) -> dict:
        """Redacted description, cached; identical for every randomisation of one program."""
        view = self.__dict__.get("_public")
        if view is None:
            view = self.__dict__["_public"] = self.to_dict(redact=True)
        return view

    def to_json(self, redact: bool = False) -> str:
        return json.dumps(self.to_dict(redact), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: Mapping) -> "Circuit":
        try:
            nodes = {}
            for nd in d["nodes"]:
                table = GateTable.parse(nd["table"]) if "table" in nd else None
                nodes[nd["id"]] = Node(nd["id"], nd["type"], nd.get("label"), nd.get("value"), table, nd.get("k"))
            edges = [Edge(s, t, int(p)) for s, t, p in d["edges"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed circuit description: {exc}") from exc
        return cls(nodes, edges, dict(d.get("output_pads", {})))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


class CircuitBuilder:
    def __init__(self):
        self.nodes: dict[str, Node] = {}
        self.edges: list[Edge] = []

    def add(self, node: Node, *srcs: str) -> str:
        if node.id in self.nodes:
            raise InvalidArgument(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        for port, s in enumerate(srcs):
            self.edges.append(Edge(s, node.id, port))
        return node.id

    def input(self, label: str) -> str:
        return self.add(Node(f"in_{label}", "input", label=label))

    def const(self, nid: str, value: int) -> str:
        return self.add(Node(nid, "const", value=int(value)))

    def otp(self, nid: str, table: GateTable, *srcs: str) -> str:
        return self.add(Node(nid, "otp", table=table, k=table.k), *srcs)

    def gate(self, nid: str, kind: str, *srcs: str) -> str:
        return self.add(Node(nid, kind), *srcs)

    def output(self, label: str, src: str) -> str:
        return self.add(Node(f"out_{label}", "output", label=label), src)

    def build(self) -> Circuit:
        return Circuit(dict(self.nodes), list(self.edges))


# --------------------------------------------------------------------------
# evaluation

GateFn = Callable[[Node, tuple[int, ...]], int]


def _ideal_gate(node: Node, bits: tuple[int, ...]) -> int:
    if node.table is None:
        raise InvalidArgument(f"otp node {node.id} has no table to evaluate")
    return node.table(bits)


def local_value(node: Node, bits: tuple[int, ...]) -> int:
    """Value of a public (non-OTP, non-input) node."""
    if node.kind == "const":
        return node.value
    if node.kind == "not":
        return 1 - bits[0]
    if node.kind == "xor":
        return bits[0] ^ bits[1]
    if node.kind in ("fanout", "output"):
        return bits[0]
    raise InvalidArgument(f"{node.kind} is not a public node")


def run(c: Circuit, inputs: Mapping[str, int], gate_fn: GateFn = _ideal_gate) -> dict[str, int]:
    """Evaluate ``c`` in topological order, delegating OTP slots to ``gate_fn``.

    Returns the raw output-wire values (output pads not applied).
    """
    values: dict[str, int] = {}
    for nid in c.order:
        n = c.nodes[nid]
        if n.kind == "input":
            if n.label not in inputs:
                raise InvalidArgument(f"missing input {n.label!r}")
            values[nid] = int(inputs[n.label])
            continue
        bits = tuple(values[s] for s in c.sources(nid))
        values[nid] = gate_fn(n, bits) if n.kind == "otp" else local_value(n, bits)
    return {c.nodes[nid].label: values[nid] for nid in c.order if c.nodes[nid].kind == "output"}


def ideal_eval(c: Circuit, inputs: Mapping[str, int]) -> dict[str, int]:
    return run(c, inputs)


def apply_output_pads(c: Circuit, raw: Mapping[str, int]) -> dict[str, int]:
    return {k: v ^ c.output_pads.get(k, 0) for k, v in raw.items()}


# --------------------------------------------------------------------------
# millionaires problem


def bits_of(s: str) -> list[int]:
    if not s or set(s) - {"0", "1"}:
        raise InvalidArgument(f"bad bit string {s!r}")
    return [int(c) for c in s]


def compile_millionaires(alice_bits: str, n: int | None = None) -> Circuit:
    """Comparator returning 1 iff Bob's number exceeds Alice's.

    Bits are given most significant first. The carry chain runs from the least
    significant bit with carry 0; Alice's 1-bits become AND slots and her
    0-bits OR slots, each fed (Bob's bit, previous carry). Bob's inputs are
    labelled ``b1`` (most significant) to ``bn``.
    """
    a = bits_of(alice_bits)
    n = len(a) if n is None else n
    if n < 1 or len(a) != n:
        raise InvalidArgument(f"Alice's number has {len(a)} bits, expected {n}")
    cb = CircuitBuilder()
    carry = cb.const("carry0", 0)
    for pos in range(n, 0, -1):
        b = cb.input(f"b{pos}")
        carry = cb.otp(f"g{pos}", AND if a[pos - 1] else OR, b, carry)
    cb.output("gt", carry)
    return cb.build()


def bob_inputs(bits: str) -> dict[str, int]:
    return {f"b{i + 1}": b for i, b in enumerate(bits_of(bits))}


# --------------------------------------------------------------------------
# NOT-pair randomisation


def randomize_not_pairs(c: Circuit, rng: np.random.Generator | None = None,
                        draws: Iterable[int] | None = None) -> Circuit:
    """Insert a NOT pair after each OTP slot with probability 1/2.

    The first NOT is absorbed into the slot's table; the second travels forward
    through public gates and is absorbed into the next OTP slot's input line,
    or becomes an output pad. ``draws`` (one bit per slot in topological order)
    overrides ``rng``.
    """
    if rng is None and draws is None:
        raise InvalidArgument("need an rng or explicit draws")
    if draws is None:
        draws = rng.integers(2, size=len(c.otp_ids)).tolist()
    it = iter(draws)
    neg: dict[str, int] = {}
    nodes = dict(c.nodes)
    pads = dict(c.output_pads)
    for nid in c.order:
        n = c.nodes[nid]
        srcs = c.sources(nid)
        if n.kind in ("input", "const"):
            neg[nid] = 0
        elif n.kind in ("not", "fanout"):
            neg[nid] = neg[srcs[0]]
        elif n.kind == "xor":
            neg[nid] = neg[srcs[0]] ^ neg[srcs[1]]
        elif n.kind == "output":
            pads[n.label] = pads.get(n.label, 0) ^ neg[srcs[0]]
        elif n.kind == "otp":
            if n.table is None:
                raise InvalidArgument(f"otp node {nid} has no table")
            k = n.table.k
            mask = 0
            for port, s in enumerate(srcs):
                mask |= neg[s] << (k - 1 - port)
            table = n.table.with_input_negation(mask)
            r = int(next(it))
            if r:
                table = table.flipped()
            nodes[nid] = Node(n.id, n.kind, n.label, n.value, table, n.k)
            neg[nid] = r
        else:
            raise InvalidArgument(f"unsupported node type {n.kind!r}")
    return c.with_nodes(nodes, pads)


# --------------------------------------------------------------------------
# exact success prediction


def predict_success(c: Circuit, inputs: Mapping[str, int], per_line_p: float) -> dict[str, float]:
    """Probability that each output equals its noiseless value.

    Each OTP slot returns its table's value on the realised inputs with
    probability ``per_line_p`` and the flipped value otherwise. Wire
    distributions are propagated exactly; this requires that no two inputs of
    a gate share a noisy OTP ancestor.
    """
    if not 0 <= per_line_p <= 1:
        raise InvalidArgument("per_line_p must lie in [0, 1]")
    ideal = ideal_eval(c, inputs)
    p1: dict[str, float] = {}
    anc: dict[str, frozenset] = {}
    result = {}
    for nid in c.order:
        n = c.nodes[nid]
        srcs = c.sources(nid)
        if n.kind == "input":
            p1[nid], anc[nid] = float(inputs[n.label]), frozenset()
            continue
        if n.kind == "const":
            p1[nid], anc[nid] = float(n.value), frozenset()
            continue
        if len(srcs) > 1:
            seen = frozenset()
            for s in srcs:
                if seen & anc[s]:
                    raise UnsupportedTopologyError(f"inputs of {nid} share noisy ancestors")
                seen |= anc[s]
        ps = [p1[s] for s in srcs]
        a = frozenset().union(*(anc[s] for s in srcs))
        if n.kind in ("fanout", "output"):
            p1[nid] = ps[0]
        elif n.kind == "not":
            p1[nid] = 1 - ps[0]
        elif n.kind == "xor":
            p1[nid] = ps[0] * (1 - ps[1]) + ps[1] * (1 - ps[0])
        elif n.kind == "otp":
            k = n.table.k
            acc = 0.0
            for x in range(2**k):
                w = 1.0
                for port in range(k):
                    bit = (x >> (k - 1 - port)) & 1
                    w *= ps[port] if bit else 1 - ps[port]
                g = n.table.outputs[x]
                acc += w * (per_line_p if g else 1 - per_line_p)
            p1[nid] = acc
            a = a | {nid}
        anc[nid] = a
        if n.kind == "output":
            want = ideal[n.label]
            result[n.label] = p1[nid] if want else 1 - p1[nid]
    return result
