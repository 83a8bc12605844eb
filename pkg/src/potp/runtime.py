"""Two-party execution of a gate-OTP program over a lossy channel.

Alice (sender) and Bob (receiver) are message-driven state machines. For
every OTP slot Alice prepares ``copies_per_gate`` encodings, each with its own
random output pad, and offers them over the channel, which loses each photon
independently. Bob acknowledges one surviving copy and measures it; Alice
then reveals the pad of that copy only. After the last slot Alice reveals the
output pads left by NOT-pair randomisation.

Frames are newline-delimited UTF-8 JSON objects with a ``type`` field. The
simulated photon rides inside ``state_offer`` frames (``null`` when lost); it
carries amplitudes only, never the truth table or pad.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import socket
from collections import deque
from dataclasses import dataclass, field
from typing import Any, BinaryIO, ClassVar

import numpy as np

from . import circuits
from .circuits import Circuit
from .encoding import GateOtp, Scheme, measure_otp, representatives
from .errors import InvalidArgument, ParseError, ProtocolAbort

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelConfig:
    loss_probability: float = 0.0
    copies_per_gate: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.loss_probability < 1:
            raise InvalidArgument("loss_probability must lie in [0, 1)")
        if self.copies_per_gate < 1:
            raise InvalidArgument("copies_per_gate must be >= 1")

    def streams(self) -> tuple[np.random.Generator, np.random.Generator]:
        """(loss events, Born-rule draws), both derived from ``seed``."""
        return self.stream(0), self.stream(1)

    def stream(self, i: int) -> np.random.Generator:
        """Child ``i`` of ``SeedSequence(seed)``; equal to ``spawn(2)[i]`` without building both."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(i,))))


# --------------------------------------------------------------------------
# messages


@dataclass
class ProgramHeader:
    type: ClassVar[str] = "program_header"
    circuit: dict
    scheme: str
    channel: dict
    fidelity: float = 1.0
    xz_only: bool = False


@dataclass
class StateOffer:
    type: ClassVar[str] = "state_offer"
    gate_id: int
    copy_id: int
    photon: Any = None  # GateOtp receiver view, or None when lost in transit


@dataclass
class ReceiveAck:
    type: ClassVar[str] = "receive_ack"
    gate_id: int
    copy_id: int


@dataclass
class LossReport:
    type: ClassVar[str] = "loss_report"
    gate_id: int
    copy_id: int


@dataclass
class PadReveal:
    type: ClassVar[str] = "pad_reveal"
    gate_id: int
    copy_id: int
    pad: int


@dataclass
class OutputPadReveal:
    type: ClassVar[str] = "output_pad_reveal"
    output_pads: dict


@dataclass
class Abort:
    type: ClassVar[str] = "abort"
    reason: str


MESSAGE_TYPES = {m.type: m for m in (ProgramHeader, StateOffer, ReceiveAck, LossReport, PadReveal,
                                     OutputPadReveal, Abort)}
_INT_FIELDS = {"gate_id", "copy_id", "pad"}


def message_dict(m, with_photon: bool = True) -> dict:
    d = {"type": m.type}
    for f in dataclasses.fields(m):
        v = getattr(m, f.name)
        if f.name == "photon":
            if not with_photon:
                continue
            v = v.to_photon() if v is not None else None
        d[f.name] = v
    return d


def encode_message(m) -> bytes:
    return (json.dumps(message_dict(m), separators=(",", ":")) + "\n").encode("utf-8")


def decode_message(frame: bytes):
    if not frame.endswith(b"\n"):
        raise ParseError("truncated frame: missing newline", len(frame))
    body = frame[:-1]
    if b"\n" in body:
        raise ParseError("more than one frame", body.index(b"\n"))
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("frame is not UTF-8", exc.start) from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc.msg}", len(text[: exc.pos].encode())) from exc
    if not isinstance(d, dict) or "type" not in d:
        raise ParseError("frame is not an object with a type", 0)
    cls = MESSAGE_TYPES.get(d.pop("type"))
    if cls is None:
        raise ParseError("unknown message type", 0)
    names = [f.name for f in dataclasses.fields(cls)]
    required = [f.name for f in dataclasses.fields(cls)
                if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    if set(d) - set(names) or set(required) - set(d):
        raise ParseError(f"fields {sorted(d)} do not match {cls.type}", 0)
    for name in _INT_FIELDS & set(d):
        if type(d[name]) is not int:
            raise ParseError(f"field {name} must be an integer", 0)
    if d.get("photon") is not None:
        try:
            d["photon"] = GateOtp.from_photon(d["photon"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad photon payload: {exc}", 0) from exc
    return cls(**d)


# --------------------------------------------------------------------------
# transcript


@dataclass
class Transcript:
    header: dict
    messages: list = field(default_factory=list)  # (direction, message) from Bob's side
    measurements: list = field(default_factory=list)
    outputs: dict | None = None
    aborted: bool = False
    abort_reason: str | None = None
    gates_attempted: int = 0

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "messages": [{"dir": d, **message_dict(m, with_photon=False)} for d, m in self.messages],
            "measurements": self.measurements,
            "outputs": self.outputs,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "gates_attempted": self.gates_attempted,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def check_one_shot(self) -> None:
        """Raise AssertionError if a copy was measured twice or a pad revealed without an ack."""
        acked, revealed = set(), set()
        for d, m in self.messages:
            if isinstance(m, ReceiveAck):
                assert (m.gate_id, m.copy_id) not in acked, "copy acknowledged twice"
                assert all(g != m.gate_id for g, _ in acked), "gate acknowledged twice"
                acked.add((m.gate_id, m.copy_id))
            elif isinstance(m, PadReveal):
                assert (m.gate_id, m.copy_id) in acked, "pad revealed for an unacknowledged copy"
                assert m.gate_id not in {g for g, _ in revealed}, "two pad reveals for one gate"
                revealed.add((m.gate_id, m.copy_id))
        seen = set()
        for rec in self.measurements:
            key = (rec["gate_id"], rec["copy_id"])
            assert key not in seen, "copy measured twice"
            seen.add(key)


# --------------------------------------------------------------------------
# state machines


class Alice:
    """Sender: serves an encoded program and reveals pads for acknowledged copies."""

    def __init__(self, program: Circuit, rng: np.random.Generator, channel: ChannelConfig,
                 scheme: str = "linear", fidelity: float = 1.0, randomize: bool = True,
                 xz_only: bool = False):
        if not 0 < fidelity <= 1:
            raise InvalidArgument("fidelity must lie in (0, 1]")
        self.rng = rng
        self.channel = channel
        self.loss_rng = channel.stream(0)
        self.scheme = Scheme(scheme)
        self.fidelity = fidelity
        self.xz_only = xz_only
        self.public = program.public_view()
        self.program = circuits.randomize_not_pairs(program, rng) if randomize else program
        self.gates = self.program.otp_ids
        # all per-slot randomness drawn up front: pads, representative rows, losses
        shape = (len(self.gates), channel.copies_per_gate)
        self._pads = rng.integers(2, size=shape).tolist()
        self._rows = rng.random(shape).tolist()
        self._lost = (self.loss_rng.random(shape) < channel.loss_probability).tolist()
        self.gate = -1
        self.pads: list | None = None
        self.acked: set[int] = set()
        self.done = False

    def _gate_scheme(self, k: int) -> Scheme:
        if k == 1:
            return Scheme.G1
        if k == 2 and self.scheme in (Scheme.LINEAR, Scheme.ELLIPTICAL):
            return self.scheme
        return Scheme.GENERAL

    def start(self) -> list:
        header = ProgramHeader(self.public, self.scheme.value,
                               {"loss_probability": self.channel.loss_probability,
                                "copies_per_gate": self.channel.copies_per_gate,
                                "seed": self.channel.seed}, self.fidelity, self.xz_only)
        return [header] + self._offer_next()

    def _offer_next(self) -> list:
        self.gate += 1
        if self.gate == len(self.gates):
            self.done = True
            return [OutputPadReveal(dict(self.program.output_pads))]
        table = self.program.nodes[self.gates[self.gate]].table
        scheme = self._gate_scheme(table.k)
        n = self.channel.copies_per_gate
        self.pads = self._pads[self.gate]
        self.acked = set()
        lost = self._lost[self.gate]
        reps = (representatives(scheme, table, self.xz_only),
                representatives(scheme, table.flipped(), self.xz_only))
        rows = self._rows[self.gate]
        offers = []
        for c in range(n):
            photon = None
            if not lost[c]:
                # receiver view: amplitudes only
                rep = reps[self.pads[c]]
                photon = GateOtp(scheme, list(rep[int(rows[c] * len(rep))]), None, -1, 0,
                                 self.fidelity, self.xz_only, table.k)
            offers.append(StateOffer(self.gate, c, photon))
        return offers

    def handle(self, m) -> list:
        if self.done:
            return []
        if isinstance(m, Abort):
            self.done = True
            return []
        if isinstance(m, LossReport):
            return []
        if isinstance(m, ReceiveAck):
            if m.gate_id != self.gate or not 0 <= m.copy_id < self.channel.copies_per_gate or self.acked:
                self.done = True
                return [Abort(f"unexpected acknowledgement for gate {m.gate_id} copy {m.copy_id}")]
            self.acked.add(m.copy_id)
            return [PadReveal(self.gate, m.copy_id, self.pads[m.copy_id])] + self._offer_next()
        self.done = True
        return [Abort(f"unexpected {m.type} from receiver")]


class Bob:
    """Receiver: evaluates the public circuit, measuring one copy per OTP slot."""

    def __init__(self, inputs: dict, record: bool = True):
        self.inputs = dict(inputs)
        self.record = record
        self.transcript = Transcript(header={})
        self.circuit: Circuit | None = None
        self.done = False

    def _log(self, direction: str, m) -> None:
        if self.record:
            self.transcript.messages.append((direction, m))

    def _abort(self, reason: str) -> list:
        self.done = True
        self.transcript.aborted = True
        self.transcript.abort_reason = reason
        return [Abort(reason)]

    def _advance(self) -> None:
        """Evaluate public nodes until the next OTP slot (or the end)."""
        c = self.circuit
        while self.pos < len(c.order):
            nid = c.order[self.pos]
            n = c.nodes[nid]
            if n.kind == "otp":
                return
            if n.kind == "input":
                self.values[nid] = int(self.inputs[n.label])
            else:
                self.values[nid] = circuits.local_value(n, tuple(self.values[s] for s in c.sources(nid)))
            self.pos += 1

    def handle(self, m) -> list:
        self._log("recv", m)
        out = self._dispatch(m)
        for r in out:
            self._log("send", r)
        return out

    def _dispatch(self, m) -> list:
        if self.done:
            return []
        if isinstance(m, Abort):
            self.done = True
            self.transcript.aborted = True
            self.transcript.abort_reason = m.reason
            return []
        if isinstance(m, ProgramHeader):
            try:
                self.circuit = _parse_public(m.circuit)
                self.channel = ChannelConfig(**m.channel)
            except (InvalidArgument, TypeError) as exc:
                return self._abort(f"bad program header: {exc}")
            missing = set(self.circuit.input_labels) - set(self.inputs)
            if missing:
                return self._abort(f"missing inputs {sorted(missing)}")
            self.born_rng = self.channel.stream(1)
            self.transcript.header = {"circuit": m.circuit, "scheme": m.scheme, "channel": m.channel,
                                      "fidelity": m.fidelity, "inputs": self.inputs}
            self.gates = self.circuit.otp_ids
            self.values: dict[str, int] = {}
            self.pos = 0
            self.gate = 0
            self.offers: list = []
            self.pending: tuple | None = None
            self._advance()
            return []
        if self.circuit is None:
            return self._abort(f"{m.type} before program header")
        if isinstance(m, StateOffer):
            if m.gate_id != self.gate or m.copy_id != len(self.offers) or self.pending is not None:
                return self._abort(f"out-of-order offer gate {m.gate_id} copy {m.copy_id}")
            self.offers.append(m.photon)
            out = [] if m.photon is not None else [LossReport(m.gate_id, m.copy_id)]
            if len(self.offers) == self.channel.copies_per_gate:
                out += self._choose()
            return out
        if isinstance(m, PadReveal):
            if self.pending is None or (m.gate_id, m.copy_id) != self.pending[:2]:
                return self._abort(f"pad reveal for unacknowledged copy {m.gate_id}/{m.copy_id}")
            g, c, raw, rec = self.pending
            decoded = raw ^ m.pad
            self.values[self.gates[g]] = decoded
            if self.record:
                rec.update(pad=m.pad, decoded=decoded)
                self.transcript.measurements.append(rec)
            self.pending = None
            self.offers = []
            self.gate += 1
            self.pos += 1
            self._advance()
            return []
        if isinstance(m, OutputPadReveal):
            if self.gate != len(self.gates):
                return self._abort("output pads revealed before all gates were evaluated")
            c = self.circuit
            outputs = {}
            for nid in c.order:
                n = c.nodes[nid]
                if n.kind == "output":
                    outputs[n.label] = self.values[nid] ^ int(m.output_pads.get(n.label, 0))
            self.transcript.outputs = outputs
            self.done = True
            return []
        return self._abort(f"unexpected {m.type} from sender")

    def _choose(self) -> list:
        self.transcript.gates_attempted += 1
        arrived = [i for i, p in enumerate(self.offers) if p is not None]
        if not arrived:
            return self._abort(f"all copies of gate {self.gate} lost")
        c = arrived[0]
        nid = self.gates[self.gate]
        bits = tuple(self.values[s] for s in self.circuit.sources(nid))
        raw, outcomes = measure_otp(self.offers[c], bits, self.born_rng)
        rec = {"gate_id": self.gate, "copy_id": c, "inputs": list(bits),
               "outcomes": {str(q): b for q, b in sorted(outcomes.items())}, "raw": raw} if self.record else None
        self.pending = (self.gate, c, raw, rec)
        return [ReceiveAck(self.gate, c)]


_LAST_PUBLIC: list = [None, None]


def _parse_public(d: dict) -> Circuit:
    # repeated in-process sessions hand over the same description object
    if _LAST_PUBLIC[0] is not d:
        _LAST_PUBLIC[:] = [d, Circuit.from_dict(d)]
    return _LAST_PUBLIC[1]


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def run_session(program: Circuit, alice_rng, bob_inputs: dict, channel: ChannelConfig,
                scheme: str = "linear", fidelity: float = 1.0, randomize: bool = True,
                xz_only: bool = False, record: bool = True) -> Transcript:
    """Run one in-process session and return Bob's transcript."""
    alice = Alice(program, _as_rng(alice_rng), channel, scheme, fidelity, randomize, xz_only)
    bob = Bob(bob_inputs, record)
    to_bob = deque(alice.start())
    while to_bob:
        replies = bob.handle(to_bob.popleft())
        for r in replies:
            to_bob.extend(alice.handle(r))
    if not bob.done:
        bob.transcript.aborted = True
        bob.transcript.abort_reason = "session ended early"
    return bob.transcript


@dataclass
class SessionStats:
    trials: int = 0
    aborted: int = 0
    gates_attempted: int = 0
    outputs: dict = field(default_factory=dict)  # label -> count of 1s over completed sessions

    @property
    def completed(self) -> int:
        return self.trials - self.aborted

    def frequency(self, label: str, value: int = 1) -> float:
        ones = self.outputs.get(label, 0)
        return (ones if value else self.completed - ones) / self.completed

    @property
    def gate_abort_rate(self) -> float:
        return self.aborted / self.gates_attempted if self.gates_attempted else 0.0


def session_seeds(seed: int, index: int) -> tuple[np.random.Generator, int]:
    """Independent (Alice rng, channel seed) for session ``index`` of a seeded batch."""
    return np.random.default_rng([seed, index]), (int(seed) << 32) | int(index)


def run_sessions(program: Circuit, bob_inputs: dict, trials: int, seed: int = 0,
                 loss_probability: float = 0.0, copies_per_gate: int = 1, scheme: str = "linear",
                 fidelity: float = 1.0, randomize: bool = True, xz_only: bool = False) -> SessionStats:
    """Run ``trials`` independent in-process sessions and tally outputs and aborts."""
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    stats = SessionStats()
    labels = program.output_labels
    stats.outputs = {lab: 0 for lab in labels}
    for i in range(trials):
        rng, cseed = session_seeds(seed, i)
        t = run_session(program, rng, bob_inputs, ChannelConfig(loss_probability, copies_per_gate, cseed),
                        scheme, fidelity, randomize, xz_only, record=False)
        stats.trials += 1
        stats.gates_attempted += t.gates_attempted
        if t.aborted:
            stats.aborted += 1
        else:
            for lab in labels:
                stats.outputs[lab] += t.outputs[lab]
    return stats


# --------------------------------------------------------------------------
# byte-stream transport


def _read_frame(reader: BinaryIO):
    line = reader.readline()
    if not line:
        return None
    return decode_message(line)


def serve_stream(alice: Alice, reader: BinaryIO, writer: BinaryIO) -> None:
    """Drive ``alice`` over a framed byte stream until the session ends."""

    def send(msgs):
        for m in msgs:
            writer.write(encode_message(m))
        writer.flush()

    send(alice.start())
    while not alice.done:
        try:
            m = _read_frame(reader)
        except ParseError as exc:
            send([Abort(f"parse error: {exc}")])
            raise ProtocolAbort(str(exc)) from exc
        if m is None:
            raise ProtocolAbort("peer disconnected")
        send(alice.handle(m))


def connect_stream(bob: Bob, reader: BinaryIO, writer: BinaryIO) -> Transcript:
    """Drive ``bob`` over a framed byte stream; failures end in an aborted transcript."""
    while not bob.done:
        try:
            m = _read_frame(reader)
        except ParseError as exc:
            for r in bob._abort(f"parse error: {exc}"):
                bob._log("send", r)
                _try_write(writer, encode_message(r))
            break
        if m is None:
            bob._abort("peer disconnected")
            break
        replies = bob.handle(m)
        for r in replies:
            _try_write(writer, encode_message(r))
    return bob.transcript


def _try_write(writer: BinaryIO, data: bytes) -> None:
    try:
        writer.write(data)
        writer.flush()
    except OSError:
        log.debug("peer gone while writing")


def serve_tcp(alice: Alice, host: str = "127.0.0.1", port: int = 0, ready=None) -> None:
    """Accept one connection and run ``alice`` on it. ``ready(port)`` is called once listening."""
    with socket.create_server((host, port)) as srv:
        if ready is not None:
            ready(srv.getsockname()[1])
        conn, _ = srv.accept()
        with conn, conn.makefile("rb") as r, conn.makefile("wb") as w:
            serve_stream(alice, r, w)


def connect_tcp(bob: Bob, host: str, port: int, timeout: float = 30.0) -> Transcript:
    with socket.create_connection((host, port), timeout=timeout) as conn:
        with conn.makefile("rb") as r, conn.makefile("wb") as w:
            return connect_stream(bob, r, w)
