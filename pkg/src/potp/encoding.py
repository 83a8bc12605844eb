"""Quantum encodings of classical gates and single gate-OTP evaluation.

A ``k``-input gate is encoded so that input ``i`` is read out by measuring a
Pauli observable ``sigma_i``; the outcome +1 means output 0 and -1 means 1.
Four encodings are provided:

* ``G1``: one qubit, observables Z (input 0) and X (input 1).
* ``LINEAR``: two-input gates on three qubits, each qubit in one of the four
  G1 states, observables ZIZ, XIZ, IZX, IXX.
* ``ELLIPTICAL``: two-input gates on two qubits, a G1 state followed by an
  elliptically polarised state, observables ZY, XY, IZ, IX.
* ``GENERAL``: any ``k``, the maximum-entropy state
  ``(I + 2^{-k/2} sum_i (-1)^{G(i)} sigma_i) / dim`` sampled through one of
  its eigenvectors.

Preparation noise is modelled as a depolarising channel on every qubit,
``rho -> F rho + (1 - F) I/2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import qmath
from .errors import AlreadyConsumedError, InvalidArgument
from .qmath import PauliString


class Scheme(str, enum.Enum):
    G1 = "g1"
    LINEAR = "linear"
    ELLIPTICAL = "elliptical"
    GENERAL = "general"


@dataclass(frozen=True)
class GateTable:
    """Truth table of a k-input gate; ``outputs[i]`` is G(i), x1 the most significant input bit."""

    k: int
    outputs: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("gate needs k >= 1")
        if len(self.outputs) != 2**self.k or any(b not in (0, 1) for b in self.outputs):
            raise InvalidArgument(f"truth table must have {2 ** self.k} bits")

    @classmethod
    def parse(cls, label: str) -> "GateTable":
        n = len(label)
        k = n.bit_length() - 1
        if n < 2 or 2**k != n or set(label) - {"0", "1"}:
            raise InvalidArgument(f"bad truth-table label {label!r}")
        return cls(k, tuple(int(c) for c in label))

    @classmethod
    def from_index(cls, k: int, index: int) -> "GateTable":
        n = 2**k
        return cls(k, tuple((index >> (n - 1 - i)) & 1 for i in range(n)))

    @property
    def label(self) -> str:
        return "".join(map(str, self.outputs))

    def __str__(self) -> str:
        return self.label

    def __call__(self, bits) -> int:
        return self.outputs[input_index(bits, self.k)]

    def flipped(self) -> "GateTable":
        return _flipped(self)

    def with_input_negation(self, mask: int) -> "GateTable":
        """Table G' with G'(x) = G(x XOR mask), ``mask`` big-endian over the inputs."""
        return _negated(self, mask)


@lru_cache(maxsize=4096)
def _flipped(t: GateTable) -> GateTable:
    return GateTable(t.k, tuple(1 - b for b in t.outputs))


@lru_cache(maxsize=4096)
def _negated(t: GateTable, mask: int) -> GateTable:
    return GateTable(t.k, tuple(t.outputs[i ^ mask] for i in range(2**t.k)))


def all_tables(k: int) -> list[GateTable]:
    return [GateTable.from_index(k, i) for i in range(2 ** (2**k))]


def input_index(bits, k: int) -> int:
    if isinstance(bits, (int, np.integer)):
        if not 0 <= bits < 2**k:
            raise InvalidArgument(f"input {bits} out of range for k={k}")
        return int(bits)
    bits = [int(b) for b in bits]
    if len(bits) != k or any(b not in (0, 1) for b in bits):
        raise InvalidArgument(f"expected {k} input bits, got {bits}")
    idx = 0
    for b in bits:
        idx = (idx << 1) | b
    return idx


def input_bits(index: int, k: int) -> tuple[int, ...]:
    return tuple((index >> (k - 1 - j)) & 1 for j in range(k))


# --------------------------------------------------------------------------
# single-qubit states

_N = 1.0 / math.sqrt(2 + math.sqrt(2))
_KET0 = np.array([1, 0], dtype=complex)
_KET1 = np.array([0, 1], dtype=complex)
_PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
_MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)

PSI_0 = _N * (_KET0 + _PLUS)
PSI_1 = _N * (_KET1 - _MINUS)
PSI_ID = _N * (_KET0 + _MINUS)
PSI_NOT = _N * (_KET1 + _PLUS)

G1_STATES = {"00": PSI_0, "11": PSI_1, "01": PSI_ID, "10": PSI_NOT}
G1_NAMES = {"0": "00", "1": "11", "Id": "01", "not": "10"}

_h, _r = 0.5, 1 / math.sqrt(2)
ELLIPTICAL_STATES = [
    np.array([_h - _r * 1j, _h]),
    np.array([-_h - _r * 1j, _h]),
    np.array([_h, _h + _r * 1j]),
    np.array([_h, -_h + _r * 1j]),
    np.array([_h + _r * 1j, _h]),
    np.array([-_h + _r * 1j, _h]),
    np.array([_h, _h - _r * 1j]),
    np.array([_h, -_h - _r * 1j]),
]

# three-photon encodings, four equivalent rows per gate
LINEAR_ROWS = {
    "0000": [("0", "0", "0"), ("0", "1", "Id"), ("1", "0", "not"), ("1", "1", "1")],
    "0001": [("0", "Id", "0"), ("0", "not", "Id"), ("1", "Id", "not"), ("1", "not", "1")],
    "0010": [("0", "not", "0"), ("0", "Id", "Id"), ("1", "not", "not"), ("1", "Id", "1")],
    "0011": [("0", "1", "0"), ("0", "0", "Id"), ("1", "1", "not"), ("1", "0", "1")],
    "0100": [("Id", "0", "0"), ("Id", "1", "Id"), ("not", "0", "not"), ("not", "1", "1")],
    "0101": [("Id", "Id", "0"), ("Id", "not", "Id"), ("not", "Id", "not"), ("not", "not", "1")],
    "0110": [("Id", "not", "0"), ("Id", "Id", "Id"), ("not", "not", "not"), ("not", "Id", "1")],
    "0111": [("Id", "1", "0"), ("Id", "0", "Id"), ("not", "1", "not"), ("not", "0", "1")],
    "1000": [("not", "0", "0"), ("not", "1", "Id"), ("Id", "0", "not"), ("Id", "1", "1")],
    "1001": [("not", "Id", "0"), ("not", "not", "Id"), ("Id", "Id", "not"), ("Id", "not", "1")],
    "1010": [("not", "not", "0"), ("not", "Id", "Id"), ("Id", "not", "not"), ("Id", "Id", "1")],
    "1011": [("not", "1", "0"), ("not", "0", "Id"), ("Id", "1", "not"), ("Id", "0", "1")],
    "1100": [("1", "0", "0"), ("1", "1", "Id"), ("0", "0", "not"), ("0", "1", "1")],
    "1101": [("1", "Id", "0"), ("1", "not", "Id"), ("0", "Id", "not"), ("0", "not", "1")],
    "1110": [("1", "not", "0"), ("1", "Id", "Id"), ("0", "not", "not"), ("0", "Id", "1")],
    "1111": [("1", "1", "0"), ("1", "0", "Id"), ("0", "1", "not"), ("0", "0", "1")],
}

# two-photon encodings: (G1 state, index of elliptical state)
ELLIPTICAL_ROWS = {
    "0000": [("0", 0), ("1", 4)],
    "0001": [("0", 1), ("1", 5)],
    "0010": [("0", 2), ("1", 6)],
    "0011": [("0", 3), ("1", 7)],
    "0100": [("Id", 0), ("not", 4)],
    "0101": [("Id", 1), ("not", 5)],
    "0110": [("Id", 2), ("not", 6)],
    "0111": [("Id", 3), ("not", 7)],
    "1000": [("not", 0), ("Id", 4)],
    "1001": [("not", 1), ("Id", 5)],
    "1010": [("not", 2), ("Id", 6)],
    "1011": [("not", 3), ("Id", 7)],
    "1100": [("1", 0), ("0", 4)],
    "1101": [("1", 1), ("0", 5)],
    "1110": [("1", 2), ("0", 6)],
    "1111": [("1", 3), ("0", 7)],
}

ELLIPTICAL_OBSERVABLES = tuple(PauliString(s) for s in ("ZY", "XY", "IZ", "IX"))


def bloch(psi) -> tuple[float, float, float]:
    """(<X>, <Y>, <Z>) of a single-qubit pure state."""
    a, b = complex(psi[0]), complex(psi[1])
    ab = a.conjugate() * b
    return 2 * ab.real, 2 * ab.imag, abs(a) ** 2 - abs(b) ** 2


def g1_state(table: GateTable | str) -> np.ndarray:
    if isinstance(table, str):
        table = GateTable.parse(table)
    if table.k != 1:
        raise InvalidArgument("G1 encoding needs a one-input gate")
    return G1_STATES[table.label].copy()


def observables(scheme: Scheme | str, k: int, xz_only: bool = False) -> list[PauliString]:
    """Observable assignment: element i is measured for gate input i."""
    scheme = Scheme(scheme)
    if scheme is Scheme.G1:
        if k != 1:
            raise InvalidArgument("G1 scheme has k=1")
        return qmath.anticommuting_family(1)
    if scheme is Scheme.LINEAR:
        if k != 2:
            raise InvalidArgument("linear scheme has k=2")
        return qmath.anticommuting_family(2, xz_only=True)
    if scheme is Scheme.ELLIPTICAL:
        if k != 2:
            raise InvalidArgument("elliptical scheme has k=2")
        return list(ELLIPTICAL_OBSERVABLES)
    return qmath.anticommuting_family(k, xz_only=xz_only)


def encode_general(table: GateTable, assignment: Sequence[PauliString]) -> np.ndarray:
    """Maximum-entropy density matrix for ``table`` under an observable assignment."""
    assignment = list(assignment)
    if len(assignment) != 2**table.k:
        raise InvalidArgument("assignment must cover every input")
    n = assignment[0].n_qubits
    if any(p.n_qubits != n for p in assignment):
        raise InvalidArgument("assignment strings act on different qubit counts")
    if not qmath.pairwise_anticommuting(assignment):
        raise InvalidArgument("assignment strings do not pairwise anti-commute")
    dim = 2**n
    acc = np.eye(dim, dtype=complex)
    scale = 2 ** (-table.k / 2)
    for g, p in zip(table.outputs, assignment):
        acc += scale * (-1) ** g * qmath.materialize(p)
    return acc / dim


@dataclass(frozen=True)
class MeasurementPlan:
    """Per-qubit bases (None = unmeasured) and the qubits whose outcome bits are XORed."""

    bases: tuple[str | None, ...]
    parity_set: tuple[int, ...]
    flip: int = 0

    @classmethod
    def from_pauli(cls, p: PauliString) -> "MeasurementPlan":
        bases = tuple(None if c == "I" else c for c in p.letters)
        return cls(bases, p.support, 1 if p.sign < 0 else 0)

    def __post_init__(self):
        if not self.parity_set:
            raise InvalidArgument("a measurement plan must measure at least one qubit")


def measurement_plan(scheme: Scheme | str, bits, xz_only: bool = False) -> MeasurementPlan:
    if isinstance(bits, (int, np.integer)):
        raise InvalidArgument("pass input bits as a sequence")
    return _plan(Scheme(scheme), tuple(int(b) for b in bits), xz_only)


@lru_cache(maxsize=None)
def _plan(scheme: Scheme, bits: tuple[int, ...], xz_only: bool) -> MeasurementPlan:
    k = len(bits)
    return MeasurementPlan.from_pauli(observables(scheme, k, xz_only)[input_index(bits, k)])


@lru_cache(maxsize=None)
def _representatives(scheme: Scheme, label: str, xz_only: bool) -> tuple[tuple[np.ndarray, ...], ...]:
    if scheme is Scheme.G1:
        return ((G1_STATES[label],),)
    if scheme is Scheme.LINEAR:
        return tuple(tuple(G1_STATES[G1_NAMES[n]] for n in row) for row in LINEAR_ROWS[label])
    if scheme is Scheme.ELLIPTICAL:
        return tuple((G1_STATES[G1_NAMES[a]], ELLIPTICAL_STATES[e]) for a, e in ELLIPTICAL_ROWS[label])
    table = GateTable.parse(label)
    rho = encode_general(table, observables(scheme, table.k, xz_only))
    dec = qmath.eig_hermitian(rho)
    keep = dec.values > 1e-9
    return tuple((dec.vectors[:, j].copy(),) for j in np.flatnonzero(keep))


def representatives(scheme: Scheme | str, table: GateTable, xz_only: bool = False):
    """All equally weighted pure-state rows that encode ``table``.

    Product schemes return one amplitude vector per qubit; the general scheme
    returns a single joint vector per row.
    """
    scheme = Scheme(scheme)
    _check_width(scheme, table.k)
    return _representatives(scheme, table.label, xz_only)


def _check_width(scheme: Scheme, k: int):
    need = {Scheme.G1: 1, Scheme.LINEAR: 2, Scheme.ELLIPTICAL: 2}.get(scheme)
    if need is not None and k != need:
        raise InvalidArgument(f"{scheme.value} scheme needs k={need}, got k={k}")


@dataclass(eq=False)
class GateOtp:
    """One shippable gate-OTP.

    ``qubit_states`` encode ``table`` with every output flipped when ``pad`` is
    1; evaluating XORs the pad back, so the decoded output targets ``table``.
    ``table`` is None on the receiver side, where the gate is unknown.
    """

    scheme: Scheme
    qubit_states: list
    table: GateTable | None
    representative_index: int
    pad: int = 0
    fidelity: float = 1.0
    xz_only: bool = False
    k: int = 0
    consumed: bool = field(default=False, repr=False)

    def __post_init__(self):
        if not self.k:
            if self.table is None:
                raise InvalidArgument("receiver-side OTPs must state k")
            self.k = self.table.k

    @property
    def n_qubits(self) -> int:
        return sum(int(round(math.log2(len(s)))) for s in self.qubit_states)

    def density_matrix(self) -> np.ndarray:
        return qmath.projector(qmath.kron(self.qubit_states))

    def to_photon(self) -> dict:
        """Wire form of the simulated quantum payload (table and pad stay with the sender)."""
        return {
            "scheme": self.scheme.value,
            "k": self.k,
            "xz_only": self.xz_only,
            "fidelity": self.fidelity,
            "states": [[[float(a.real), float(a.imag)] for a in s] for s in self.qubit_states],
        }

    @classmethod
    def from_photon(cls, d: dict) -> "GateOtp":
        states = [np.array([complex(re, im) for re, im in s]) for s in d["states"]]
        return cls(Scheme(d["scheme"]), states, None, -1, 0, float(d["fidelity"]),
                   bool(d.get("xz_only", False)), int(d["k"]))


def _pick(table: GateTable, pad: int) -> GateTable:
    return table.flipped() if pad else table


def encode(scheme: Scheme | str, table: GateTable, rng: np.random.Generator, pad: int = 0,
           fidelity: float = 1.0, xz_only: bool = False) -> GateOtp:
    scheme = Scheme(scheme)
    if not 0 < fidelity <= 1:
        raise InvalidArgument("fidelity must lie in (0, 1]")
    reps = representatives(scheme, _pick(table, pad), xz_only)
    j = int(rng.integers(len(reps))) if len(reps) > 1 else 0
    return GateOtp(scheme, list(reps[j]), table, j, int(pad), fidelity, xz_only)


def encode_g1(table: GateTable, rng=None, pad: int = 0, fidelity: float = 1.0) -> GateOtp:
    return encode(Scheme.G1, table, rng, pad, fidelity)


def encode_linear_g2(table: GateTable, rng, pad: int = 0, fidelity: float = 1.0) -> GateOtp:
    return encode(Scheme.LINEAR, table, rng, pad, fidelity)


def encode_elliptical_g2(table: GateTable, rng, pad: int = 0, fidelity: float = 1.0) -> GateOtp:
    return encode(Scheme.ELLIPTICAL, table, rng, pad, fidelity)


def encode_general_otp(table: GateTable, rng, pad: int = 0, fidelity: float = 1.0,
                       xz_only: bool = False) -> GateOtp:
    return encode(Scheme.GENERAL, table, rng, pad, fidelity, xz_only)


_BASIS_CHANGE = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) / math.sqrt(2),
}


def _joint_probs(otp: GateOtp, plan: MeasurementPlan) -> np.ndarray:
    """Born probabilities of the measured qubits' outcome bits, axes in ``parity_set`` order."""
    m = len(plan.parity_set)
    if otp.scheme is Scheme.GENERAL:
        n = len(plan.bases)
        u = qmath.kron([_BASIS_CHANGE[b] if b else np.eye(2) for b in plan.bases])
        full = (np.abs(u @ otp.qubit_states[0]) ** 2).reshape((2,) * n)
        unmeasured = tuple(q for q in range(n) if plan.bases[q] is None)
        probs = full.sum(axis=unmeasured) if unmeasured else full
    else:
        probs = np.ones((), dtype=float)
        for q in plan.parity_set:
            e = bloch(otp.qubit_states[q])["XYZ".index(plan.bases[q])]
            probs = np.multiply.outer(probs, [0.5 * (1 + e), 0.5 * (1 - e)])
    if otp.fidelity < 1:
        eps = 0.5 * (1 - otp.fidelity)
        for ax in range(m):
            probs = (1 - eps) * probs + eps * np.flip(probs, axis=ax)
    return probs / probs.sum()


def measure_otp(otp: GateOtp, bits, rng: np.random.Generator) -> tuple[int, dict[int, int]]:
    """Measure ``otp`` for the given input and return (raw output bit, per-qubit outcome bits).

    The raw bit does not include the pad. Consumes the OTP.

    The parity is drawn first from a single uniform ``u``: it takes its more
    likely value unless ``u`` exceeds that value's probability. The individual
    outcomes are then drawn conditioned on the parity. The joint law is the
    Born rule; the coupling makes complementary encodings give complementary
    raw bits on identical streams.
    """
    if otp.consumed:
        raise AlreadyConsumedError("gate-OTP has already been measured")
    k = otp.k
    if isinstance(bits, (int, np.integer)):
        bits = input_bits(int(bits), k)
    plan = _plan(otp.scheme, tuple(bits), otp.xz_only)
    otp.consumed = True
    probs = _joint_probs(otp, plan).reshape(-1)
    m = len(plan.parity_set)
    parity = _PARITY[m] ^ plan.flip
    p1 = float(probs[parity == 1].sum())
    u, v = rng.random(2).tolist()
    likely = int(p1 > 0.5)
    raw = likely ^ int(u >= max(p1, 1 - p1))
    w = np.where(parity == raw, probs, 0.0)
    idx = min(int(np.searchsorted(np.cumsum(w), v * w.sum(), side="right")), len(w) - 1)
    outcomes = {q: (idx >> (m - 1 - j)) & 1 for j, q in enumerate(plan.parity_set)}
    return raw, outcomes


_PARITY = {m: np.array([bin(i).count("1") & 1 for i in range(2**m)]) for m in range(1, 17)}


def evaluate_otp(otp: GateOtp, bits, rng: np.random.Generator) -> int:
    raw, _ = measure_otp(otp, bits, rng)
    return raw ^ otp.pad


def _expectation(reps, obs: PauliString) -> float:
    """Mean of <sigma> over equally weighted representative rows."""
    m = qmath.materialize(obs)
    acc = 0.0
    for row in reps:
        psi = qmath.kron(row)
        acc += float(np.real(np.vdot(psi, m @ psi)))
    return acc / len(reps)


def success_probability(scheme: Scheme | str, table: GateTable, fidelity: float = 1.0,
                        xz_only: bool = False) -> list[float]:
    """Exact per-input probability that the decoded output equals G(i)."""
    scheme = Scheme(scheme)
    reps = representatives(scheme, table, xz_only)
    out = []
    for i, obs in enumerate(observables(scheme, table.k, xz_only)):
        e = _expectation(reps, obs) * fidelity ** len(obs.support)
        out.append(0.5 * (1 + (-1) ** table.outputs[i] * e))
    return out


def line_success(k: int) -> float:
    """Closed-form per-line success 1/2 (1 + 2^{-k/2})."""
    return 0.5 * (1 + 2 ** (-k / 2))


def sample_outputs(scheme: Scheme | str, table: GateTable, bits, trials: int,
                   rng: np.random.Generator, fidelity: float = 1.0, xz_only: bool = False) -> np.ndarray:
    """Vectorised Monte Carlo of ``trials`` independent fresh encodings evaluated on ``bits``.

    Each trial draws a representative row uniformly and samples the measured
    qubits by the Born rule, exactly as :func:`encode` + :func:`evaluate_otp`.
    """
    scheme = Scheme(scheme)
    reps = representatives(scheme, table, xz_only)
    plan = measurement_plan(scheme, bits, xz_only)
    rows = rng.integers(len(reps), size=trials) if len(reps) > 1 else np.zeros(trials, dtype=int)
    if scheme is Scheme.GENERAL:
        obs = observables(scheme, table.k, xz_only)[input_index(bits, table.k)]
        m = qmath.materialize(obs)
        # parity of a Pauli measurement on a pure state is Bernoulli((1 - <sigma>)/2)
        e = np.array([np.real(np.vdot(r[0], m @ r[0])) for r in reps])
        p1 = 0.5 * (1 - e * fidelity ** len(plan.parity_set))
        return (rng.random(trials) < p1[rows]).astype(np.int8)
    out = np.full(trials, plan.flip, dtype=np.int8)
    for q in plan.parity_set:
        idx = "XYZ".index(plan.bases[q])
        p1 = np.array([0.5 * (1 - bloch(r[q])[idx]) for r in reps])
        out ^= (rng.random(trials) < p1[rows]).astype(np.int8)
        if fidelity < 1:
            out ^= (rng.random(trials) < 0.5 * (1 - fidelity)).astype(np.int8)
    return out


def measure_g1_batch(table_labels: np.ndarray, inputs: np.ndarray, rng: np.random.Generator,
                     fidelity: float = 1.0) -> np.ndarray:
    """Measure many G1 encodings at once.

    ``table_labels`` holds gate indices 0..3 (labels 00, 01, 10, 11) and
    ``inputs`` the bit each one is evaluated on; returns output bits.
    """
    table_labels = np.asarray(table_labels)
    inputs = np.broadcast_to(np.asarray(inputs), table_labels.shape)
    # the encoded expectation of the measured observable is (-1)^G(x) / sqrt(2)
    g = (table_labels >> (1 - inputs)) & 1
    e = (1 - 2 * g) / math.sqrt(2) * fidelity
    return (rng.random(table_labels.shape) < 0.5 * (1 - e)).astype(np.int8)
