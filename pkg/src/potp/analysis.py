"""How much a dishonest receiver can learn from gate-OTP states.

Covers the classical error-mix model and its parity inequality, the quantum
values that violate it, the pretty-good and JRF measurements with an
optimality certificate, Hamming-error distributions of whole-table guesses,
and a one-query circuit that produces two copies of a G1 state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import qmath
from .encoding import G1_STATES, GateTable, Scheme, all_tables, encode_general, line_success, observables
from .errors import InvalidArgument, ResourceLimitError

MAX_DIM = 1024
POVM_PSD_TOL = 1e-10
POVM_SUM_TOL = 1e-9


def _check_dim(dim: int) -> None:
    if dim > MAX_DIM:
        raise ResourceLimitError(f"dimension {dim} exceeds the limit of {MAX_DIM}")


# --------------------------------------------------------------------------
# classical model


@dataclass(frozen=True)
class ErrorMix:
    """``E[h]`` is the probability that exactly ``h`` truth-table lines are wrong."""

    E: tuple[float, ...]

    def __post_init__(self):
        if abs(math.fsum(self.E) - 1) > 1e-12:
            raise InvalidArgument(f"error mix sums to {math.fsum(self.E)}, not 1")

    @property
    def lines(self) -> int:
        return len(self.E) - 1

    @property
    def feasible(self) -> bool:
        return all(e >= -1e-12 for e in self.E)


def classical_error_mix(F1: float, F2: float) -> ErrorMix:
    """One-input gate: mix of 0, 1 or 2 deliberate errors reproducing line success F1 and parity success F2."""
    for v in (F1, F2):
        if not 0 <= v <= 1:
            raise InvalidArgument("F1 and F2 must lie in [0, 1]")
    return ErrorMix((F1 + F2 / 2 - 0.5, 1 - F2, 0.5 - F1 + F2 / 2))


def classical_parity_floor(F1: float) -> float:
    """Smallest parity success compatible with line success F1 in the classical model."""
    if not 0 <= F1 <= 1:
        raise InvalidArgument("F1 must lie in [0, 1]")
    return abs(2 * F1 - 1)


def classical_pair_floor(k: int, P1: float) -> float:
    """Lower bound on two-line success from positive semi-definite line covariances."""
    if not 0 <= P1 <= 1:
        raise InvalidArgument("P1 must lie in [0, 1]")
    n = 2**k
    return max(0.0, (n * P1 * P1 - P1) / (n - 1))


# --------------------------------------------------------------------------
# quantum line / parity identification (one-input gates, c copies)


@dataclass(frozen=True)
class LineParity:
    copies: int
    f1: float  # trace-norm value
    f2: float
    f1_closed: float | None  # closed form, odd copy counts only
    f2_closed: float | None

    @property
    def classical_floor(self) -> float:
        return classical_parity_floor(self.f1)

    @property
    def violated(self) -> bool:
        return self.f2 < self.classical_floor


def _g1_power(label: str, c: int) -> np.ndarray:
    return qmath.tensor_power(qmath.projector(G1_STATES[label]), c)


def quantum_line_and_parity(c: int) -> LineParity:
    """Helstrom success for one line (F1) and for the parity of both lines (F2) given ``c`` copies."""
    if c < 1:
        raise InvalidArgument("need at least one copy")
    _check_dim(2**c)
    r = {lab: _g1_power(lab, c) for lab in ("00", "01", "10", "11")}
    a1 = 0.25 * (r["00"] + r["01"] - r["10"] - r["11"])
    a2 = 0.25 * (r["00"] - r["01"] - r["10"] + r["11"])
    f1c = f2c = None
    if c % 2:
        f1c = 0.5 + 0.5 * math.sqrt(1 - 2.0**-c)
        f2c = 0.5 + 0.5 * math.sqrt(1 - 2 * 2.0**-c)
    return LineParity(c, 0.5 + 0.5 * qmath.trace_norm(a1), 0.5 + 0.5 * qmath.trace_norm(a2), f1c, f2c)


# --------------------------------------------------------------------------
# measurements


@dataclass
class Povm:
    operators: list
    priors: np.ndarray

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=float)

    def check(self) -> None:
        """Raise InvalidArgument unless every operator is PSD and they sum to I."""
        if len(self.operators) != len(self.priors):
            raise InvalidArgument("one prior per operator")
        if abs(self.priors.sum() - 1) > 1e-12:
            raise InvalidArgument("priors must sum to 1")
        dim = self.operators[0].shape[0]
        for i, m in enumerate(self.operators):
            if qmath.eig_hermitian(m, 1e-9).values[-1] < -POVM_PSD_TOL:
                raise InvalidArgument(f"operator {i} is not PSD")
        if np.max(np.abs(sum(self.operators) - np.eye(dim))) > POVM_SUM_TOL:
            raise InvalidArgument("operators do not sum to the identity")

    def confusion(self, states) -> np.ndarray:
        """``P[x, y] = tr(rho_x M_y)``."""
        return np.array([[np.real(np.trace(r @ m)) for m in self.operators] for r in states])

    def success(self, states) -> float:
        return float(self.priors @ np.diag(self.confusion(states)))


def _ensemble(states, priors) -> tuple[list, np.ndarray]:
    states = [qmath.as_matrix(s) for s in states]
    if not states:
        raise InvalidArgument("need at least one state")
    dim = states[0].shape[0]
    if any(s.shape != (dim, dim) for s in states):
        raise InvalidArgument("states have different dimensions")
    _check_dim(dim)
    priors = np.full(len(states), 1 / len(states)) if priors is None else np.asarray(priors, dtype=float)
    if len(priors) != len(states) or abs(priors.sum() - 1) > 1e-12 or np.any(priors < 0):
        raise InvalidArgument("priors must be a probability vector, one per state")
    return states, priors


def _sandwich(parts: list) -> list:
    """Return R^{-1/2+} P R^{-1/2+} for each part (R their sum), with the kernel shared uniformly."""
    total = sum(parts)
    root = qmath.inv_sqrt_on_support(total)
    kernel = np.eye(total.shape[0]) - qmath.support_projector(total)
    return [root @ p @ root + kernel / len(parts) for p in parts]


def pgm(states, priors=None) -> Povm:
    """Pretty-good measurement M_x = S^{-1/2} q_x rho_x S^{-1/2}."""
    states, priors = _ensemble(states, priors)
    return Povm(_sandwich([q * r for q, r in zip(priors, states)]), priors)


def jrf_iterate(states, priors=None, iterations: int = 1) -> Povm:
    """JRF fixed-point iteration started from the uniform POVM."""
    if iterations < 1:
        raise InvalidArgument("need at least one iteration")
    states, priors = _ensemble(states, priors)
    n, dim = len(states), states[0].shape[0]
    ops = [np.eye(dim, dtype=complex) / n] * n
    for _ in range(iterations):
        ops = _sandwich([q * q * r @ m @ r for q, r, m in zip(priors, states, ops)])
    return Povm(ops, priors)


def operator_distance(a: Povm, b: Povm) -> float:
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a.operators, b.operators))


@dataclass(frozen=True)
class Certificate:
    optimal: bool
    condition: str | None = None  # "orthogonality" or "global" when violated
    indices: tuple[int, ...] = ()
    value: float = 0.0


def certify_optimal(povm: Povm, states, priors=None, tol: float = 1e-8) -> Certificate:
    """Check the two sufficient conditions for minimum-error discrimination.

    ``M_x (q_x rho_x - q_y rho_y) M_y = 0`` for every pair and
    ``sum_x q_x rho_x M_x - q_y rho_y >= 0`` for every y.
    """
    states, priors = _ensemble(states, priors if priors is not None else povm.priors)
    weighted = [q * r for q, r in zip(priors, states)]
    ops = povm.operators
    for x in range(len(ops)):
        for y in range(x + 1, len(ops)):
            v = float(np.linalg.norm(ops[x] @ (weighted[x] - weighted[y]) @ ops[y], 2))
            if v > tol:
                return Certificate(False, "orthogonality", (x, y), v)
    gamma = sum(w @ m for w, m in zip(weighted, ops))
    gamma = 0.5 * (gamma + gamma.conj().T)
    for y, w in enumerate(weighted):
        low = float(qmath.eig_hermitian(gamma - w, 1e-9).values[-1])
        if low < -tol:
            return Certificate(False, "global", (y,), low)
    return Certificate(True)


# --------------------------------------------------------------------------
# whole-table identification


def eq1_state(table: GateTable) -> np.ndarray:
    """Maximum-entropy encoding under the default anti-commuting family."""
    return encode_general(table, observables(Scheme.GENERAL, table.k))


@lru_cache(maxsize=None)
def _ensemble_for(k: int, copies: int) -> tuple[tuple[GateTable, ...], tuple[np.ndarray, ...]]:
    if k not in (1, 2):
        raise InvalidArgument("whole-table analysis supports k in {1, 2}")
    if copies < 1:
        raise InvalidArgument("need at least one copy")
    tables = tuple(all_tables(k))
    dim = eq1_state(tables[0]).shape[0] ** copies
    _check_dim(dim)
    return tables, tuple(qmath.tensor_power(eq1_state(t), copies) for t in tables)


def gate_ensemble(k: int, copies: int = 1) -> tuple[list[GateTable], list[np.ndarray]]:
    tables, states = _ensemble_for(k, copies)
    return list(tables), list(states)


def hamming_error_distribution(k: int, copies: int = 1, povm: Povm | None = None) -> ErrorMix:
    """E_h for the PGM guess of the whole table, averaged over uniformly random gates."""
    tables, states = gate_ensemble(k, copies)
    povm = pgm(states) if povm is None else povm
    conf = povm.confusion(states)
    n = 2**k
    E = np.zeros(n + 1)
    for x, tx in enumerate(tables):
        for s, ts in enumerate(tables):
            h = sum(a != b for a, b in zip(tx.outputs, ts.outputs))
            E[h] += povm.priors[x] * conf[x, s]
    E /= E.sum()  # absorb rounding so the mix sums to 1 exactly
    return ErrorMix(tuple(float(e) for e in E))


def subset_success(mix: ErrorMix, L: int) -> float:
    """Average probability that a random set of L lines is entirely correct."""
    n = mix.lines
    if not 1 <= L <= n:
        raise InvalidArgument(f"L must lie in [1, {n}]")
    return math.fsum(math.comb(n - h, L) / math.comb(n, L) * e for h, e in enumerate(mix.E))


@dataclass(frozen=True)
class TradeoffPoint:
    copies: int
    p1: float  # single-line success after majority vote over copies
    p1_tilde: float  # per-line success of a whole-table guess


def majority_boost(p: float, c: int) -> float:
    """Probability that the majority of c independent p-correct answers is correct (c odd)."""
    if c < 1 or c % 2 == 0:
        raise InvalidArgument("majority vote needs an odd copy count")
    return math.fsum(math.comb(c, w) * p**w * (1 - p) ** (c - w) for w in range(c // 2 + 1, c + 1))


def tradeoff_curve(k: int, copies=(1, 3, 5)) -> list[TradeoffPoint]:
    p = line_success(k)
    return [TradeoffPoint(c, majority_boost(p, c), subset_success(hamming_error_distribution(k, c), 1))
            for c in copies]


# --------------------------------------------------------------------------
# two copies from one oracle query


_C8, _S8 = math.cos(math.pi / 8), math.sin(math.pi / 8)
_W = np.array([[_C8, _S8], [_S8, -_C8]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    psi = psi.reshape((2,) * n)
    psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [q])), 0, q)
    return psi.reshape(-1)


def _permute(psi: np.ndarray, f, n: int) -> np.ndarray:
    """Apply the basis permutation |b> -> |f(b)> (b a bit tuple, qubit 0 most significant)."""
    out = np.zeros_like(psi)
    for i, a in enumerate(psi):
        b = tuple((i >> (n - 1 - j)) & 1 for j in range(n))
        fb = f(b)
        out[sum(v << (n - 1 - j) for j, v in enumerate(fb))] += a
    return out


def _cnot(c: int, t: int):
    return lambda b: tuple(v ^ b[c] if j == t else v for j, v in enumerate(b))


def _cz(psi: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    signs = np.array([-1 if (i >> (n - 1 - a)) & (i >> (n - 1 - b)) & 1 else 1 for i in range(2**n)])
    return psi * signs


def two_copy_state(table: GateTable) -> np.ndarray:
    """Run the one-query circuit on qubits (C1, C2, T, Q) and return the C1 C2 marginal state vector."""
    if table.k != 1:
        raise InvalidArgument("two-copy circuit takes a one-input gate")
    n, C1, C2, T, Q = 4, 0, 1, 2, 3
    oracle = lambda b: tuple(v ^ table(b[Q:Q + 1]) if j == T else v for j, v in enumerate(b))
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    psi = _apply_1q(_apply_1q(psi, _W, C1, n), _W, C2, n)
    # Bell transform: Phi+ -> 00, Phi- -> 10, Psi+ -> 01, Psi- -> 11
    psi = _apply_1q(_permute(psi, _cnot(C1, C2), n), _H, C1, n)
    psi = _apply_1q(psi, _H, T, n)
    psi = _cz(_cz(psi, C1, T, n), C2, T, n)
    psi = _permute(psi, _cnot(C2, Q), n)
    psi = _permute(psi, oracle, n)  # the single query
    psi = _permute(psi, _cnot(C2, Q), n)
    psi = _cz(_cz(psi, C1, T, n), C2, T, n)
    psi = _apply_1q(psi, _H, T, n)
    psi = _permute(_apply_1q(psi, _H, C1, n), _cnot(C1, C2), n)
    # ancillas T, Q return to |00>
    block = psi.reshape(4, 4)
    if np.linalg.norm(block[:, 1:]) > 1e-9:
        raise AssertionError("ancillas did not disentangle")
    return block[:, 0]


def two_copy_from_single_query(table: GateTable | str) -> float:
    """Fidelity of the circuit output with two copies of the G1 encoding of ``table``."""
    if isinstance(table, str):
        table = GateTable.parse(table)
    target = np.kron(G1_STATES[table.label], G1_STATES[table.label])
    out = two_copy_state(table)
    return float(abs(np.vdot(target, out)) ** 2)
