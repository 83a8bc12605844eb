"""Delegated one-time signatures built from single-input gate-OTPs.

Alice hands Bob ``rows`` x ``T`` G1 encodings with uniformly random tables.
To sign, Bob hashes the message and evaluates every OTP of row ``r`` on hash
bit ``r``. Alice, who kept the tables, accepts when each row agrees with the
ideal outputs in at least ``tau`` places.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .encoding import G1_STATES, GateTable, line_success, measure_g1_batch
from .errors import AlreadyConsumedError, InvalidArgument

HASH_BITS = 224
P_G1 = line_success(1)


def hash_message(message: bytes, rows: int = HASH_BITS) -> np.ndarray:
    """SHA3-224 digest bits, most significant bit of each byte first, truncated to ``rows``."""
    if not 1 <= rows <= HASH_BITS:
        raise InvalidArgument(f"rows must lie in [1, {HASH_BITS}]")
    digest = np.frombuffer(hashlib.sha3_224(message).digest(), dtype=np.uint8)
    return np.unpackbits(digest)[:rows].astype(np.int8)


@dataclass
class SignatureBundle:
    """``tables[r, t]`` is the index (0..3, labels 00..11) of OTP ``t`` in row ``r``."""

    tables: np.ndarray
    fidelity: float = 1.0
    consumed: bool = field(default=False, repr=False)

    def __post_init__(self):
        self.tables = np.asarray(self.tables, dtype=np.int8)
        if self.tables.ndim != 2 or self.tables.size == 0:
            raise InvalidArgument("tables must be a non-empty rows x T array")
        if self.tables.min() < 0 or self.tables.max() > 3:
            raise InvalidArgument("G1 table indices lie in 0..3")
        if self.tables.shape[0] > HASH_BITS:
            raise InvalidArgument(f"at most {HASH_BITS} rows")
        if not 0 < self.fidelity <= 1:
            raise InvalidArgument("fidelity must lie in (0, 1]")

    @classmethod
    def generate(cls, rng: np.random.Generator, rows: int = HASH_BITS, T: int = 300,
                 fidelity: float = 1.0) -> "SignatureBundle":
        if T < 1:
            raise InvalidArgument("T must be >= 1")
        return cls(rng.integers(4, size=(rows, T), dtype=np.int8), fidelity)

    @property
    def rows(self) -> int:
        return self.tables.shape[0]

    @property
    def T(self) -> int:
        return self.tables.shape[1]

    def table(self, r: int, t: int) -> GateTable:
        return GateTable.from_index(1, int(self.tables[r, t]))

    def expected(self, bits: np.ndarray) -> np.ndarray:
        """Ideal outputs G(b_r) for every OTP."""
        bits = np.asarray(bits, dtype=np.int8)[:, None]
        return ((self.tables >> (1 - bits)) & 1).astype(np.int8)

    def record(self) -> "SignatureBundle":
        """Alice's private copy of the tables (never consumed)."""
        return SignatureBundle(self.tables.copy(), self.fidelity)


@dataclass(frozen=True)
class SignatureRow:
    hash_bit: int
    outputs: np.ndarray


@dataclass(frozen=True)
class VerificationReport:
    matches: np.ndarray
    tau: int
    passed: bool

    @property
    def min_match(self) -> int:
        return int(self.matches.min())


def sign(bundle: SignatureBundle, message: bytes, rng: np.random.Generator,
         ideal: bool = False) -> list[SignatureRow]:
    """Evaluate row ``r`` of the bundle on hash bit ``r``; ``ideal`` skips measurement noise."""
    if bundle.consumed:
        raise AlreadyConsumedError("signature bundle already used")
    bits = hash_message(message, bundle.rows)
    bundle.consumed = True
    if ideal:
        out = bundle.expected(bits)
    else:
        out = measure_g1_batch(bundle.tables, bits[:, None], rng, bundle.fidelity)
    return [SignatureRow(int(b), o) for b, o in zip(bits, out)]


def verify(record: SignatureBundle, message: bytes, rows: list[SignatureRow], tau: int) -> VerificationReport:
    if len(rows) != record.rows:
        raise InvalidArgument(f"expected {record.rows} signature rows, got {len(rows)}")
    if any(len(r.outputs) != record.T for r in rows):
        raise InvalidArgument(f"every row needs {record.T} outputs")
    bits = hash_message(message, record.rows)
    got = np.array([r.outputs for r in rows], dtype=np.int8)
    matches = (got == record.expected(bits)).sum(axis=1)
    return VerificationReport(matches, int(tau), bool(matches.min() >= tau))


# --------------------------------------------------------------------------
# exact binomial analysis


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _log_sum(terms: list[float]) -> float:
    if not terms:
        return -math.inf
    m = max(terms)
    if m == -math.inf:
        return m
    return m + math.log(math.fsum(math.exp(t - m) for t in terms))


def binomial_upper_tail(T: int, tau: int, p: float) -> float:
    """P(Binomial(T, p) >= tau) by exact log-space summation."""
    if not 0 <= p <= 1:
        raise InvalidArgument("p must lie in [0, 1]")
    if tau <= 0:
        return 1.0
    if tau > T:
        return 0.0
    if p == 0:
        return 0.0
    if p == 1:
        return 1.0
    lp, lq = math.log(p), math.log1p(-p)
    return min(1.0, math.exp(_log_sum([_log_binom(T, w) + w * lp + (T - w) * lq for w in range(tau, T + 1)])))


def binomial_cdf_count(T: int, h: int) -> float:
    """Sum_{w <= h} C(T, w), the top eigenvalue of the Hamming-ball operator."""
    return float(sum(math.comb(T, w) for w in range(0, min(h, T) + 1)))


def honest_pass_probability(T: int, tau: int, p: float = P_G1, rows: int = HASH_BITS) -> float:
    if not 0 <= tau <= T:
        raise InvalidArgument("need 0 <= tau <= T")
    return binomial_upper_tail(T, tau, p) ** rows


def single_row_forgery_bound(T: int, tau: int) -> float:
    """min(1, 2^-T Sum_{w <= 2T - 2 tau} C(T, w))."""
    h = 2 * T - 2 * tau
    if h < 0:
        return 0.0
    s = math.fsum(math.exp(_log_binom(T, w) - T * math.log(2)) for w in range(0, min(h, T) + 1))
    return min(1.0, s)


def dishonest_bound(T: int, tau: int, rows: int = HASH_BITS, p: float = P_G1) -> float:
    """Two messages whose hashes differ in one bit: honest on rows-1 rows, bounded on the other."""
    if not 0 <= tau <= T:
        raise InvalidArgument("need 0 <= tau <= T")
    return binomial_upper_tail(T, tau, p) ** (rows - 1) * single_row_forgery_bound(T, tau)


@dataclass(frozen=True)
class SweepPoint:
    tau: int
    honest: float
    dishonest: float

    @property
    def difference(self) -> float:
        return self.honest - self.dishonest


def threshold_sweep(T: int, rows: int = HASH_BITS, p: float = P_G1,
                    single_row: bool = False) -> list[SweepPoint]:
    """Both curves for tau in [ceil(T/2), T]; ``single_row`` drops the row exponentiation."""
    if T < 1:
        raise InvalidArgument("T must be >= 1")
    r = 1 if single_row else rows
    return [SweepPoint(tau, honest_pass_probability(T, tau, p, r), dishonest_bound(T, tau, r, p))
            for tau in range((T + 1) // 2, T + 1)]


def best_threshold(curve: list[SweepPoint]) -> SweepPoint:
    return max(curve, key=lambda s: s.difference)


def match_histogram(matches, T: int, p: float = P_G1, width: int = 3) -> list[tuple[int, int, float]]:
    """(bin_start, observed count, expected count under Binomial(T, p)) with bins of ``width``."""
    matches = np.asarray(matches)
    n = matches.size
    pmf = np.array([math.exp(_log_binom(T, w) + w * math.log(p) + (T - w) * math.log1p(-p))
                    if 0 < p < 1 else float(w == round(T * p)) for w in range(T + 1)])
    out = []
    for start in range(0, T + 1, width):
        stop = min(start + width, T + 1)
        count = int(((matches >= start) & (matches < stop)).sum())
        out.append((start, count, float(n * pmf[start:stop].sum())))
    return out


def pooled_chi_square(hist: list[tuple[int, int, float]], min_expected: float = 5.0) -> tuple[float, int]:
    """Chi-square statistic and degrees of freedom after merging bins until each expects >= ``min_expected``."""
    groups, obs, exp = [], 0, 0.0
    for _, o, e in hist:
        obs, exp = obs + o, exp + e
        if exp >= min_expected:
            groups.append([obs, exp])
            obs, exp = 0, 0.0
    if groups:
        groups[-1][0] += obs
        groups[-1][1] += exp
    stat = sum((o - e) ** 2 / e for o, e in groups if e > 0)
    return float(stat), len(groups) - 1


# --------------------------------------------------------------------------
# Hamming-ball eigenvalue identity


def codeword(bits) -> np.ndarray:
    """Product state encoding a 2T-bit string, one G1 state per bit pair."""
    bits = [int(b) for b in bits]
    if len(bits) % 2 or not bits:
        raise InvalidArgument("need a non-empty even-length bit string")
    return qmath.kron([G1_STATES[f"{bits[i]}{bits[i + 1]}"] for i in range(0, len(bits), 2)])


def hamming_ball_operator(y, h: int) -> np.ndarray:
    """Sum over 2T-bit strings x with H(x, y) <= h of |phi_x><phi_x|."""
    y = [int(b) for b in y]
    n = len(y)
    out = np.zeros((2 ** (n // 2),) * 2, dtype=complex)
    for idx in range(2**n):
        x = [(idx >> (n - 1 - i)) & 1 for i in range(n)]
        if sum(a != b for a, b in zip(x, y)) <= h:
            out += qmath.projector(codeword(x))
    return out


def hamming_ball_top_eigenvalue(T: int, h: int, y=None) -> float:
    if T > 6:
        raise InvalidArgument("explicit diagonalisation limited to T <= 6")
    y = [0] * (2 * T) if y is None else y
    return float(qmath.eig_hermitian(hamming_ball_operator(y, h)).values[0])
