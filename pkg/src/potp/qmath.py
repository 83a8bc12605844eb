"""Dense complex linear algebra and Pauli-string algebra.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The helpers here
cover what the encoding and discrimination code needs: Kronecker products,
Hermitian eigendecomposition, trace norms, support-restricted inverse square
roots and families of mutually anti-commuting Pauli strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument, NotPSDError

HERMITIAN_TOL = 1e-12
SUPPORT_CUTOFF = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise InvalidArgument(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    return m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def _require_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = as_matrix(m)
    if not is_hermitian(m, tol):
        raise InvalidArgument("matrix is not Hermitian")
    return m


def kron(factors: Sequence) -> np.ndarray:
    """Kronecker product of ``factors`` left to right (first factor is the most significant qubit)."""
    factors = list(factors)
    if not factors:
        raise InvalidArgument("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(f, dtype=complex) for f in factors))


def tensor_power(m, n: int) -> np.ndarray:
    if n < 1:
        raise InvalidArgument("tensor power needs n >= 1")
    return kron([m] * n)


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def eig_hermitian(m, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix with eigenvalues sorted descending."""
    m = _require_hermitian(m, tol)
    # symmetrise away the sub-tolerance skew before handing to LAPACK
    vals, vecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    order = np.argsort(vals)[::-1]
    return EigenDecomposition(values=vals[order], vectors=vecs[:, order])


def trace_norm(m) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(eig_hermitian(m).values)))


def inv_sqrt_on_support(m, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Return sum over eigenvalues a > cutoff of a^{-1/2} |a><a|; the kernel maps to zero."""
    dec = eig_hermitian(m)
    if dec.values.size and dec.values[-1] < -cutoff:
        raise NotPSDError(f"matrix has eigenvalue {dec.values[-1]:.3e} below -{cutoff:g}")
    keep = dec.values > cutoff
    v = dec.vectors[:, keep]
    return (v * dec.values[keep] ** -0.5) @ v.conj().T


def support_projector(m, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    dec = eig_hermitian(m)
    v = dec.vectors[:, dec.values > cutoff]
    return v @ v.conj().T


def von_neumann_entropy(rho, cutoff: float = 1e-14) -> float:
    """Entropy in bits."""
    vals = eig_hermitian(rho).values
    vals = vals[vals > cutoff]
    return float(-np.sum(vals * np.log2(vals)))


def trace_distance(a, b) -> float:
    return 0.5 * trace_norm(as_matrix(a) - as_matrix(b))


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class PauliString:
    """A signed tensor product of single-qubit Pauli letters, e.g. ``-XIZ``."""

    letters: str
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidArgument("sign must be +1 or -1")
        if not self.letters or set(self.letters) - set("IXYZ"):
            raise InvalidArgument(f"bad Pauli letters {self.letters!r}")

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        text = text.strip().replace("−", "-")
        sign = 1
        if text[:1] in "+-":
            sign = -1 if text[0] == "-" else 1
            text = text[1:]
        return cls(text, sign)

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    def anticommutes(self, other: "PauliString") -> bool:
        if self.n_qubits != other.n_qubits:
            raise InvalidArgument("Pauli strings act on different qubit counts")
        clashes = sum(a != "I" and b != "I" and a != b for a, b in zip(self.letters, other.letters))
        return clashes % 2 == 1

    def __neg__(self) -> "PauliString":
        return PauliString(self.letters, -self.sign)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + self.letters


def materialize(p: PauliString | str) -> np.ndarray:
    if isinstance(p, str):
        p = PauliString.parse(p)
    return p.sign * kron([PAULI[c] for c in p.letters])


def _chain_family(m: int) -> list[PauliString]:
    """Z^m followed by the Jordan-Wigner chain Z..Z X I..I, Z..Z Y I..I on m qubits."""
    out = [PauliString("Z" * m)]
    for i in range(m):
        for c in "XY":
            out.append(PauliString("Z" * i + c + "I" * (m - i - 1)))
    return out


def _xz_family(k: int) -> list[PauliString]:
    if k == 1:
        return [PauliString("Z"), PauliString("X")]
    sub = _xz_family(k - 1)
    pad = "I" * sub[0].n_qubits
    left = [PauliString(s.letters + pad + "Z") for s in sub]
    right = [PauliString(pad + s.letters + "X") for s in sub]
    return left + right


def anticommuting_family(k: int, xz_only: bool = False) -> list[PauliString]:
    """Return 2^k pairwise anti-commuting Pauli strings, indexed by gate input.

    With ``xz_only`` the strings use only I, X and Z and act on 2^k - 1 qubits;
    otherwise they act on 2^(k-1) qubits.
    """
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    if xz_only:
        return _xz_family(k)
    return _chain_family(2 ** (k - 1))[: 2**k]


def pairwise_anticommuting(strings: Iterable[PauliString]) -> bool:
    s = list(strings)
    return all(s[i].anticommutes(s[j]) for i in range(len(s)) for j in range(i + 1, len(s)))
