"""Exact complex linear algebra for d-level quantum systems.

States, unitaries, density matrices, discrete Fourier gates, fidelities and
projective measurement statistics. Everything is dense double-precision
numpy; the design envelope is small dimensions (d <= 8), where all the
identities below hold far inside the declared tolerances.

Basis labels are 1-based at the API boundary (|1> .. |d>) and 0-based
internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Tolerance for exact-arithmetic identities (unitarity, norms, traces).
ATOL_EXACT = 1e-12
# Eigenvalues of a density matrix may dip this far below zero.
EIG_FLOOR = -1e-10


class DimensionMismatchError(ValueError):
    """Operands act on spaces of different dimension."""


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuditState:
    """Normalized complex amplitude vector of a d-level system."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 2:
            raise ValueError(f"qudit dimension must be >= 2, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL_EXACT:
            raise ValueError(f"state not normalized: |amplitudes| = {norm!r}")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def basis(cls, dim: int, label: int) -> "QuditState":
        """Computational basis state |label> with 1-based label in 1..dim."""
        if not 1 <= label <= dim:
            raise ValueError(f"basis label {label} not in 1..{dim}")
        amps = np.zeros(dim, dtype=complex)
        amps[label - 1] = 1.0
        return cls(amps)

    def to_json(self) -> dict:
        return array_to_json(self.amplitudes)

    @classmethod
    def from_json(cls, obj: dict) -> "QuditState":
        return cls(array_from_json(obj))


@dataclass(frozen=True, eq=False)
class Unitary:
    """A d x d unitary matrix, validated to machine precision."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"unitary must be square, got shape {mat.shape}")
        d = mat.shape[0]
        defect = np.linalg.norm(mat.conj().T @ mat - np.eye(d))
        if defect > ATOL_EXACT:
            raise ValueError(f"matrix is not unitary: ||U^dag U - I||_F = {defect!r}")
        object.__setattr__(self, "entries", _readonly(mat))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "Unitary":
        return cls(np.eye(dim, dtype=complex))

    def to_json(self) -> dict:
        return array_to_json(self.entries)

    @classmethod
    def from_json(cls, obj: dict) -> "Unitary":
        return cls(array_from_json(obj))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite d x d matrix."""

    entries: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {mat.shape}")
        if np.abs(mat - mat.conj().T).max() > ATOL_EXACT:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(mat)
        if abs(tr - 1.0) > ATOL_EXACT:
            raise ValueError(f"density matrix trace is {tr!r}, expected 1")
        lo = np.linalg.eigvalsh(mat).min()
        if lo < EIG_FLOOR:
            raise ValueError(f"density matrix has negative eigenvalue {lo!r}")
        object.__setattr__(self, "entries", _readonly(mat))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def to_json(self) -> dict:
        return array_to_json(self.entries)

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        return cls(array_from_json(obj))


@dataclass(frozen=True)
class MeasurementOutcome:
    """One projective readout result: 1-based basis index and its probability."""

    basis_index: int
    probability: float


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def fourier_unitary(d: int) -> Unitary:
    """Discrete Fourier transform gate, entries omega^(j*k)/sqrt(d).

    Uses the convention omega = exp(+2*pi*i/d). Row and column indices are
    0-based, so row 1 of the d=4 gate reads (1, i, -1, -i)/2. Some texts use
    the conjugate convention omega = exp(-2*pi*i/d).
    """
    if d < 2:
        raise ValueError(f"Fourier gate needs dimension >= 2, got {d}")
    j = np.arange(d)
    # Reduce exponents mod d before exponentiating to keep phases exact.
    phases = np.outer(j, j) % d
    return Unitary(np.exp(2j * np.pi * phases / d) / np.sqrt(d))


def apply(unitary: Unitary, state: QuditState) -> QuditState:
    """Return U|s>. Norm is preserved to machine precision."""
    if unitary.dim != state.dim:
        raise DimensionMismatchError(
            f"unitary dim {unitary.dim} != state dim {state.dim}"
        )
    return QuditState(unitary.entries @ state.amplitudes)


def dagger(unitary: Unitary) -> Unitary:
    """Conjugate transpose; an involution."""
    return Unitary(unitary.entries.conj().T)


def compose(*unitaries: Unitary) -> Unitary:
    """Matrix product compose(A, B, C) = A @ B @ C (rightmost acts first)."""
    if not unitaries:
        raise ValueError("compose needs at least one unitary")
    dims = {u.dim for u in unitaries}
    if len(dims) != 1:
        raise DimensionMismatchError(f"mixed dimensions {sorted(dims)}")
    out = unitaries[0].entries
    for u in unitaries[1:]:
        out = out @ u.entries
    return Unitary(out)


def state_fidelity(a: QuditState, b: QuditState) -> float:
    """Squared overlap |<a|b>|^2, invariant under global phases."""
    if a.dim != b.dim:
        raise DimensionMismatchError(f"state dims {a.dim} != {b.dim}")
    return float(np.clip(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2, 0.0, 1.0))


def pure_density(state: QuditState) -> DensityMatrix:
    """Outer product |s><s|."""
    a = state.amplitudes
    return DensityMatrix(np.outer(a, a.conj()))


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def density_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity F = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Eigenvalues are clipped at zero before taking square roots, which
    tolerates the -1e-10 eigenvalue slack the inputs are allowed.
    """
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"density dims {rho.dim} != {sigma.dim}")
    s = _psd_sqrt(rho.entries)
    inner = s @ sigma.entries @ s
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.clip(np.sqrt(w).sum() ** 2, 0.0, 1.0))


def overlap_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Normalized Hilbert-Schmidt overlap Tr(rho sigma)/sqrt(Tr rho^2 Tr sigma^2).

    Alternative figure of merit to :func:`density_fidelity`; both coincide
    when either argument is pure.
    """
    if rho.dim != sigma.dim:
        raise DimensionMismatchError(f"density dims {rho.dim} != {sigma.dim}")
    num = np.trace(rho.entries @ sigma.entries).real
    den = np.sqrt(
        np.trace(rho.entries @ rho.entries).real
        * np.trace(sigma.entries @ sigma.entries).real
    )
    return float(np.clip(num / den, 0.0, 1.0))


def measure_distribution(state: QuditState) -> list[MeasurementOutcome]:
    """Born-rule outcome distribution, ordered by 1-based basis index."""
    probs = np.abs(state.amplitudes) ** 2
    return [
        MeasurementOutcome(basis_index=j + 1, probability=float(p))
        for j, p in enumerate(probs)
    ]


# ---------------------------------------------------------------------------
# JSON serialization: {"dim": d, "re": [...], "im": [...]} with row-major
# flat arrays. A length-d payload is a vector, length d*d a matrix.
# ---------------------------------------------------------------------------


def array_to_json(arr: np.ndarray) -> dict:
    a = np.asarray(arr, dtype=complex)
    if a.ndim == 1:
        dim = a.size
    elif a.ndim == 2 and a.shape[0] == a.shape[1]:
        dim = a.shape[0]
    else:
        raise ValueError(f"expected vector or square matrix, got shape {a.shape}")
    flat = a.reshape(-1)
    return {
        "dim": int(dim),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def array_from_json(obj: dict) -> np.ndarray:
    dim = int(obj["dim"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != im.shape:
        raise ValueError("re/im length mismatch")
    flat = re + 1j * im
    if flat.size == dim:
        return flat
    if flat.size == dim * dim:
        return flat.reshape(dim, dim)
    raise ValueError(f"payload length {flat.size} fits neither dim {dim} nor {dim}^2")
