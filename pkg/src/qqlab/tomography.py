"""Simulated state tomography of the traceless deviation matrix.

Two readout schemes are provided. The operator-basis mode measures one
orthonormal traceless Hermitian basis element per record and inverts
exactly; it is the truth oracle. The NMR-like mode mimics quadrupolar
practice: a global rf rotation exp(-i theta (Ix cos(phi) + Iy sin(phi)))
followed by detection of transverse magnetization, resolved per spectral
line. Resolving the d-1 single-quantum lines is what makes the induced
linear map full rank (d^2 - 1); the unresolved total Ix/Iy signal only ever
sees the 3-dimensional vector part of the state, because conjugating a
vector operator by global rotations cannot leave the span of (Ix, Iy, Iz).

Reconstruction is linear least squares over the deviation components; the
identity component is invisible to the traceless detection operators and is
restored as I/d.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qudit import DensityMatrix, Unitary
from .spins import propagator, spin_operators

CONDITION_WARN_THRESHOLD = 1e6


class TomographyRankError(ValueError):
    """Readout settings do not determine all d^2 - 1 deviation components."""


# ---------------------------------------------------------------------------
# Traceless Hermitian operator basis (generalized Gell-Mann, orthonormal)
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def operator_basis(d: int) -> tuple[np.ndarray, ...]:
    """d^2 - 1 traceless Hermitian matrices with Tr(B_a B_b) = delta_ab."""
    basis: list[np.ndarray] = []
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0 / np.sqrt(2.0)
            basis.append(sym)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2.0)
            asym[k, j] = 1j / np.sqrt(2.0)
            basis.append(asym)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -float(l)
        basis.append(np.diag(diag).astype(complex) / np.sqrt(l * (l + 1)))
    for b in basis:
        b.flags.writeable = False
    return tuple(basis)


def expand_deviation(mat: np.ndarray) -> np.ndarray:
    """Coefficients of the traceless part of mat in the operator basis."""
    d = mat.shape[0]
    return np.array(
        [np.trace(b @ mat).real for b in operator_basis(d)], dtype=float
    )


# ---------------------------------------------------------------------------
# Readout settings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReadoutSetting:
    """One readout: rotate by ``rotation``, then measure ``observable``.

    ``theta``/``phi``/``observable_label``/``line`` describe how the setting
    was built and drive JSON serialization; the matrices are what the
    simulation uses.
    """

    rotation: Unitary
    observable: np.ndarray
    theta: float
    phi: float
    observable_label: str
    line: int | None

    def __post_init__(self):
        obs = np.asarray(self.observable, dtype=complex)
        if np.abs(obs - obs.conj().T).max() > 1e-12:
            raise ValueError("observable must be Hermitian")
        obs.flags.writeable = False
        object.__setattr__(self, "observable", obs)


@dataclass(frozen=True)
class TomographyRecord:
    setting: ReadoutSetting
    value: float
    noise_sigma: float = 0.0


@dataclass(frozen=True, eq=False)
class ReconstructionReport:
    """Least-squares estimate plus diagnostics.

    ``rho_hat`` is Hermitian with unit trace but, with noisy input,
    not necessarily positive; apply :func:`project_positive` when a valid
    state is required.
    """

    rho_hat: np.ndarray
    residual_norm: float
    condition_number: float
    settings_rank: int


def _line_observable(total: np.ndarray, line: int) -> np.ndarray:
    """Restrict a single-quantum observable to spectral line ``line`` (1-based)."""
    j = line - 1
    out = np.zeros_like(total)
    out[j, j + 1] = total[j, j + 1]
    out[j + 1, j] = total[j + 1, j]
    return out


def _rotation(d: int, theta: float, phi: float) -> Unitary:
    ops = spin_operators((d - 1) / 2.0)
    axis = np.cos(phi) * ops.ix + np.sin(phi) * ops.iy
    return propagator(axis, theta)


def default_nmr_grid(d: int) -> list[tuple[float, float]]:
    """Deterministic (theta, phi) rotation grid sized for rank d^2 - 1."""
    n = max(5, -(-(d * d - 1) // (2 * (d - 1))) + 3)
    golden = 2.0 * np.pi * 0.381966011250105
    return [
        (np.pi / 2.0 * (0.35 + 0.65 * (k + 1) / n), (k * golden) % (2.0 * np.pi))
        for k in range(n)
    ]


def _design_matrix(settings: list[ReadoutSetting]) -> np.ndarray:
    d = settings[0].observable.shape[0]
    basis = operator_basis(d)
    rows = np.empty((len(settings), len(basis)))
    for r, s in enumerate(settings):
        eff = s.rotation.entries.conj().T @ s.observable @ s.rotation.entries
        rows[r] = [np.trace(eff @ b).real for b in basis]
    return rows


def settings_rank(settings: list[ReadoutSetting]) -> int:
    return int(np.linalg.matrix_rank(_design_matrix(settings), tol=1e-10))


def default_readout_set(
    d: int = 4, mode: str = "nmr", grid: list[tuple[float, float]] | None = None
) -> list[ReadoutSetting]:
    """Build a complete readout set and certify its rank at construction.

    mode "operator-basis": one exact traceless-basis observable per setting.
    mode "nmr": global rotations over a (theta, phi) grid with line-resolved
    Ix and Iy detection (2(d-1) values per rotation).
    """
    if d < 2:
        raise ValueError(f"dimension must be >= 2, got {d}")
    settings: list[ReadoutSetting] = []
    if mode == "operator-basis":
        eye = Unitary.identity(d)
        for k, b in enumerate(operator_basis(d)):
            settings.append(
                ReadoutSetting(
                    rotation=eye,
                    observable=b,
                    theta=0.0,
                    phi=0.0,
                    observable_label=f"basis:{k}",
                    line=None,
                )
            )
    elif mode == "nmr":
        ops = spin_operators((d - 1) / 2.0)
        pairs = default_nmr_grid(d) if grid is None else list(grid)
        for theta, phi in pairs:
            rot = _rotation(d, theta, phi)
            for line in range(1, d):
                for label, total in (("Ix", ops.ix), ("Iy", ops.iy)):
                    settings.append(
                        ReadoutSetting(
                            rotation=rot,
                            observable=_line_observable(total, line),
                            theta=float(theta),
                            phi=float(phi),
                            observable_label=label,
                            line=line,
                        )
                    )
    else:
        raise ValueError(f"unknown tomography mode {mode!r}")

    rank = settings_rank(settings)
    if rank != d * d - 1:
        raise TomographyRankError(
            f"readout set spans only {rank} of {d * d - 1} deviation components"
        )
    return settings


# ---------------------------------------------------------------------------
# Simulation and reconstruction
# ---------------------------------------------------------------------------


def simulate_measurements(
    rho: DensityMatrix | np.ndarray,
    settings: list[ReadoutSetting],
    noise_sigma: float = 0.0,
    rng_seed: int = 0,
) -> list[TomographyRecord]:
    """Expectation values Tr(O R rho R^dag) with optional Gaussian noise.

    Detection operators are traceless, so only the deviation part of rho
    contributes; adding c*I to the input changes nothing.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    rng = np.random.default_rng(rng_seed)
    records = []
    for s in settings:
        rotated = s.rotation.entries @ mat @ s.rotation.entries.conj().T
        value = float(np.trace(s.observable @ rotated).real)
        if noise_sigma > 0:
            value += noise_sigma * rng.standard_normal()
        records.append(TomographyRecord(setting=s, value=value, noise_sigma=noise_sigma))
    return records


def reconstruct(
    records: list[TomographyRecord], project: bool = False
) -> ReconstructionReport:
    """Linear least-squares inversion of the deviation components."""
    if not records:
        raise ValueError("no records to reconstruct from")
    settings = [r.setting for r in records]
    d = settings[0].observable.shape[0]
    a = _design_matrix(settings)
    b = np.array([r.value for r in records])

    svals = np.linalg.svd(a, compute_uv=False)
    rank = int(np.sum(svals > 1e-10 * svals[0]))
    if rank < d * d - 1:
        raise TomographyRankError(
            f"records span only {rank} of {d * d - 1} deviation components"
        )
    condition = float(svals[0] / svals[rank - 1])
    if condition > CONDITION_WARN_THRESHOLD:
        warnings.warn(
            f"tomography design matrix is ill-conditioned ({condition:.3g})",
            stacklevel=2,
        )

    coeffs, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    deviation = np.zeros((d, d), dtype=complex)
    for c, basis_el in zip(coeffs, operator_basis(d)):
        deviation += c * basis_el
    rho_hat = np.eye(d, dtype=complex) / d + deviation
    if project:
        rho_hat = project_positive(rho_hat)
    residual = float(np.linalg.norm(a @ coeffs - b))
    return ReconstructionReport(
        rho_hat=rho_hat,
        residual_norm=residual,
        condition_number=condition,
        settings_rank=rank,
    )


def project_positive(mat: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and renormalize the trace to 1."""
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise ValueError("matrix has no positive weight to renormalize")
    return (v * (w / total)) @ v.conj().T


def pure_part(rho_hat: np.ndarray, eps: float) -> np.ndarray:
    """Undo pseudo-pure scaling: I/d + (rho - I/d)/eps, in units of eps."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    d = rho_hat.shape[0]
    eye = np.eye(d, dtype=complex)
    return eye / d + (rho_hat - np.trace(rho_hat) / d * eye) / eps


# ---------------------------------------------------------------------------
# Record serialization: {theta_rad, phi_rad, observable, line, value, ...}
# ---------------------------------------------------------------------------


def records_to_json(records: list[TomographyRecord]) -> list[dict]:
    return [
        {
            "theta_rad": r.setting.theta,
            "phi_rad": r.setting.phi,
            "observable": r.setting.observable_label,
            "line": r.setting.line,
            "value": r.value,
            "noise_sigma": r.noise_sigma,
        }
        for r in records
    ]


def records_from_json(objs: list[dict], d: int) -> list[TomographyRecord]:
    ops = spin_operators((d - 1) / 2.0)
    basis = operator_basis(d)
    eye = Unitary.identity(d)
    records = []
    for o in objs:
        label = o["observable"]
        theta = float(o["theta_rad"])
        phi = float(o["phi_rad"])
        if label.startswith("basis:"):
            setting = ReadoutSetting(
                rotation=eye,
                observable=basis[int(label.split(":")[1])],
                theta=theta,
                phi=phi,
                observable_label=label,
                line=None,
            )
        else:
            total = ops.ix if label == "Ix" else ops.iy
            line = o.get("line")
            obs = total if line is None else _line_observable(total, int(line))
            setting = ReadoutSetting(
                rotation=_rotation(d, theta, phi),
                observable=obs,
                theta=theta,
                phi=phi,
                observable_label=label,
                line=None if line is None else int(line),
            )
        records.append(
            TomographyRecord(
                setting=setting,
                value=float(o["value"]),
                noise_sigma=float(o.get("noise_sigma", 0.0)),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Bar-representation figure data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BarFigure:
    """Real and imaginary d x d grids of a (deviation) density matrix."""

    re: np.ndarray
    im: np.ndarray
    labels: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "re": [[float(x) for x in row] for row in self.re],
            "im": [[float(x) for x in row] for row in self.im],
            "labels": list(self.labels),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BarFigure":
        return cls(
            re=np.asarray(obj["re"], dtype=float),
            im=np.asarray(obj["im"], dtype=float),
            labels=tuple(obj["labels"]),
        )

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["part", "basis", *self.labels])
        for part, grid in (("re", self.re), ("im", self.im)):
            for label, row in zip(self.labels, grid):
                writer.writerow([part, label, *[repr(float(x)) for x in row]])
        return out.getvalue()


def bar_representation(rho: DensityMatrix | np.ndarray) -> BarFigure:
    """Figure data for the matrix-element bar charts."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    d = mat.shape[0]
    labels = tuple(f"|{j}>" for j in range(1, d + 1))
    return BarFigure(re=mat.real.copy(), im=mat.imag.copy(), labels=labels)
