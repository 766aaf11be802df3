"""Spin-3/2 quadrupolar NMR model: operators, Hamiltonians, propagators.

All frequencies are angular (rad/s) and hbar = 1 internally, so Hamiltonians
are returned divided by hbar. The simulation lives in the frame rotating at
the Larmor frequency: the static quadrupolar term survives, rf pulses appear
as static transverse fields, and an optional resonance offset defaults to
zero. Closed-system dynamics only; no relaxation.

Unit conversions (kHz, MHz, us, degrees) happen at the JSON/CLI boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.constants import hbar as HBAR, k as K_BOLTZMANN

from .qudit import DensityMatrix, Unitary

TWO_PI = 2.0 * np.pi

# |larmor| below this multiple of |quad| voids the rotating-frame picture.
LARMOR_DOMINANCE_FACTOR = 10.0

HERMITICITY_TOL = 1e-10


class NonHermitianError(ValueError):
    """Input matrix is not Hermitian within tolerance."""


# ---------------------------------------------------------------------------
# Angular momentum operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpinOperators:
    """Cartesian spin matrices for one spin-s site, in units of hbar."""

    spin: float
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray
    isq: np.ndarray

    @property
    def dim(self) -> int:
        return self.iz.shape[0]


def _check_half_integer(s: float) -> int:
    twice = round(2 * s)
    if twice < 1 or abs(2 * s - twice) > 1e-12:
        raise ValueError(f"spin must be a positive half-integer, got {s}")
    return twice


@lru_cache(maxsize=None)
def _spin_operators_cached(twice_s: int) -> SpinOperators:
    s = twice_s / 2.0
    dim = twice_s + 1
    m = s - np.arange(dim)  # rows ordered m = s, s-1, ..., -s
    iz = np.diag(m).astype(complex)
    iplus = np.zeros((dim, dim), dtype=complex)
    for row in range(dim - 1):
        mm = m[row + 1]  # raising |m> -> |m+1> with weight sqrt(s(s+1)-m(m+1))
        iplus[row, row + 1] = np.sqrt(s * (s + 1) - mm * (mm + 1))
    ix = (iplus + iplus.conj().T) / 2.0
    iy = (iplus - iplus.conj().T) / 2j
    isq = s * (s + 1) * np.eye(dim, dtype=complex)
    for arr in (ix, iy, iz, isq):
        arr.flags.writeable = False
    return SpinOperators(spin=s, ix=ix, iy=iy, iz=iz, isq=isq)


def spin_operators(s: float) -> SpinOperators:
    """Build (and cache) Ix, Iy, Iz, I^2 for half-integer or integer spin s."""
    return _spin_operators_cached(_check_half_integer(s))


# ---------------------------------------------------------------------------
# System and pulse types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpinSystem:
    """Quadrupolar spin site: spin quantum number and frequencies in rad/s.

    ``offset_freq`` is the rotating-frame resonance offset delta = w_L - w_rf
    and defaults to on-resonance (0).
    """

    spin: float = 1.5
    larmor_freq: float = TWO_PI * 105.8e6
    quad_freq: float = TWO_PI * 10e3
    offset_freq: float = 0.0

    def __post_init__(self):
        _check_half_integer(self.spin)
        if self.quad_freq != 0.0 and abs(self.larmor_freq) < (
            LARMOR_DOMINANCE_FACTOR * abs(self.quad_freq)
        ):
            warnings.warn(
                "larmor frequency does not dominate the quadrupolar frequency; "
                "the rotating-frame secular approximation is questionable",
                stacklevel=2,
            )

    @property
    def dim(self) -> int:
        return round(2 * self.spin) + 1

    @property
    def operators(self) -> SpinOperators:
        return spin_operators(self.spin)

    def to_config(self) -> dict:
        twice = round(2 * self.spin)
        spin_str = f"{twice // 2}" if twice % 2 == 0 else f"{twice}/2"
        return {
            "spin": spin_str,
            "larmor_mhz": self.larmor_freq / TWO_PI / 1e6,
            "quad_khz": self.quad_freq / TWO_PI / 1e3,
            "offset_hz": self.offset_freq / TWO_PI,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "SpinSystem":
        raw = cfg.get("spin", "3/2")
        if isinstance(raw, str) and "/" in raw:
            num, den = raw.split("/")
            spin = float(num) / float(den)
        else:
            spin = float(raw)
        return cls(
            spin=spin,
            larmor_freq=TWO_PI * float(cfg.get("larmor_mhz", 105.8)) * 1e6,
            quad_freq=TWO_PI * float(cfg.get("quad_khz", 10.0)) * 1e3,
            offset_freq=TWO_PI * float(cfg.get("offset_hz", 0.0)),
        )


@dataclass(frozen=True)
class PulseBlock:
    """One piecewise-constant rf segment: amplitude (rad/s), phase (rad), duration (s)."""

    amplitude: float
    phase: float
    duration: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if self.duration <= 0:
            raise ValueError(f"duration must be > 0, got {self.duration}")
        if not np.isfinite(self.phase):
            raise ValueError(f"phase must be finite, got {self.phase}")

    def to_json(self) -> dict:
        return {
            "amp_khz": self.amplitude / TWO_PI / 1e3,
            "phase_deg": float(np.degrees(self.phase)),
            "dur_us": self.duration * 1e6,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PulseBlock":
        return cls(
            amplitude=TWO_PI * float(obj["amp_khz"]) * 1e3,
            phase=float(np.radians(obj["phase_deg"])),
            duration=float(obj["dur_us"]) * 1e-6,
        )


@dataclass(frozen=True)
class HardwareBounds:
    """Feasible box for pulse parameters; engineering defaults, not physics."""

    max_amplitude: float = TWO_PI * 25e3
    min_duration: float = 0.5e-6
    max_duration: float = 200e-6

    def __post_init__(self):
        if not 0 < self.min_duration < self.max_duration:
            raise ValueError("need 0 < min_duration < max_duration")
        if self.max_amplitude <= 0:
            raise ValueError("max_amplitude must be positive")

    def admits(self, block: PulseBlock) -> bool:
        return (
            block.amplitude <= self.max_amplitude * (1 + 1e-12)
            and self.min_duration * (1 - 1e-12)
            <= block.duration
            <= self.max_duration * (1 + 1e-12)
        )

    def to_json(self) -> dict:
        return {
            "max_amplitude_khz": self.max_amplitude / TWO_PI / 1e3,
            "min_duration_us": self.min_duration * 1e6,
            "max_duration_us": self.max_duration * 1e6,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "HardwareBounds":
        return cls(
            max_amplitude=TWO_PI * float(obj["max_amplitude_khz"]) * 1e3,
            min_duration=float(obj["min_duration_us"]) * 1e-6,
            max_duration=float(obj["max_duration_us"]) * 1e-6,
        )


@dataclass(frozen=True)
class PulseSequence:
    """Ordered rf blocks applied to one spin system, first block first."""

    blocks: tuple[PulseBlock, ...]
    system: SpinSystem

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("pulse sequence must contain at least one block")
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def total_duration(self) -> float:
        return sum(b.duration for b in self.blocks)

    def to_json(self) -> list[dict]:
        return [b.to_json() for b in self.blocks]

    @classmethod
    def from_json(cls, obj: list, system: SpinSystem) -> "PulseSequence":
        return cls(tuple(PulseBlock.from_json(b) for b in obj), system)


@dataclass(frozen=True)
class ThermalModel:
    """High-temperature NMR polarization epsilon = hbar*w_L / (4 k_B T)."""

    temperature: float
    larmor_freq: float
    epsilon: float = field(default=0.0)

    def __post_init__(self):
        expected = epsilon_of(self.temperature, self.larmor_freq)
        eps = self.epsilon if self.epsilon else expected
        if abs(eps - expected) > 1e-15 * abs(expected):
            raise ValueError(
                f"epsilon {eps!r} inconsistent with T = {self.temperature} K "
                f"and w_L = {self.larmor_freq} rad/s (expected {expected!r})"
            )
        object.__setattr__(self, "epsilon", eps)

    @classmethod
    def at(cls, temperature: float, larmor_freq: float) -> "ThermalModel":
        return cls(temperature=temperature, larmor_freq=larmor_freq)


# ---------------------------------------------------------------------------
# Hamiltonians and propagators
# ---------------------------------------------------------------------------


def static_hamiltonian(sys: SpinSystem) -> np.ndarray:
    """Lab-frame H/hbar = -w_L Iz + (w_Q/6)(3 Iz^2 - I^2), in rad/s."""
    ops = sys.operators
    return (
        -sys.larmor_freq * ops.iz
        + (sys.quad_freq / 6.0) * (3.0 * ops.iz @ ops.iz - ops.isq)
    )


def rotating_frame_hamiltonian(sys: SpinSystem, block: PulseBlock) -> np.ndarray:
    """Rotating-frame H/hbar during one rf block, in rad/s.

    H = -delta Iz + (w_Q/6)(3 Iz^2 - I^2) + w_1 (Ix cos(phi) + Iy sin(phi)).
    """
    ops = sys.operators
    h = (sys.quad_freq / 6.0) * (3.0 * ops.iz @ ops.iz - ops.isq)
    if sys.offset_freq:
        h = h - sys.offset_freq * ops.iz
    if block.amplitude:
        h = h + block.amplitude * (
            np.cos(block.phase) * ops.ix + np.sin(block.phase) * ops.iy
        )
    return h


def propagator(hamiltonian: np.ndarray, t: float) -> Unitary:
    """exp(-i H t) for Hermitian H (rad/s) via eigendecomposition."""
    h = np.asarray(hamiltonian, dtype=complex)
    scale = max(1.0, np.abs(h).max())
    if np.abs(h - h.conj().T).max() > HERMITICITY_TOL * scale:
        raise NonHermitianError("propagator requires a Hermitian matrix")
    if t < 0:
        raise ValueError(f"duration must be >= 0, got {t}")
    w, v = np.linalg.eigh(h)
    return Unitary((v * np.exp(-1j * w * t)) @ v.conj().T)


def sequence_propagator(seq: PulseSequence) -> Unitary:
    """Net propagator U_n ... U_2 U_1 with block 1 applied first."""
    total = np.eye(seq.system.dim, dtype=complex)
    for block in seq.blocks:
        u = propagator(rotating_frame_hamiltonian(seq.system, block), block.duration)
        total = u.entries @ total
    return Unitary(total)


# ---------------------------------------------------------------------------
# Thermal state model
# ---------------------------------------------------------------------------


def epsilon_of(temperature: float, larmor_freq: float) -> float:
    """hbar * w_L / (4 k_B T), the deviation-matrix scale at temperature T."""
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature} K")
    return HBAR * larmor_freq / (4.0 * K_BOLTZMANN * temperature)


def pseudo_pure(state_index: int, eps: float, dim: int = 4) -> DensityMatrix:
    """rho = (1 - eps)/dim * I + eps |i><i| with 1-based state_index.

    eps = 1 is allowed and gives the pure projector.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not 1 <= state_index <= dim:
        raise ValueError(f"state index {state_index} not in 1..{dim}")
    mat = ((1.0 - eps) / dim) * np.eye(dim, dtype=complex)
    mat[state_index - 1, state_index - 1] += eps
    return DensityMatrix(mat)


def evolve_density(rho: DensityMatrix, u: Unitary) -> DensityMatrix:
    """U rho U^dag; the I/d component is exactly invariant."""
    if rho.dim != u.dim:
        raise ValueError(f"density dim {rho.dim} != unitary dim {u.dim}")
    return DensityMatrix(u.entries @ rho.entries @ u.entries.conj().T)


def deviation_part(rho: DensityMatrix | np.ndarray) -> np.ndarray:
    """Traceless deviation rho - I/d (the only part NMR detects)."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    d = mat.shape[0]
    return mat - np.trace(mat) / d * np.eye(d)
