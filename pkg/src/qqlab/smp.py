"""Strong-modulating-pulse synthesis by multi-start derivative-free search.

A target gate is approximated by the net propagator of a short train of
rectangular rf blocks. The three physical knobs per block (amplitude, phase,
duration) are optimized through smooth sigmoid reparameterization onto the
hardware box, so the local search works in unconstrained coordinates and can
never leave the feasible region. The search itself is Nelder-Mead restarted
from seeded random points; only function values are used.

Everything here is deterministic for a fixed (seed, config, system) triple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import parity
from .qudit import Unitary, array_from_json, array_to_json, compose, dagger, fourier_unitary
from .spins import HardwareBounds, PulseBlock, PulseSequence, SpinSystem, sequence_propagator

# Spread of the seeded normal draws for initial internal coordinates.
INIT_SCALE = 1.5

# Sigmoid fractions are clipped here before logit, keeping encode() finite
# for boundary values such as amplitude 0.
_FRACTION_CLIP = 1e-16

RESULT_RECOMPUTE_TOL = 1e-12


class StaleResultError(ValueError):
    """Stored fidelity does not match a re-simulation of the stored sequence."""


@dataclass(frozen=True, eq=False)
class GateTarget:
    """A unitary to synthesize, tagged with a stable label for file naming."""

    label: str
    target: Unitary


@dataclass(frozen=True)
class OptimizerConfig:
    n_blocks: int = 8
    bounds: HardwareBounds = HardwareBounds()
    fidelity_goal: float = 0.99
    max_evals: int = 120_000
    n_restarts: int = 6
    rng_seed: int = 20240901

    def __post_init__(self):
        if not 1 <= self.n_blocks <= 16:
            raise ValueError(f"n_blocks must be in 1..16, got {self.n_blocks}")
        if not 0 < self.fidelity_goal <= 1:
            raise ValueError(f"fidelity_goal must be in (0, 1], got {self.fidelity_goal}")
        if self.max_evals < 1 or self.n_restarts < 1:
            raise ValueError("max_evals and n_restarts must be positive")

    def to_json(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "bounds": self.bounds.to_json(),
            "fidelity_goal": self.fidelity_goal,
            "max_evals": self.max_evals,
            "n_restarts": self.n_restarts,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "OptimizerConfig":
        return cls(
            n_blocks=int(obj["n_blocks"]),
            bounds=HardwareBounds.from_json(obj["bounds"]),
            fidelity_goal=float(obj["fidelity_goal"]),
            max_evals=int(obj["max_evals"]),
            n_restarts=int(obj["n_restarts"]),
            rng_seed=int(obj["rng_seed"]),
        )


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    label: str
    sequence: PulseSequence
    achieved_fidelity: float
    evals_used: int
    converged: bool
    seed: int
    restart_fidelities: tuple[float, ...]

    def to_json(self, target: Unitary, config: OptimizerConfig) -> dict:
        return {
            "label": self.label,
            "config": config.to_json(),
            "system": self.sequence.system.to_config(),
            "target": array_to_json(target.entries),
            "blocks": self.sequence.to_json(),
            "achieved_fidelity": self.achieved_fidelity,
            "evals_used": self.evals_used,
            "converged": self.converged,
            "seed": self.seed,
            "restart_fidelities": list(self.restart_fidelities),
        }


def gate_fidelity(u_target: Unitary, u_actual: Unitary) -> float:
    """|Tr(U_target^dag U_actual)| / d, insensitive to global phases."""
    if u_target.dim != u_actual.dim:
        raise ValueError(f"gate dims {u_target.dim} != {u_actual.dim}")
    overlap = np.trace(u_target.entries.conj().T @ u_actual.entries)
    return float(np.clip(abs(overlap) / u_target.dim, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Parameterization: 3 internal coordinates per block
# ---------------------------------------------------------------------------


def decode_params(
    params: np.ndarray, bounds: HardwareBounds
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map unconstrained coordinates to (amplitudes, phases, durations)."""
    p = np.asarray(params, dtype=float).reshape(-1, 3)
    amps = bounds.max_amplitude * expit(p[:, 0])
    phases = p[:, 1]
    durs = bounds.min_duration + (bounds.max_duration - bounds.min_duration) * expit(
        p[:, 2]
    )
    return amps, phases, durs


def decode_blocks(params: np.ndarray, bounds: HardwareBounds) -> tuple[PulseBlock, ...]:
    amps, phases, durs = decode_params(params, bounds)
    return tuple(
        PulseBlock(amplitude=a, phase=f, duration=t)
        for a, f, t in zip(amps, phases, durs)
    )


def encode_blocks(blocks, bounds: HardwareBounds) -> np.ndarray:
    """Inverse of decode_blocks; boundary values land on a clipped logit."""
    out = np.empty((len(blocks), 3), dtype=float)
    span = bounds.max_duration - bounds.min_duration
    for i, b in enumerate(blocks):
        amp_frac = np.clip(b.amplitude / bounds.max_amplitude, _FRACTION_CLIP, 1 - _FRACTION_CLIP)
        dur_frac = np.clip((b.duration - bounds.min_duration) / span, _FRACTION_CLIP, 1 - _FRACTION_CLIP)
        out[i] = (logit(amp_frac), b.phase, logit(dur_frac))
    return out.reshape(-1)


# ---------------------------------------------------------------------------
# Objective (hot path: raw arrays, no dataclass churn)
# ---------------------------------------------------------------------------


def _system_tables(system: SpinSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ops = system.operators
    h0 = (system.quad_freq / 6.0) * (3.0 * ops.iz @ ops.iz - ops.isq)
    if system.offset_freq:
        h0 = h0 - system.offset_freq * ops.iz
    return h0, ops.ix, ops.iy


def _raw_propagator(
    h0: np.ndarray,
    ix: np.ndarray,
    iy: np.ndarray,
    amps: np.ndarray,
    phases: np.ndarray,
    durs: np.ndarray,
) -> np.ndarray:
    total = np.eye(h0.shape[0], dtype=complex)
    for a, f, t in zip(amps, phases, durs):
        h = h0 + a * (np.cos(f) * ix + np.sin(f) * iy)
        w, v = np.linalg.eigh(h)
        total = (v * np.exp(-1j * w * t)) @ v.conj().T @ total
    return total


def objective(
    params: np.ndarray,
    target: GateTarget,
    system: SpinSystem,
    n_blocks: int,
    bounds: HardwareBounds = HardwareBounds(),
) -> float:
    """1 - gate_fidelity for the decoded sequence; pure and deterministic."""
    p = np.asarray(params, dtype=float)
    if p.size != 3 * n_blocks:
        raise ValueError(f"expected {3 * n_blocks} parameters, got {p.size}")
    h0, ix, iy = _system_tables(system)
    amps, phases, durs = decode_params(p, bounds)
    u = _raw_propagator(h0, ix, iy, amps, phases, durs)
    d = target.target.dim
    overlap = np.trace(target.target.entries.conj().T @ u)
    return float(1.0 - np.clip(abs(overlap) / d, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Multi-start search
# ---------------------------------------------------------------------------


def optimize(
    target: GateTarget, system: SpinSystem, cfg: OptimizerConfig
) -> OptimizationResult:
    """Best-of-n-restarts Nelder-Mead minimization of the gate infidelity.

    All restart starting points are drawn up front from a seeded generator;
    restarts stop early once the fidelity goal is met. Ties between restarts
    resolve to the lowest restart index, so the outcome does not depend on
    evaluation order.
    """
    if target.target.dim != system.dim:
        raise ValueError(
            f"target dim {target.target.dim} != system dim {system.dim}"
        )
    h0, ix, iy = _system_tables(system)
    tmat = target.target.entries.conj().T
    d = system.dim
    bounds = cfg.bounds

    def infidelity(p: np.ndarray) -> float:
        amps, phases, durs = decode_params(p, bounds)
        u = _raw_propagator(h0, ix, iy, amps, phases, durs)
        return float(1.0 - np.clip(abs(np.trace(tmat @ u)) / d, 0.0, 1.0))

    rng = np.random.default_rng(cfg.rng_seed)
    starts = rng.normal(0.0, INIT_SCALE, size=(cfg.n_restarts, 3 * cfg.n_blocks))
    per_restart = max(1, cfg.max_evals // cfg.n_restarts)

    evals_used = 0
    restart_fids: list[float] = []
    best_x = None
    best_fun = np.inf
    for x0 in starts:
        res = minimize(
            infidelity,
            x0,
            method="Nelder-Mead",
            options={
                "maxfev": per_restart,
                "adaptive": True,
                "xatol": 1e-9,
                "fatol": 1e-14,
            },
        )
        evals_used += int(res.nfev)
        restart_fids.append(1.0 - float(res.fun))
        if res.fun < best_fun:
            best_fun = float(res.fun)
            best_x = np.array(res.x)
        if 1.0 - best_fun >= cfg.fidelity_goal:
            break

    sequence = PulseSequence(decode_blocks(best_x, bounds), system)
    # Recompute through the public simulation path so the stored number is,
    # by construction, what a reader of the sequence will reproduce.
    achieved = gate_fidelity(target.target, sequence_propagator(sequence))
    return OptimizationResult(
        label=target.label,
        sequence=sequence,
        achieved_fidelity=achieved,
        evals_used=evals_used,
        converged=achieved >= cfg.fidelity_goal,
        seed=cfg.rng_seed,
        restart_fidelities=tuple(restart_fids),
    )


# ---------------------------------------------------------------------------
# Protocol gate set
# ---------------------------------------------------------------------------


def protocol_targets(d: int = 4) -> dict[str, GateTarget]:
    """The 4d + 1 gates the full protocol needs (17 for d = 4).

    One Fourier gate, one composite U_i U_FT per oracle, and one composite
    U_FT^dag U_i U_FT per oracle, each synthesized as a single sequence.
    """
    uft = fourier_unitary(d)
    uft_dag = dagger(uft)
    oset = parity.OracleSet.for_dimension(d)
    targets: dict[str, GateTarget] = {"UFT": GateTarget("UFT", uft)}
    for i, (perm, _) in enumerate(oset.members, start=1):
        u_i = parity.permutation_unitary(perm)
        targets[f"U{i}_UFT"] = GateTarget(f"U{i}_UFT", compose(u_i, uft))
        targets[f"UFT_inv_U{i}_UFT"] = GateTarget(
            f"UFT_inv_U{i}_UFT", compose(uft_dag, u_i, uft)
        )
    return targets


def synthesize_algorithm_gates(
    system: SpinSystem, cfg: OptimizerConfig
) -> dict[str, OptimizationResult]:
    """Optimize every protocol gate; per-target seeds derive from cfg.rng_seed."""
    results: dict[str, OptimizationResult] = {}
    for index, (label, target) in enumerate(protocol_targets(system.dim).items()):
        per_target = replace(cfg, rng_seed=cfg.rng_seed + index)
        results[label] = optimize(target, system, per_target)
    return results


# ---------------------------------------------------------------------------
# Gate library persistence: gates/<label>.json
# ---------------------------------------------------------------------------


def save_gate_library(
    results: dict[str, OptimizationResult],
    targets: dict[str, GateTarget],
    config: OptimizerConfig,
    directory: str | Path,
) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for label, result in results.items():
        path = directory / f"{label}.json"
        payload = result.to_json(targets[label].target, config)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def load_gate_result(path: str | Path, verify: bool = True) -> tuple[OptimizationResult, GateTarget]:
    """Load one stored gate; by default re-simulates and checks the fidelity."""
    obj = json.loads(Path(path).read_text())
    system = SpinSystem.from_config(obj["system"])
    sequence = PulseSequence.from_json(obj["blocks"], system)
    target = GateTarget(obj["label"], Unitary(array_from_json(obj["target"])))
    result = OptimizationResult(
        label=obj["label"],
        sequence=sequence,
        achieved_fidelity=float(obj["achieved_fidelity"]),
        evals_used=int(obj["evals_used"]),
        converged=bool(obj["converged"]),
        seed=int(obj["seed"]),
        restart_fidelities=tuple(float(f) for f in obj.get("restart_fidelities", ())),
    )
    if verify:
        recomputed = gate_fidelity(target.target, sequence_propagator(sequence))
        if abs(recomputed - result.achieved_fidelity) > RESULT_RECOMPUTE_TOL:
            raise StaleResultError(
                f"{path}: stored fidelity {result.achieved_fidelity!r} but "
                f"re-simulation gives {recomputed!r}"
            )
    return result, target


def load_gate_library(
    directory: str | Path, labels=None, verify: bool = True
) -> dict[str, tuple[OptimizationResult, GateTarget]]:
    directory = Path(directory)
    if labels is None:
        paths = sorted(directory.glob("*.json"))
    else:
        paths = [directory / f"{label}.json" for label in labels]
    out = {}
    for path in paths:
        if not path.exists():
            raise FileNotFoundError(f"missing gate file: {path}")
        result, target = load_gate_result(path, verify=verify)
        out[result.label] = (result, target)
    return out
