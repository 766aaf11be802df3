import numpy as np
import pytest

from qqlab.parity import Permutation, permutation_unitary
from qqlab.qudit import DensityMatrix, Unitary, compose, dagger, fourier_unitary
from qqlab.spins import (
    HardwareBounds,
    NonHermitianError,
    PulseBlock,
    PulseSequence,
    SpinSystem,
    ThermalModel,
    deviation_part,
    epsilon_of,
    evolve_density,
    propagator,
    pseudo_pure,
    rotating_frame_hamiltonian,
    sequence_propagator,
    spin_operators,
    static_hamiltonian,
)

TWO_PI = 2 * np.pi
W_Q = TWO_PI * 10e3
W_L = TWO_PI * 105.8e6


def quad_only_system():
    with pytest.warns(UserWarning):
        return SpinSystem(spin=1.5, larmor_freq=0.0, quad_freq=W_Q)


def random_hermitian(rng, d, scale=1.0):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (a + a.conj().T) / 2


def random_unitary(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return Unitary(q * (np.diag(r) / np.abs(np.diag(r))))


# ---------------------------------------------------------------------------
# Spin operators
# ---------------------------------------------------------------------------


def test_iz_diagonal_for_spin_three_halves():
    ops = spin_operators(1.5)
    assert np.abs(ops.iz - np.diag([1.5, 0.5, -0.5, -1.5])).max() == 0


def test_total_spin_squared_is_scalar():
    ops = spin_operators(1.5)
    assert np.array_equal(ops.isq, (15 / 4) * np.eye(4))


def test_spin_half_ix_is_half_pauli_x():
    ops = spin_operators(0.5)
    assert np.abs(ops.ix - 0.5 * np.array([[0, 1], [1, 0]])).max() < 1e-15


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.5])
def test_commutation_relations(s):
    ops = spin_operators(s)
    for a, b, c in ((ops.ix, ops.iy, ops.iz), (ops.iy, ops.iz, ops.ix), (ops.iz, ops.ix, ops.iy)):
        assert np.abs(a @ b - b @ a - 1j * c).max() < 1e-12


def test_spin_operators_reject_bad_spin():
    with pytest.raises(ValueError):
        spin_operators(0.7)


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


def test_static_hamiltonian_pure_quadrupolar():
    # 3 Iz^2 - I^2 = diag(3, -3, -3, 3) for s = 3/2.
    h = static_hamiltonian(quad_only_system())
    assert np.abs(h - (W_Q / 2) * np.diag([1, -1, -1, 1])).max() < 1e-9


def test_static_hamiltonian_zeeman_only():
    sys = SpinSystem(spin=1.5, larmor_freq=TWO_PI * 1e6, quad_freq=0.0)
    h = static_hamiltonian(sys)
    expected = -TWO_PI * 1e6 * np.diag([1.5, 0.5, -0.5, -1.5])
    assert np.abs(h - expected).max() < 1e-6


def test_single_quantum_transitions_split_by_quad_frequency():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=W_Q)
    evals = np.sort(np.linalg.eigvalsh(static_hamiltonian(sys)))
    gaps = np.diff(evals)
    expected = np.array([W_L - W_Q, W_L, W_L + W_Q])
    assert np.abs(gaps / expected - 1).max() < 1e-9


def test_rotating_frame_without_rf_is_quadrupolar():
    block = PulseBlock(amplitude=0.0, phase=0.0, duration=1e-5)
    h = rotating_frame_hamiltonian(quad_only_system(), block)
    assert np.abs(h - (W_Q / 2) * np.diag([1, -1, -1, 1])).max() < 1e-9


def test_rotating_frame_x_pulse():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=0.0)
    block = PulseBlock(amplitude=1000.0, phase=0.0, duration=1e-5)
    h = rotating_frame_hamiltonian(sys, block)
    assert np.abs(h - 1000.0 * spin_operators(1.5).ix).max() < 1e-12


def test_rotating_frame_y_pulse():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=0.0)
    block = PulseBlock(amplitude=1000.0, phase=np.pi / 2, duration=1e-5)
    h = rotating_frame_hamiltonian(sys, block)
    assert np.abs(h - 1000.0 * spin_operators(1.5).iy).max() < 1e-9


def test_hamiltonians_are_hermitian():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=W_Q, offset_freq=100.0)
    block = PulseBlock(amplitude=5e4, phase=1.234, duration=2e-5)
    for h in (static_hamiltonian(sys), rotating_frame_hamiltonian(sys, block)):
        assert np.abs(h - h.conj().T).max() < 1e-12


# ---------------------------------------------------------------------------
# Propagators
# ---------------------------------------------------------------------------


def test_propagator_at_zero_time_is_identity():
    rng = np.random.default_rng(2)
    u = propagator(random_hermitian(rng, 4, scale=1e4), 0.0)
    assert np.abs(u.entries - np.eye(4)).max() < 1e-12


def test_quadrupolar_full_period_gives_minus_identity():
    h = static_hamiltonian(quad_only_system())
    u = propagator(h, TWO_PI / W_Q)
    assert np.abs(u.entries + np.eye(4)).max() < 1e-12


def test_pi_pulse_on_spin_half():
    # exp(-i w1 Ix t) at t = pi/w1 equals -i sigma_x for s = 1/2.
    w1 = 1e4
    u = propagator(w1 * spin_operators(0.5).ix, np.pi / w1)
    expected = -1j * np.array([[0, 1], [1, 0]])
    assert np.abs(u.entries - expected).max() < 1e-12


def test_propagator_rejects_non_hermitian():
    with pytest.raises(NonHermitianError):
        propagator(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)


def test_propagator_rejects_negative_time():
    with pytest.raises(ValueError):
        propagator(np.eye(2), -1.0)


def test_propagator_unitarity_over_1000_random_cases():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        h = random_hermitian(rng, 4, scale=rng.uniform(0.1, 100.0))
        t = rng.uniform(0.0, 1e3 / max(1e-12, np.abs(np.linalg.eigvalsh(h)).max()))
        u = propagator(h, t).entries
        assert np.linalg.norm(u.conj().T @ u - np.eye(4)) < 1e-12


def test_energy_conserved_under_own_hamiltonian():
    rng = np.random.default_rng(5)
    for _ in range(50):
        h = random_hermitian(rng, 4, scale=10.0)
        rho = pseudo_pure(2, 0.5)
        u = propagator(h, rng.uniform(0, 10.0))
        before = np.trace(h @ rho.entries).real
        after = np.trace(h @ evolve_density(rho, u).entries).real
        assert abs(before - after) < 1e-9


def test_sequence_single_block_full_period():
    seq = PulseSequence(
        (PulseBlock(amplitude=0.0, phase=0.0, duration=TWO_PI / W_Q),),
        quad_only_system(),
    )
    assert np.abs(sequence_propagator(seq).entries + np.eye(4)).max() < 1e-12


def test_sequence_two_identical_blocks_is_square():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=W_Q)
    block = PulseBlock(amplitude=3e4, phase=0.7, duration=1.7e-5)
    single = sequence_propagator(PulseSequence((block,), sys)).entries
    double = sequence_propagator(PulseSequence((block, block), sys)).entries
    assert np.abs(double - single @ single).max() < 1e-12


def test_phase_inverted_mirror_inverts_sequence_without_quad():
    # With w_Q = 0 each block Hamiltonian flips sign under phase + pi, so the
    # reversed mirror is the exact inverse.
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=0.0)
    rng = np.random.default_rng(8)
    blocks = tuple(
        PulseBlock(
            amplitude=rng.uniform(0, TWO_PI * 25e3),
            phase=rng.uniform(0, TWO_PI),
            duration=rng.uniform(1e-6, 5e-5),
        )
        for _ in range(5)
    )
    mirror = tuple(
        PulseBlock(b.amplitude, b.phase + np.pi, b.duration) for b in reversed(blocks)
    )
    u = sequence_propagator(PulseSequence(blocks + mirror, sys)).entries
    assert np.abs(u - np.eye(4)).max() < 1e-10


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        PulseSequence((), SpinSystem())


# ---------------------------------------------------------------------------
# Thermal model and pseudo-pure states
# ---------------------------------------------------------------------------


def test_epsilon_against_independent_constants():
    # hbar w_L / (4 kB T) with the exact SI values of h and kB.
    h_planck = 6.62607015e-34
    k_b = 1.380649e-23
    expected = h_planck * 105.8e6 / (4 * k_b * 298.15)
    got = epsilon_of(298.15, TWO_PI * 105.8e6)
    assert got == pytest.approx(expected, rel=1e-12)
    assert 1e-6 < got < 1e-4


def test_epsilon_linear_in_temperature_and_frequency():
    base = epsilon_of(298.15, W_L)
    assert epsilon_of(2 * 298.15, W_L) == pytest.approx(base / 2, rel=1e-12)
    assert epsilon_of(298.15, 2 * W_L) == pytest.approx(2 * base, rel=1e-12)


def test_epsilon_rejects_nonpositive_temperature():
    with pytest.raises(ValueError):
        epsilon_of(0.0, W_L)


def test_thermal_model_computes_epsilon():
    model = ThermalModel.at(298.15, W_L)
    assert model.epsilon == pytest.approx(epsilon_of(298.15, W_L), rel=1e-15)


def test_thermal_model_rejects_inconsistent_epsilon():
    with pytest.raises(ValueError):
        ThermalModel(temperature=298.15, larmor_freq=W_L, epsilon=1e-3)


def test_pseudo_pure_full_polarization_is_projector():
    rho = pseudo_pure(2, 1.0)
    expected = np.zeros((4, 4))
    expected[1, 1] = 1.0
    assert np.abs(rho.entries - expected).max() < 1e-15


def test_pseudo_pure_small_epsilon_near_maximally_mixed():
    rho = pseudo_pure(2, 1e-9)
    assert np.abs(rho.entries - np.eye(4) / 4).max() < 1e-9


def test_pseudo_pure_eigenvalues():
    eps = 1e-5
    evals = np.sort(np.linalg.eigvalsh(pseudo_pure(2, eps).entries))
    expected = np.sort([(1 - eps) / 4] * 3 + [(1 + 3 * eps) / 4])
    assert np.abs(evals - expected).max() < 1e-15
    assert abs(np.trace(pseudo_pure(2, eps).entries) - 1) < 1e-15


def test_pseudo_pure_deviation_is_traceless():
    rho = pseudo_pure(3, 1e-5)
    assert abs(np.trace(deviation_part(rho))) < 1e-15


def test_pseudo_pure_rejects_bad_epsilon():
    for eps in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            pseudo_pure(2, eps)


# ---------------------------------------------------------------------------
# Density evolution
# ---------------------------------------------------------------------------


def test_identity_component_invariant():
    rng = np.random.default_rng(12)
    rho = DensityMatrix(np.eye(4) / 4)
    out = evolve_density(rho, random_unitary(rng, 4))
    assert np.abs(out.entries - np.eye(4) / 4).max() < 1e-14


def test_permutation_relabels_populations():
    rho = pseudo_pure(2, 1.0)
    u = permutation_unitary(Permutation((2, 3, 4, 1)))
    out = evolve_density(rho, u)
    assert np.abs(out.entries - pseudo_pure(3, 1.0).entries).max() < 1e-14


def test_full_circuit_maps_pseudo_pure_two_to_four():
    eps = 1e-5
    uft = fourier_unitary(4)
    circuit = compose(dagger(uft), permutation_unitary(Permutation((3, 2, 1, 4))), uft)
    out = evolve_density(pseudo_pure(2, eps), circuit)
    assert np.abs(out.entries - pseudo_pure(4, eps).entries).max() < 1e-10


def test_evolution_preserves_trace_and_positivity():
    rng = np.random.default_rng(13)
    rho = pseudo_pure(2, 0.3)
    for _ in range(100):
        out = evolve_density(rho, random_unitary(rng, 4))
        assert abs(np.trace(out.entries) - 1) < 1e-12
        assert np.linalg.eigvalsh(out.entries).min() > -1e-12


# ---------------------------------------------------------------------------
# Types, bounds, serialization
# ---------------------------------------------------------------------------


def test_spin_system_dim_and_config_round_trip():
    sys = SpinSystem(spin=1.5, larmor_freq=W_L, quad_freq=W_Q, offset_freq=0.0)
    assert sys.dim == 4
    back = SpinSystem.from_config(sys.to_config())
    assert back.spin == sys.spin
    assert back.larmor_freq == pytest.approx(sys.larmor_freq, rel=1e-15)
    assert back.quad_freq == pytest.approx(sys.quad_freq, rel=1e-15)


def test_spin_system_parses_fraction_strings():
    sys = SpinSystem.from_config({"spin": "3/2", "larmor_mhz": 105.8, "quad_khz": 10.0})
    assert sys.spin == 1.5 and sys.dim == 4


def test_spin_system_warns_when_larmor_does_not_dominate():
    with pytest.warns(UserWarning):
        SpinSystem(spin=1.5, larmor_freq=TWO_PI * 20e3, quad_freq=W_Q)


def test_pulse_block_validation_and_json_round_trip():
    with pytest.raises(ValueError):
        PulseBlock(amplitude=-1.0, phase=0.0, duration=1e-6)
    with pytest.raises(ValueError):
        PulseBlock(amplitude=1.0, phase=0.0, duration=0.0)
    block = PulseBlock(amplitude=TWO_PI * 12.5e3, phase=0.25, duration=3.5e-6)
    back = PulseBlock.from_json(block.to_json())
    assert back.amplitude == pytest.approx(block.amplitude, rel=1e-12)
    assert back.phase == pytest.approx(block.phase, rel=1e-12)
    assert back.duration == pytest.approx(block.duration, rel=1e-12)


def test_hardware_bounds_admits():
    bounds = HardwareBounds()
    assert bounds.admits(PulseBlock(amplitude=TWO_PI * 25e3, phase=0.0, duration=1e-5))
    assert not bounds.admits(PulseBlock(amplitude=TWO_PI * 26e3, phase=0.0, duration=1e-5))
    assert not bounds.admits(PulseBlock(amplitude=0.0, phase=0.0, duration=1e-3))


def test_sequence_total_duration_and_json():
    sys = SpinSystem()
    blocks = (
        PulseBlock(amplitude=1e4, phase=0.0, duration=2e-6),
        PulseBlock(amplitude=2e4, phase=1.0, duration=3e-6),
    )
    seq = PulseSequence(blocks, sys)
    assert seq.total_duration == pytest.approx(5e-6, rel=1e-12)
    back = PulseSequence.from_json(seq.to_json(), sys)
    assert len(back.blocks) == 2
    assert back.blocks[1].phase == pytest.approx(1.0, rel=1e-12)
