"""Hamiltonian construction, propagation and fidelity."""

import math

import numpy as np
import pytest

from dcrab.quantum import (
    SpinProblem,
    build_hamiltonians,
    default_steps,
    fidelity,
    midpoint_grid,
    propagate,
    random_state,
)

KET0 = np.array([1.0, 0.0], dtype=complex)
KET1 = np.array([0.0, 1.0], dtype=complex)
PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)


def taylor_expm(matrix: np.ndarray) -> np.ndarray:
    """Brute-force matrix exponential by Taylor summation to convergence."""
    result = np.eye(matrix.shape[0], dtype=complex)
    term = np.eye(matrix.shape[0], dtype=complex)
    for order in range(1, 200):
        term = term @ matrix / order
        result = result + term
        if np.max(np.abs(term)) < 1e-20:
            return result
    raise RuntimeError("Taylor series did not converge")


def test_single_qubit_hamiltonians():
    drift, control = build_hamiltonians(1, [0.0], [1.0])
    assert np.array_equal(drift, np.diag([1.0, -1.0]))
    assert np.array_equal(control, np.zeros((2, 2)))


def test_two_qubit_hamiltonians():
    drift, control = build_hamiltonians(2, [1.0, 0.0], [0.0, 1.0])
    assert np.array_equal(np.diag(drift), [1.0, -1.0, 1.0, -1.0])
    assert np.array_equal(np.diag(control), [1.0, -1.0, -1.0, 1.0])
    # sigma_x on qubit 0 connects basis states differing in the first qubit
    off = drift - np.diag(np.diag(drift))
    expected = np.zeros((4, 4))
    expected[0, 2] = expected[2, 0] = 1.0
    expected[1, 3] = expected[3, 1] = 1.0
    assert np.array_equal(off, expected)


def test_three_qubit_hamiltonians_hermitian_traceless():
    rng = np.random.default_rng(5)
    drift, control = build_hamiltonians(3, rng.random(3), rng.random(3))
    assert np.array_equal(drift, drift.T.conj())
    assert np.array_equal(control, control.T.conj())
    assert abs(np.trace(drift)) < 1e-14
    assert abs(np.trace(control)) < 1e-14


def test_hamiltonian_dimension_mismatch():
    with pytest.raises(ValueError):
        build_hamiltonians(2, [0.1], [0.2, 0.3])


def _problem(n_qubits, alphas, betas, initial, target, total_time):
    return SpinProblem.from_couplings(
        n_qubits, alphas, betas, initial, target, total_time
    )


def test_propagate_bit_flip():
    # drift = sigma_x, T = pi/2 maps |0> to |1> up to phase
    problem = _problem(1, [1.0], [0.0], KET0, KET1, math.pi / 2.0)
    final = propagate(problem, np.zeros(64))
    assert fidelity(final, KET1) == pytest.approx(1.0, abs=1e-12)


def test_propagate_phase_rotation():
    problem = _problem(1, [0.0], [1.0], PLUS, MINUS, math.pi / 2.0)
    final = propagate(problem, np.zeros(64))
    assert fidelity(final, MINUS) == pytest.approx(1.0, abs=1e-12)


def test_propagate_matches_taylor_oracle():
    # constant pulse; oracle applies a Taylor-series exponential with dt=1e-4
    rng = np.random.default_rng(7)
    alphas, betas = rng.random(2), rng.random(2)
    initial = random_state(4, rng)
    target = random_state(4, rng)
    problem = _problem(2, alphas, betas, initial, target, 1.0)

    n_fine = 10_000
    step = taylor_expm(-1j * (problem.drift + 0.7 * problem.control) * 1e-4)
    reference = initial.copy()
    for _ in range(n_fine):
        reference = step @ reference

    final = propagate(problem, np.full(512, 0.7))
    assert np.linalg.norm(final - reference) < 1e-8


def test_propagate_rejects_bad_pulses():
    problem = _problem(1, [1.0], [0.0], KET0, KET1, 1.0)
    with pytest.raises(ValueError):
        propagate(problem, np.array([0.1, math.nan]))
    with pytest.raises(ValueError):
        propagate(problem, np.array([]))


def test_unitarity_randomized():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n_qubits = int(rng.integers(1, 4))
        dim = 2**n_qubits
        problem = _problem(
            n_qubits,
            rng.random(n_qubits),
            rng.random(n_qubits),
            random_state(dim, rng),
            random_state(dim, rng),
            float(rng.uniform(0.1, 10.0)),
        )
        values = rng.normal(scale=2.0, size=int(rng.integers(1, 40)))
        assert abs(np.linalg.norm(propagate(problem, values)) - 1.0) < 1e-12


def test_composition_of_half_evolutions():
    rng = np.random.default_rng(13)
    problem = _problem(
        2, rng.random(2), rng.random(2), random_state(4, rng), random_state(4, rng), 4.0
    )
    values = rng.normal(size=128)
    full = propagate(problem, values)

    first = _problem(
        2, problem.alphas, problem.betas, problem.initial, problem.target, 2.0
    )
    mid_state = propagate(first, values[:64])
    second = _problem(2, problem.alphas, problem.betas, mid_state, problem.target, 2.0)
    assert np.linalg.norm(propagate(second, values[64:]) - full) < 1e-12


def test_second_order_convergence():
    rng = np.random.default_rng(17)
    problem = _problem(
        2, rng.random(2), rng.random(2), random_state(4, rng), random_state(4, rng), 3.0
    )

    def smooth_pulse(grid):
        return np.sin(1.3 * grid) + 0.5 * np.cos(2.7 * grid)

    reference = propagate(problem, smooth_pulse(midpoint_grid(3.0, 256 * 64)))
    err_coarse = np.linalg.norm(
        propagate(problem, smooth_pulse(midpoint_grid(3.0, 256))) - reference
    )
    err_fine = np.linalg.norm(
        propagate(problem, smooth_pulse(midpoint_grid(3.0, 512))) - reference
    )
    assert 2.5 < err_coarse / err_fine < 6.0


def test_fidelity_examples():
    assert fidelity(KET0, KET0) == pytest.approx(1.0)
    assert fidelity(KET0, KET1) == pytest.approx(0.0)
    assert fidelity(PLUS, KET0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fidelity(KET0, np.ones(4, dtype=complex) / 2.0)


def test_fidelity_global_phase_invariance():
    rng = np.random.default_rng(19)
    for _ in range(25):
        a, b = random_state(8, rng), random_state(8, rng)
        phase = np.exp(1j * rng.uniform(0, 2 * math.pi))
        assert fidelity(phase * a, b) == pytest.approx(fidelity(a, b), abs=1e-14)
        assert fidelity(a, phase * b) == pytest.approx(fidelity(a, b), abs=1e-14)


def test_random_state_properties():
    rng = np.random.default_rng(23)
    state = random_state(8, rng)
    assert abs(np.linalg.norm(state) - 1.0) < 1e-12
    assert np.array_equal(
        random_state(8, np.random.default_rng(42)),
        random_state(8, np.random.default_rng(42)),
    )
    with pytest.raises(ValueError):
        random_state(1, rng)


def test_random_state_haar_moment():
    rng = np.random.default_rng(29)
    samples = np.array([abs(random_state(4, rng)[0]) ** 2 for _ in range(10_000)])
    assert samples.mean() == pytest.approx(0.25, abs=0.01)


def test_default_steps_floor_and_scaling():
    assert default_steps(1.0, 1.0) == 512
    total_time = 16 * math.pi
    omega = 40 * 2 * math.pi / total_time
    assert default_steps(total_time, omega) == 800


def test_midpoint_grid():
    grid = midpoint_grid(2.0, 4)
    assert np.allclose(grid, [0.25, 0.75, 1.25, 1.75])
    with pytest.raises(ValueError):
        midpoint_grid(2.0, 0)


def test_problem_validation():
    with pytest.raises(ValueError):
        _problem(1, [1.5], [0.0], KET0, KET1, 1.0)
    with pytest.raises(ValueError):
        _problem(1, [1.0], [0.0], KET0, KET1, -1.0)
    with pytest.raises(ValueError):
        _problem(1, [1.0], [0.0], 2.0 * KET0, KET1, 1.0)
