"""Dense spin-system dynamics: Hamiltonians, time evolution, fidelity.

States are complex vectors of dimension ``M = 2**n_qubits``; operators are
dense ``M x M`` arrays. Energies are dimensionless (hbar = 1) and time is
measured in the corresponding inverse-energy units. Qubit 0 is the leftmost
tensor factor, which fixes the basis-index convention ``|q0 q1 ... >``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

NORM_TOL = 1e-12


def _site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at `site` (0 = leftmost factor)."""
    left = np.eye(2**site)
    right = np.eye(2 ** (n_qubits - site - 1))
    return np.kron(np.kron(left, op), right)


def build_hamiltonians(
    n_qubits: int, alphas, betas
) -> tuple[np.ndarray, np.ndarray]:
    """Assemble the drift and control Hamiltonians of the random spin model.

    The drift is ``sum_i alpha_i X_i + beta_i Z_i``; the control couples
    nearest neighbours as ``sum_i Z_i Z_{i+1}`` (the zero matrix for a
    single qubit). Both are real symmetric, hence exactly Hermitian.
    """
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    if alphas.shape != (n_qubits,) or betas.shape != (n_qubits,):
        raise ValueError(
            "coefficient sequences must have length n_qubits="
            f"{n_qubits}, got {alphas.shape} and {betas.shape}"
        )
    dim = 2**n_qubits
    drift = np.zeros((dim, dim))
    for i in range(n_qubits):
        drift += alphas[i] * _site_operator(PAULI_X, i, n_qubits)
        drift += betas[i] * _site_operator(PAULI_Z, i, n_qubits)
    control = np.zeros((dim, dim))
    zz = np.kron(PAULI_Z, PAULI_Z)
    for i in range(n_qubits - 1):
        left = np.eye(2**i)
        right = np.eye(2 ** (n_qubits - i - 2))
        control += np.kron(np.kron(left, zz), right)
    return drift, control


@dataclass(frozen=True, eq=False)
class SpinProblem:
    """A state-transfer problem: Hamiltonian pair, endpoint states, duration."""

    n_qubits: int
    alphas: np.ndarray
    betas: np.ndarray
    drift: np.ndarray
    control: np.ndarray
    initial: np.ndarray
    target: np.ndarray
    total_time: float

    def __post_init__(self):
        dim = 2**self.n_qubits
        for name in ("alphas", "betas", "drift", "control", "initial", "target"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(complex) if name in ("initial", "target") else arr.astype(float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.total_time <= 0:
            raise ValueError(f"total_time must be positive, got {self.total_time}")
        if np.any(self.alphas < 0) or np.any(self.alphas > 1):
            raise ValueError("alphas must lie in [0, 1]")
        if np.any(self.betas < 0) or np.any(self.betas > 1):
            raise ValueError("betas must lie in [0, 1]")
        for name in ("drift", "control"):
            mat = getattr(self, name)
            if mat.shape != (dim, dim):
                raise ValueError(f"{name} must be {dim}x{dim}, got {mat.shape}")
            if not np.array_equal(mat, mat.T.conj()):
                raise ValueError(f"{name} is not Hermitian")
        for name in ("initial", "target"):
            vec = getattr(self, name)
            if vec.shape != (dim,):
                raise ValueError(f"{name} must have dimension {dim}, got {vec.shape}")
            if abs(np.linalg.norm(vec) - 1.0) > NORM_TOL:
                raise ValueError(f"{name} is not normalized")

    @classmethod
    def from_couplings(
        cls, n_qubits, alphas, betas, initial, target, total_time
    ) -> "SpinProblem":
        drift, control = build_hamiltonians(n_qubits, alphas, betas)
        return cls(
            n_qubits=n_qubits,
            alphas=np.asarray(alphas, dtype=float),
            betas=np.asarray(betas, dtype=float),
            drift=drift,
            control=control,
            initial=np.asarray(initial, dtype=complex),
            target=np.asarray(target, dtype=complex),
            total_time=float(total_time),
        )

    @property
    def dimension(self) -> int:
        return 2**self.n_qubits


def midpoint_grid(total_time: float, n_steps: int) -> np.ndarray:
    """Midpoints of `n_steps` uniform intervals covering [0, total_time]."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    dt = total_time / n_steps
    return (np.arange(n_steps) + 0.5) * dt


def default_steps(total_time: float, omega_max: float) -> int:
    """Step count keeping dt <= 2*pi / (20 * omega_max), at least 512."""
    return max(512, math.ceil(10.0 * omega_max * total_time / math.pi))


def step_unitaries(
    drift: np.ndarray, control: np.ndarray, values: np.ndarray, dt: float
) -> np.ndarray:
    """Per-step propagators exp(-i (H0 + f_k H1) dt), stacked along axis 0.

    Each step is diagonalized exactly; the result is unitary to rounding.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise ValueError("pulse values must be a non-empty 1-d array")
    if not np.all(np.isfinite(values)):
        raise ValueError("pulse values must be finite")
    h = drift[None, :, :] + values[:, None, None] * control[None, :, :]
    w, v = np.linalg.eigh(h)
    phases = np.exp((-1j * dt) * w)
    return (v * phases[:, None, :]) @ np.swapaxes(v.conj(), 1, 2)


def _ordered_product(unitaries: np.ndarray) -> np.ndarray:
    """Time-ordered product U_{n-1} ... U_1 U_0 by pairwise reduction."""
    u = unitaries
    while u.shape[0] > 1:
        if u.shape[0] % 2 == 0:
            u = u[1::2] @ u[0::2]
        else:
            u = np.concatenate([u[1::2] @ u[0:-1:2], u[-1:]], axis=0)
    return u[0]


def propagate(problem: SpinProblem, pulse_values) -> np.ndarray:
    """Evolve the initial state under a piecewise-constant control.

    `pulse_values` are the control samples at the midpoints of a uniform
    grid of ``len(pulse_values)`` intervals covering [0, total_time].
    """
    values = np.asarray(pulse_values, dtype=float)
    dt = problem.total_time / values.size if values.size else 0.0
    u = step_unitaries(problem.drift, problem.control, values, dt)
    return _ordered_product(u) @ problem.initial


def fidelity(final: np.ndarray, target: np.ndarray) -> float:
    """Squared overlap |<target|final>|^2 of two unit vectors."""
    final = np.asarray(final, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if final.shape != target.shape:
        raise ValueError(
            f"dimension mismatch: {final.shape} vs {target.shape}"
        )
    return float(abs(np.vdot(target, final)) ** 2)


def random_state(dimension: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform state: normalized standard-normal real and imaginary parts."""
    if dimension < 2:
        raise ValueError(f"dimension must be >= 2, got {dimension}")
    vec = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    return vec / np.linalg.norm(vec)
