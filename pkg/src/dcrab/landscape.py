"""Control-landscape diagnostics: adjoint gradient kernel and tangent updates.

The kernel ``k(t) = -Im <chi(t)| H1 |psi(t)>`` is sampled at the midpoints of
the propagation grid from one forward and one backward pass; its quadrature
against a pulse variation gives the first-order change of the transfer
functional. State updates are exact derivatives of the discretized final
state with respect to basis-function coefficients, so they live in the
tangent space of the unit sphere (real inner product) to rounding accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .pulses import BasisFunction, DressedPulse, sine_matrix
from .quantum import SpinProblem, default_steps, midpoint_grid, step_unitaries


class LinearDependenceError(ValueError):
    """Raised when an update set is numerically linearly dependent."""

    def __init__(self, index: int, pivot: float):
        super().__init__(
            f"state update {index} is linearly dependent on its predecessors "
            f"(pivot {pivot:.3e})"
        )
        self.index = index
        self.pivot = pivot


class PerturbativeRegimeError(ValueError):
    """Raised when first-order and differenced state updates disagree."""


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Forward and adjoint states on the midpoint grid, plus the seed vector."""

    times: np.ndarray
    forward: np.ndarray
    adjoint: np.ndarray
    seed_vector: np.ndarray
    final_state: np.ndarray


def gradient_seed(problem: SpinProblem, final_state: np.ndarray) -> np.ndarray:
    """Fidelity gradient vector 2 <target|final> * target (real pairing)."""
    return 2.0 * np.vdot(problem.target, final_state) * problem.target


def _resolve_grid(
    problem: SpinProblem, config_steps: int | None, omega_max: float | None
) -> tuple[np.ndarray, float]:
    if config_steps is None:
        # Without a stated bandwidth fall back to the 512-step floor.
        config_steps = default_steps(problem.total_time, omega_max or 0.0)
    grid = midpoint_grid(problem.total_time, config_steps)
    return grid, problem.total_time / config_steps


def adjoint_trajectory(
    problem: SpinProblem,
    pulse: DressedPulse,
    n_steps: int | None = None,
    seed_vector: np.ndarray | None = None,
) -> AdjointTrajectory:
    """Propagate forward and backward, sampling both states at midpoints."""
    grid, dt = _resolve_grid(problem, n_steps, None)
    values = pulse.sample(grid)
    half = step_unitaries(problem.drift, problem.control, values, dt / 2.0)
    n = grid.size

    forward = np.empty((n, problem.dimension), dtype=complex)
    psi = problem.initial
    for k in range(n):
        mid = half[k] @ psi
        forward[k] = mid
        psi = half[k] @ mid
    final_state = psi

    if seed_vector is None:
        seed_vector = gradient_seed(problem, final_state)
    seed_vector = np.asarray(seed_vector, dtype=complex)

    adjoint = np.empty((n, problem.dimension), dtype=complex)
    chi = seed_vector
    for k in range(n - 1, -1, -1):
        half_dag = half[k].conj().T
        mid = half_dag @ chi
        adjoint[k] = mid
        chi = half_dag @ mid

    return AdjointTrajectory(
        times=grid,
        forward=forward,
        adjoint=adjoint,
        seed_vector=seed_vector,
        final_state=final_state,
    )


def gradient_kernel(
    problem: SpinProblem,
    pulse: DressedPulse,
    n_steps: int | None = None,
    seed_vector: np.ndarray | None = None,
) -> np.ndarray:
    """Functional derivative of the transfer objective, sampled at midpoints.

    With the evolution convention psi(t) = exp(-i H t) psi(0) the
    first-order response is dJ = integral k(t) df(t) dt with
    k(t) = Im <chi(t)| H1 |psi(t)>; the sign is fixed by requiring the
    quadrature to match finite differences of the objective.
    """
    traj = adjoint_trajectory(problem, pulse, n_steps=n_steps, seed_vector=seed_vector)
    overlaps = np.einsum(
        "km,mn,kn->k", traj.adjoint.conj(), problem.control, traj.forward
    )
    return overlaps.imag


def directional_derivative(
    kernel: np.ndarray, perturbation: np.ndarray, dt: float
) -> float:
    """Midpoint quadrature of the kernel against a sampled pulse variation."""
    kernel = np.asarray(kernel, dtype=float)
    perturbation = np.asarray(perturbation, dtype=float)
    if kernel.shape != perturbation.shape:
        raise ValueError(
            f"grid mismatch: kernel {kernel.shape} vs perturbation "
            f"{perturbation.shape}"
        )
    return float(np.dot(kernel, perturbation) * dt)


def _step_derivative_factors(
    drift: np.ndarray, control: np.ndarray, values: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step unitaries and their exact derivatives w.r.t. the pulse value.

    In the step eigenbasis the derivative of exp(-i H dt) along H1 has
    entries B_ab * g_ab with B = V^T H1 V and the divided difference
    g_ab = -i dt exp(-i (l_a + l_b) dt / 2) sinc((l_a - l_b) dt / 2),
    which is exact and stable for coinciding eigenvalues.
    """
    h = drift[None, :, :] + values[:, None, None] * control[None, :, :]
    w, v = np.linalg.eigh(h)
    phases = np.exp((-1j * dt) * w)
    v_dag = np.swapaxes(v.conj(), 1, 2)
    unitaries = (v * phases[:, None, :]) @ v_dag

    diff = 0.5 * dt * (w[:, :, None] - w[:, None, :])
    mean_phase = np.exp((-0.5j * dt) * (w[:, :, None] + w[:, None, :]))
    g = (-1j * dt) * mean_phase * np.sinc(diff / np.pi)
    b = v_dag @ (control @ v)
    derivatives = v @ (b * g) @ v_dag
    return unitaries, derivatives


def state_update_for_directions(
    problem: SpinProblem, pulse: DressedPulse, directions: np.ndarray, n_steps: int
) -> tuple[np.ndarray, np.ndarray]:
    """Exact first-order final-state responses along sampled pulse directions.

    `directions` has shape (n_steps,) or (n_steps, K); the response of the
    final state to f -> f + eps * direction is eps * update + O(eps^2).
    Returns (updates with shape (K, M), final_state).
    """
    grid = midpoint_grid(problem.total_time, n_steps)
    dt = problem.total_time / n_steps
    values = pulse.sample(grid)
    directions = np.asarray(directions, dtype=float)
    single = directions.ndim == 1
    if single:
        directions = directions[:, None]
    if directions.shape[0] != n_steps:
        raise ValueError(
            f"directions sampled on {directions.shape[0]} points, expected {n_steps}"
        )
    if pulse.height_bound is not None:
        raise ValueError("state updates require an unclipped pulse")

    unitaries, derivatives = _step_derivative_factors(
        problem.drift, problem.control, values, dt
    )
    psi = problem.initial.astype(complex)
    acc = np.zeros((problem.dimension, directions.shape[1]), dtype=complex)
    for k in range(n_steps):
        acc = unitaries[k] @ acc + np.outer(derivatives[k] @ psi, directions[k])
        psi = unitaries[k] @ psi
    updates = acc.T
    return (updates[0], psi) if single else (updates, psi)


@dataclass(frozen=True, eq=False)
class TangentUpdateSet:
    """Pulse updates (combinations of sine terms) and their state updates.

    Row n of `weights` holds the coefficients of pulse update n over the
    shared basis functions; `states[n]` is the final-state response per unit
    coefficient along that pulse update. `amplitudes` records the probe
    sizes used for the perturbative validation.
    """

    functions: tuple[BasisFunction, ...]
    weights: np.ndarray
    states: np.ndarray
    amplitudes: np.ndarray
    final_state: np.ndarray
    n_steps: int

    @property
    def size(self) -> int:
        return self.states.shape[0]


def state_updates(
    problem: SpinProblem,
    pulse: DressedPulse,
    perturbations,
    amplitude: float = 1e-5,
    n_steps: int | None = None,
    validate: bool = True,
    agreement_tolerance: float = 1e-6,
    max_halvings: int = 3,
) -> TangentUpdateSet:
    """State updates for sine-basis pulse perturbations.

    Each update is computed from the exact first-order response and, when
    `validate` is set, cross-checked against symmetric propagation
    differencing with probe size `amplitude` (halved on disagreement, up to
    `max_halvings` times before raising :class:`PerturbativeRegimeError`).
    """
    functions = tuple(perturbations)
    if not functions:
        raise ValueError("need at least one perturbation")
    if n_steps is None:
        n_steps = default_steps(problem.total_time, 0.0)
    grid = midpoint_grid(problem.total_time, n_steps)
    sines = sine_matrix(functions, grid)

    updates, final_state = state_update_for_directions(problem, pulse, sines, n_steps)

    amplitudes = np.full(len(functions), float(amplitude))
    if validate:
        from .quantum import propagate  # local import keeps module load light

        base_values = pulse.sample(grid)
        for i in range(len(functions)):
            delta = amplitudes[i]
            for attempt in range(max_halvings + 1):
                plus = propagate(problem, base_values + delta * sines[:, i])
                minus = propagate(problem, base_values - delta * sines[:, i])
                differenced = (plus - minus) / (2.0 * delta)
                scale = np.linalg.norm(updates[i])
                err = np.linalg.norm(differenced - updates[i]) / max(scale, 1e-300)
                if err <= agreement_tolerance:
                    amplitudes[i] = delta
                    break
                delta *= 0.5
            else:
                raise PerturbativeRegimeError(
                    f"update {i}: differencing disagrees with the first-order "
                    f"response (relative error {err:.3e})"
                )

    return TangentUpdateSet(
        functions=functions,
        weights=np.eye(len(functions)),
        states=updates,
        amplitudes=amplitudes,
        final_state=final_state,
        n_steps=n_steps,
    )


def _real_embedding(states: np.ndarray) -> np.ndarray:
    """Map K complex M-vectors to K real 2M-vectors (rows)."""
    return np.concatenate([states.real, states.imag], axis=1)


def real_overlap(u: np.ndarray, v: np.ndarray) -> float:
    """Re <u|v>, the inner product of the real embedding."""
    return float(np.vdot(u, v).real)


def gram_schmidt(
    updates: TangentUpdateSet, pivot_tolerance: float = 1e-12
) -> TangentUpdateSet:
    """Orthonormalize the state updates and recombine the pulse updates.

    Modified Gram-Schmidt with one reorthogonalization pass under the real
    inner product; the same coefficients are applied to the pulse-update
    weights so re-propagating the recombined pulses reproduces the
    orthonormal state updates. A pivot below `pivot_tolerance` (relative to
    the input norm) raises :class:`LinearDependenceError`.
    """
    states = updates.states.copy()
    weights = updates.weights.astype(float).copy()
    k = states.shape[0]
    out_states = np.zeros_like(states)
    out_weights = np.zeros_like(weights)
    for n in range(k):
        vec = states[n].copy()
        row = weights[n].copy()
        original = np.linalg.norm(vec)
        for _ in range(2):
            for j in range(n):
                coeff = real_overlap(out_states[j], vec)
                vec = vec - coeff * out_states[j]
                row = row - coeff * out_weights[j]
        norm = np.linalg.norm(vec)
        if norm < pivot_tolerance * max(original, 1e-300):
            raise LinearDependenceError(n, norm / max(original, 1e-300))
        out_states[n] = vec / norm
        out_weights[n] = row / norm
    return replace(updates, states=out_states, weights=out_weights)


def tangent_rank(updates: TangentUpdateSet, threshold: float = 1e-8) -> int:
    """Rank of the real-embedded update matrix, relative SVD threshold."""
    embedded = _real_embedding(updates.states)
    singular = np.linalg.svd(embedded, compute_uv=False)
    if singular.size == 0 or singular[0] == 0.0:
        return 0
    return int(np.sum(singular > threshold * singular[0]))
