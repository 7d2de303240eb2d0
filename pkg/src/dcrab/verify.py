"""Numerical certificates for the control-landscape properties.

Each check produces a named pass/fail block with measured values; the CLI's
``verify-landscape`` subcommand renders them as a structured text report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import CrabConfig, run_crab
from .harness import default_cycles, generate_instance
from .landscape import (
    gradient_kernel,
    gram_schmidt,
    state_update_for_directions,
    state_updates,
    tangent_rank,
)
from .pulses import DressedPulse, SuperIteration, sample_basis, sine_matrix
from .quantum import midpoint_grid, propagate

KERNEL_FD_TOLERANCE = 1e-3
UPDATE_AGREEMENT_TOLERANCE = 1e-6
TANGENCY_TOLERANCE = 1e-8
GRAM_TOLERANCE = 1e-8
PROJECTION_TOLERANCE = 1e-6
TRAP_DERIVATIVE_FLOOR = 1e-8


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    details: dict


def random_pulse(
    omega_max: float, rng: np.random.Generator, n_terms: int = 6, scale: float = 0.5
) -> DressedPulse:
    """A random unclipped pulse used as a base point for landscape probes."""
    basis = sample_basis(n_terms, omega_max, rng)
    coeffs = tuple(float(c) for c in rng.uniform(-scale, scale, n_terms))
    return DressedPulse(iterations=(SuperIteration(basis, coeffs),))


def _sampled_sine(omega: float, phase: float, grid: np.ndarray) -> np.ndarray:
    return np.sin(omega * grid + phase)


def check_kernel_vanishes_at_optimum(
    n_qubits: int, total_time: float, omega_max: float, seed: int, n_steps: int
) -> PropertyCheck:
    """With the target set to the reached state the kernel is zero."""
    rng = np.random.default_rng(seed)
    problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
    pulse = random_pulse(omega_max, rng)
    grid = midpoint_grid(total_time, n_steps)
    reached = propagate(problem, pulse.sample(grid))
    from dataclasses import replace as _replace

    at_optimum = _replace(problem, target=reached)
    kernel = gradient_kernel(at_optimum, pulse, n_steps=n_steps)
    peak = float(np.max(np.abs(kernel)))
    return PropertyCheck(
        "kernel-vanishes-at-optimum",
        peak < 1e-10,
        {"max_abs_kernel": peak, "tolerance": 1e-10},
    )


def check_kernel_fd_agreement(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
    n_triples: int = 20,
    fd_step: float = 1e-5,
) -> PropertyCheck:
    """Kernel quadrature vs symmetric finite differences of the functional."""
    rng = np.random.default_rng(seed)
    grid = midpoint_grid(total_time, n_steps)
    dt = total_time / n_steps
    worst = 0.0
    for _ in range(n_triples):
        problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
        pulse = random_pulse(omega_max, rng)
        omega = omega_max * (1.0 - rng.random())
        phase = rng.uniform(0.0, 2.0 * math.pi)
        direction = _sampled_sine(omega, phase, grid)

        kernel = gradient_kernel(problem, pulse, n_steps=n_steps)
        quadrature = float(np.dot(kernel, direction) * dt)

        values = pulse.sample(grid)

        def functional(samples):
            from .quantum import fidelity

            return fidelity(propagate(problem, samples), problem.target)

        plus = functional(values + fd_step * direction)
        minus = functional(values - fd_step * direction)
        differenced = (plus - minus) / (2.0 * fd_step)
        rel = abs(quadrature - differenced) / max(abs(differenced), 1e-300)
        worst = max(worst, rel)
    return PropertyCheck(
        "kernel-finite-difference-agreement",
        worst <= KERNEL_FD_TOLERANCE,
        {
            "max_relative_error": worst,
            "tolerance": KERNEL_FD_TOLERANCE,
            "triples": n_triples,
        },
    )


def check_state_update_agreement(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
    n_updates: int = 4,
) -> PropertyCheck:
    """First-order responses vs symmetric propagation differencing."""
    rng = np.random.default_rng(seed)
    problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
    pulse = random_pulse(omega_max, rng)
    perturbations = sample_basis(n_updates, omega_max, rng)
    grid = midpoint_grid(total_time, n_steps)
    sines = sine_matrix(perturbations, grid)
    updates = state_updates(
        problem, pulse, perturbations, n_steps=n_steps, validate=False
    )
    base = pulse.sample(grid)
    delta = 1e-5
    worst = 0.0
    for i in range(n_updates):
        plus = propagate(problem, base + delta * sines[:, i])
        minus = propagate(problem, base - delta * sines[:, i])
        differenced = (plus - minus) / (2.0 * delta)
        rel = np.linalg.norm(differenced - updates.states[i]) / np.linalg.norm(
            updates.states[i]
        )
        worst = max(worst, float(rel))
    return PropertyCheck(
        "state-update-differencing-agreement",
        worst <= UPDATE_AGREEMENT_TOLERANCE,
        {
            "max_relative_error": worst,
            "tolerance": UPDATE_AGREEMENT_TOLERANCE,
            "updates": n_updates,
        },
    )


def check_tangent_orthogonality(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
) -> PropertyCheck:
    """State updates are orthogonal to the final state under Re<.|.>."""
    rng = np.random.default_rng(seed)
    problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
    pulse = random_pulse(omega_max, rng)
    k = 2 * problem.dimension - 1
    updates = state_updates(
        problem,
        pulse,
        sample_basis(k, omega_max, rng),
        n_steps=n_steps,
        validate=False,
    )
    overlaps = np.abs(
        (updates.states @ updates.final_state.conj()).real
    ) / np.linalg.norm(updates.states, axis=1)
    worst = float(np.max(overlaps))
    return PropertyCheck(
        "tangent-orthogonality",
        worst <= TANGENCY_TOLERANCE,
        {"max_normalized_overlap": worst, "tolerance": TANGENCY_TOLERANCE},
    )


def check_tangent_span(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
    repetitions: int = 100,
    min_full_rank: int = 99,
) -> PropertyCheck:
    """2M-1 random-frequency updates span the tangent space almost surely."""
    rng = np.random.default_rng(seed)
    dim = 2**n_qubits
    k = 2 * dim - 1
    full = 0
    for _ in range(repetitions):
        problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
        pulse = random_pulse(omega_max, rng)
        updates = state_updates(
            problem,
            pulse,
            sample_basis(k, omega_max, rng),
            n_steps=n_steps,
            validate=False,
        )
        if tangent_rank(updates) == k:
            full += 1
    return PropertyCheck(
        f"tangent-span-m{dim}",
        full >= min_full_rank * repetitions // 100,
        {
            "full_rank_count": full,
            "repetitions": repetitions,
            "expected_rank": k,
            "required": min_full_rank * repetitions // 100,
        },
    )


def check_gram_schmidt_identity(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
) -> PropertyCheck:
    """Orthonormalized updates have an identity Gram matrix (real pairing)."""
    rng = np.random.default_rng(seed)
    problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
    pulse = random_pulse(omega_max, rng)
    k = 2 * problem.dimension - 1
    updates = state_updates(
        problem,
        pulse,
        sample_basis(k, omega_max, rng),
        n_steps=n_steps,
        validate=False,
    )
    ortho = gram_schmidt(updates)
    gram = (ortho.states @ ortho.states.conj().T).real
    deviation = float(np.max(np.abs(gram - np.eye(k))))
    return PropertyCheck(
        "gram-schmidt-identity",
        deviation <= GRAM_TOLERANCE,
        {"max_gram_deviation": deviation, "tolerance": GRAM_TOLERANCE},
    )


def check_gradient_following(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
) -> PropertyCheck:
    """The kernel-direction state update lies in the span of 2M-1 updates."""
    rng = np.random.default_rng(seed)
    problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
    pulse = random_pulse(omega_max, rng)
    k = 2 * problem.dimension - 1
    updates = state_updates(
        problem,
        pulse,
        sample_basis(k, omega_max, rng),
        n_steps=n_steps,
        validate=False,
    )
    kernel = gradient_kernel(problem, pulse, n_steps=n_steps)
    kernel_update, _ = state_update_for_directions(problem, pulse, kernel, n_steps)

    basis = np.concatenate([updates.states.real, updates.states.imag], axis=1).T
    target = np.concatenate([kernel_update.real, kernel_update.imag])
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    residual = np.linalg.norm(basis @ coeffs - target)
    captured = 1.0 - (residual / np.linalg.norm(target)) ** 2
    return PropertyCheck(
        "gradient-following-projection",
        captured >= 1.0 - PROJECTION_TOLERANCE,
        {"captured_fraction": float(captured), "required": 1.0 - PROJECTION_TOLERANCE},
    )


def check_false_trap_certificate(
    n_qubits: int,
    total_time: float,
    omega_max: float,
    seed: int,
    n_steps: int,
    n_fixed_points: int = 3,
    max_attempts: int = 40,
    draws: int = 100,
    eta: float = 1e-3,
) -> PropertyCheck:
    """At trapped fixed points a fresh random sine has nonzero derivative."""
    rng = np.random.default_rng(seed)
    grid = midpoint_grid(total_time, n_steps)
    dt = total_time / n_steps
    # a coarse grid is enough for harvesting trapped runs; the kernel
    # evaluation below uses the caller's grid
    config = CrabConfig(
        n_coefficients=2,
        omega_max=omega_max,
        success_threshold=eta,
        max_total_evaluations=1500,
        n_steps=256,
    )
    fractions = []
    attempts = 0
    while len(fractions) < n_fixed_points and attempts < max_attempts:
        attempts += 1
        problem = generate_instance(n_qubits, total_time, int(rng.integers(2**32)))
        record = run_crab(problem, config, int(rng.integers(2**32)))
        if record.success:
            continue
        kernel = gradient_kernel(problem, record.pulse, n_steps=n_steps)
        hits = 0
        for _ in range(draws):
            omega = omega_max * (1.0 - rng.random())
            direction = _sampled_sine(omega, 0.0, grid)
            derivative = abs(float(np.dot(kernel, direction) * dt))
            norm = math.sqrt(float(np.dot(direction, direction)) * dt)
            if derivative > TRAP_DERIVATIVE_FLOOR * norm:
                hits += 1
        fractions.append(hits / draws)
    passed = len(fractions) >= n_fixed_points and all(f >= 0.99 for f in fractions)
    return PropertyCheck(
        "false-trap-certificate",
        passed,
        {
            "fixed_points": len(fractions),
            "min_nonzero_fraction": min(fractions) if fractions else 0.0,
            "draws_per_point": draws,
            "attempts": attempts,
        },
    )


def run_landscape_verification(
    n_qubits: int = 2,
    total_time: float = 6.0 * math.pi,
    omega_max: float | None = None,
    master_seed: int = 2024,
    n_steps: int = 2048,
    span_repetitions: int = 100,
) -> list[PropertyCheck]:
    """Run every landscape certificate at desk scale; seconds to a minute."""
    if omega_max is None:
        omega_max = default_cycles(n_qubits) * 2.0 * math.pi / total_time
    seeds = np.random.SeedSequence(master_seed).generate_state(8)
    checks = [
        check_kernel_vanishes_at_optimum(
            n_qubits, total_time, omega_max, int(seeds[0]), n_steps
        ),
        check_kernel_fd_agreement(
            n_qubits, total_time, omega_max, int(seeds[1]), n_steps
        ),
        check_state_update_agreement(
            n_qubits, total_time, omega_max, int(seeds[2]), n_steps
        ),
        check_tangent_orthogonality(
            n_qubits, total_time, omega_max, int(seeds[3]), n_steps
        ),
        check_tangent_span(
            n_qubits,
            total_time,
            omega_max,
            int(seeds[4]),
            n_steps,
            repetitions=span_repetitions,
        ),
        check_gram_schmidt_identity(
            n_qubits, total_time, omega_max, int(seeds[5]), n_steps
        ),
        check_gradient_following(
            n_qubits, total_time, omega_max, int(seeds[6]), n_steps
        ),
        check_false_trap_certificate(
            n_qubits, total_time, omega_max, int(seeds[7]), n_steps
        ),
    ]
    return checks


def render_report(checks: list[PropertyCheck]) -> str:
    """One block per property: name, pass/fail, measured values."""
    blocks = []
    for check in checks:
        lines = [f"[{check.name}]", f"status = {'pass' if check.passed else 'fail'}"]
        for key, value in check.details.items():
            if isinstance(value, float):
                lines.append(f"{key} = {value:.6g}")
            else:
                lines.append(f"{key} = {value}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
