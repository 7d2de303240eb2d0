"""Randomized truncated-basis control pulses.

A pulse is a constant guess offset plus an ordered list of super-iterations,
each holding randomized sine basis functions with one real coefficient per
function. An optional hard wall clips the evaluated pulse to
``[-height_bound, height_bound]``, applied after summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class BasisFunction:
    """One randomized basis term sin(frequency * t + phase)."""

    frequency: float
    phase: float

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")
        if not 0.0 <= self.phase < TWO_PI:
            raise ValueError(f"phase must lie in [0, 2*pi), got {self.phase}")


@dataclass(frozen=True)
class SuperIteration:
    """A basis set together with its (frozen or free) coefficients."""

    functions: tuple[BasisFunction, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.functions) < 1:
            raise ValueError("a super-iteration needs at least one basis function")
        if len(self.functions) != len(self.coefficients):
            raise ValueError(
                f"{len(self.functions)} basis functions but "
                f"{len(self.coefficients)} coefficients"
            )


def sine_matrix(functions, grid: np.ndarray) -> np.ndarray:
    """Sample matrix S with S[k, i] = sin(w_i * t_k + phi_i)."""
    omegas = np.array([f.frequency for f in functions])
    phases = np.array([f.phase for f in functions])
    return np.sin(np.outer(np.asarray(grid, dtype=float), omegas) + phases[None, :])


@dataclass(frozen=True)
class DressedPulse:
    """Guess offset plus accumulated super-iterations, optionally clipped.

    With a hard wall set, the wall applies to every super-iteration
    boundary: each iteration's sum is added to the already-clipped pulse of
    the previous iterations and clipped again. Keeping the incumbent inside
    the wall is what lets later search directions stay effective at the
    rails instead of fighting an arbitrarily saturated raw sum.
    """

    guess: float = 0.0
    iterations: tuple[SuperIteration, ...] = ()
    height_bound: float | None = None

    def __post_init__(self):
        if self.height_bound is not None and not self.height_bound > 0:
            raise ValueError(f"height_bound must be positive, got {self.height_bound}")

    def evaluate(self, t):
        """Pulse value at time(s) `t`."""
        t = np.asarray(t, dtype=float)
        value = np.full(t.shape, self.guess)
        for it in self.iterations:
            value = value + sine_matrix(it.functions, t.ravel()).reshape(
                t.shape + (len(it.functions),)
            ) @ np.asarray(it.coefficients)
            if self.height_bound is not None:
                value = np.clip(value, -self.height_bound, self.height_bound)
        if self.height_bound is not None:
            value = np.clip(value, -self.height_bound, self.height_bound)
        return float(value) if value.ndim == 0 else value

    def sample(self, grid: np.ndarray) -> np.ndarray:
        """Pulse values on a time grid, one partial sum per super-iteration."""
        grid = np.asarray(grid, dtype=float)
        values = np.full(grid.shape, self.guess)
        for it in self.iterations:
            values = values + sine_matrix(it.functions, grid) @ np.asarray(
                it.coefficients
            )
            if self.height_bound is not None:
                values = np.clip(values, -self.height_bound, self.height_bound)
        if self.height_bound is not None:
            values = np.clip(values, -self.height_bound, self.height_bound)
        return values

    def with_last_coefficients(self, coefficients) -> "DressedPulse":
        """Copy with the newest super-iteration's coefficients replaced."""
        if not self.iterations:
            raise ValueError("pulse has no super-iterations")
        last = replace(
            self.iterations[-1],
            coefficients=tuple(float(c) for c in coefficients),
        )
        return replace(self, iterations=self.iterations[:-1] + (last,))

    def with_height_bound(self, height_bound: float | None) -> "DressedPulse":
        return replace(self, height_bound=height_bound)


def sample_basis(
    n_functions: int, omega_max: float, rng: np.random.Generator
) -> tuple[BasisFunction, ...]:
    """Draw frequencies uniformly from (0, omega_max] and phases from [0, 2*pi)."""
    if n_functions < 1:
        raise ValueError(f"n_functions must be >= 1, got {n_functions}")
    if not omega_max > 0:
        raise ValueError(f"omega_max must be positive, got {omega_max}")
    # 1 - random() lies in (0, 1], keeping the zero-frequency sine out.
    omegas = omega_max * (1.0 - rng.random(n_functions))
    phases = rng.uniform(0.0, TWO_PI, n_functions)
    return tuple(
        BasisFunction(frequency=float(w), phase=float(p))
        for w, p in zip(omegas, phases)
    )


def dress(pulse: DressedPulse, new_basis) -> DressedPulse:
    """Append a fresh basis with zero coefficients; evaluation is unchanged."""
    new_basis = tuple(new_basis)
    if not new_basis:
        raise ValueError("cannot dress with an empty basis")
    iteration = SuperIteration(functions=new_basis, coefficients=(0.0,) * len(new_basis))
    return replace(pulse, iterations=pulse.iterations + (iteration,))


def clip(value, f_max: float):
    """Hard wall: `value` inside (-f_max, f_max), else sign(value) * f_max."""
    if not f_max > 0:
        raise ValueError(f"f_max must be positive, got {f_max}")
    clipped = np.clip(value, -f_max, f_max)
    return float(clipped) if np.isscalar(value) else clipped


def max_abs(pulse: DressedPulse, grid: np.ndarray) -> float:
    """Largest |pulse(t)| over the grid used for propagation."""
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2:
        raise ValueError("grid must contain at least two points")
    return float(np.max(np.abs(pulse.sample(grid))))


def save_pulse(pulse: DressedPulse, total_time: float, path) -> None:
    """Write a pulse as plain text, one line per basis term.

    The header records the guess offset, the total time and the hard wall;
    floats use 17 significant digits so a reload reproduces the pulse
    bit-identically.
    """
    lines = ["# dcrab pulse v1"]
    bound = "none" if pulse.height_bound is None else format(pulse.height_bound, ".17g")
    lines.append(
        f"guess={format(pulse.guess, '.17g')} "
        f"total_time={format(total_time, '.17g')} height_bound={bound}"
    )
    for j, it in enumerate(pulse.iterations):
        for func, coeff in zip(it.functions, it.coefficients):
            lines.append(
                f"{j} {format(func.frequency, '.17g')} "
                f"{format(func.phase, '.17g')} {format(coeff, '.17g')}"
            )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_pulse(path) -> tuple[DressedPulse, float]:
    """Read a pulse written by :func:`save_pulse`; returns (pulse, total_time)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"empty pulse file: {path}")
    header = dict(item.split("=", 1) for item in lines[0].split())
    guess = float(header["guess"])
    total_time = float(header["total_time"])
    bound = header["height_bound"]
    height_bound = None if bound == "none" else float(bound)
    groups: dict[int, list[tuple[BasisFunction, float]]] = {}
    for line in lines[1:]:
        idx_s, w_s, p_s, c_s = line.split()
        groups.setdefault(int(idx_s), []).append(
            (BasisFunction(frequency=float(w_s), phase=float(p_s)), float(c_s))
        )
    iterations = []
    for j in sorted(groups):
        funcs, coeffs = zip(*groups[j])
        iterations.append(SuperIteration(functions=funcs, coefficients=coeffs))
    return (
        DressedPulse(
            guess=guess, iterations=tuple(iterations), height_bound=height_bound
        ),
        total_time,
    )
