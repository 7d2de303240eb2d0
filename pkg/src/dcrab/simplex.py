"""Self-contained Nelder-Mead simplex minimizer.

Deterministic (no internal randomness, ties broken by vertex slot order)
and with exact evaluation accounting: every objective call is counted once,
and the budget is enforced before each call so ``n_evaluations`` never
exceeds ``max_evaluations``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONVERGED = "converged"
MAX_EVALS_REACHED = "max_evals_reached"
TARGET_REACHED = "target_reached"


@dataclass
class SimplexConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    x_tolerance: float = 1e-6
    f_tolerance: float = 1e-8
    max_evaluations: int = 10_000
    initial_step: float = 1.0

    def __post_init__(self):
        if self.x_tolerance <= 0 or self.f_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")


@dataclass
class MinimizeResult:
    best_point: np.ndarray
    best_value: float
    n_evaluations: int
    status: str


class _BudgetExhausted(Exception):
    pass


def minimize(
    objective,
    start,
    config: SimplexConfig | None = None,
    target_value: float | None = None,
) -> MinimizeResult:
    """Minimize `objective` from `start` with the standard Nelder-Mead moves.

    The initial simplex is the start point plus one vertex displaced by
    ``initial_step`` along each coordinate axis. Termination: simplex
    diameter below ``x_tolerance`` together with value spread below
    ``f_tolerance``; the evaluation budget; or best value at or below
    `target_value` (checked at iteration boundaries, after the initial
    simplex is complete).
    """
    cfg = config if config is not None else SimplexConfig()
    x0 = np.asarray(start, dtype=float).ravel()
    dim = x0.size
    if dim < 1:
        raise ValueError("start point must have dimension >= 1")
    if cfg.max_evaluations < dim + 1:
        raise ValueError(
            f"max_evaluations={cfg.max_evaluations} cannot build a "
            f"{dim + 1}-vertex simplex"
        )

    n_evals = 0

    def call(x: np.ndarray) -> float:
        nonlocal n_evals
        if n_evals >= cfg.max_evaluations:
            raise _BudgetExhausted
        n_evals += 1
        value = float(objective(x))
        if math.isnan(value):
            raise ValueError("objective returned NaN")
        return value

    vertices = [x0.copy()]
    values = [call(x0)]
    if not math.isfinite(values[0]):
        raise ValueError(f"objective is not finite at the start point: {values[0]}")

    status = None
    try:
        for i in range(dim):
            vertex = x0.copy()
            vertex[i] += cfg.initial_step
            vertices.append(vertex)
            values.append(call(vertex))

        while True:
            order = sorted(range(dim + 1), key=lambda i: values[i])
            i_best, i_worst = order[0], order[-1]
            i_second = order[-2]
            if target_value is not None and values[i_best] <= target_value:
                status = TARGET_REACHED
                break
            diameter = max(
                np.max(np.abs(v - vertices[i_best])) for v in vertices
            )
            if diameter < cfg.x_tolerance and (
                values[i_worst] - values[i_best] < cfg.f_tolerance
            ):
                status = CONVERGED
                break

            centroid = (
                np.sum(vertices, axis=0) - vertices[i_worst]
            ) / dim
            reflected = centroid + cfg.reflection * (centroid - vertices[i_worst])
            f_reflected = call(reflected)

            if f_reflected < values[i_best]:
                expanded = centroid + cfg.expansion * (reflected - centroid)
                f_expanded = call(expanded)
                if f_expanded < f_reflected:
                    vertices[i_worst], values[i_worst] = expanded, f_expanded
                else:
                    vertices[i_worst], values[i_worst] = reflected, f_reflected
            elif f_reflected < values[i_second]:
                vertices[i_worst], values[i_worst] = reflected, f_reflected
            else:
                if f_reflected < values[i_worst]:
                    # outside contraction, between centroid and reflection
                    contracted = centroid + cfg.contraction * (reflected - centroid)
                    f_contracted = call(contracted)
                    accept = f_contracted <= f_reflected
                else:
                    # inside contraction, toward the worst vertex
                    contracted = centroid + cfg.contraction * (
                        vertices[i_worst] - centroid
                    )
                    f_contracted = call(contracted)
                    accept = f_contracted < values[i_worst]
                if accept:
                    vertices[i_worst], values[i_worst] = contracted, f_contracted
                else:
                    best = vertices[i_best]
                    for i in range(dim + 1):
                        if i == i_best:
                            continue
                        shrunk = best + cfg.shrink * (vertices[i] - best)
                        f_shrunk = call(shrunk)
                        vertices[i], values[i] = shrunk, f_shrunk
    except _BudgetExhausted:
        status = MAX_EVALS_REACHED

    i_best = min(range(len(values)), key=lambda i: (values[i], i))
    return MinimizeResult(
        best_point=vertices[i_best].copy(),
        best_value=values[i_best],
        n_evaluations=n_evals,
        status=status,
    )
