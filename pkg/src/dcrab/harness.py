"""Experiment orchestration: instances, seeded sweeps, statistics, emission.

A sweep runs ``n_instances x n_restarts`` optimizations per swept value with
hierarchically derived seeds (master -> instance -> restart), aggregates
success probability and effort per value, and serializes to CSV and plots.
Trials are independent work items; a bounded process pool may execute them
in any order without affecting results.
"""

from __future__ import annotations

import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    CrabConfig,
    OptimizationRecord,
    run_crab,
    run_dcrab,
)
from .quantum import SpinProblem, random_state

SWEEP_NC = "sweep-nc"
SWEEP_BANDWIDTH = "sweep-bandwidth"
SWEEP_FMAX = "sweep-fmax"
SINGLE_RUN = "single-run"
VERIFY_LANDSCAPE = "verify-landscape"
KINDS = (SWEEP_NC, SWEEP_BANDWIDTH, SWEEP_FMAX, SINGLE_RUN, VERIFY_LANDSCAPE)
SWEEP_KINDS = (SWEEP_NC, SWEEP_BANDWIDTH, SWEEP_FMAX)

METHODS = ("crab", "dcrab")
CONSTRAINTS = ("none", "penalty", "hardwall")

CSV_COLUMNS = ("swept_value", "p", "p_std", "effort", "effort_logstd", "n_trials")

# Allowed bandwidth in cyclic units (omega_max * T / 2pi) per system size.
DEFAULT_CYCLES = {1: 4.0, 2: 8.0, 3: 20.0, 4: 40.0}


def default_cycles(n_qubits: int) -> float:
    return DEFAULT_CYCLES.get(n_qubits, float(2 * 2**n_qubits))


def bandwidth_bound(n_qubits: int, total_time: float) -> float:
    """Minimal bandwidth D / T (rad per time), D the real state-space dimension."""
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    return 2.0 * 2**n_qubits / total_time


def default_grid(kind: str, n_qubits: int, constraint: str) -> tuple[float, ...]:
    if kind == SWEEP_NC:
        return (1.0, 2.0, 3.0, 4.0, 6.0, 8.0)
    if kind == SWEEP_BANDWIDTH:
        cycles = default_cycles(n_qubits)
        return tuple(cycles * x for x in (1 / 16, 1 / 8, 3 / 16, 1 / 4, 3 / 8, 1 / 2, 3 / 4, 1.0))
    if kind == SWEEP_FMAX:
        if constraint == "penalty":
            return (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0)
        return (0.05, 0.1, 0.15, 0.25, 0.4, 0.7, 1.2, 2.0)
    return ()


@dataclass
class ExperimentConfig:
    """Settings for one experiment; every field maps to a CLI flag."""

    kind: str = SWEEP_NC
    n_qubits: int = 2
    total_time: float = 6.0 * math.pi
    omega_max: float | None = None
    grid: tuple[float, ...] = ()
    n_instances: int = 10
    n_restarts: int = 10
    master_seed: int = 0
    method: str = "dcrab"
    constraint: str = "none"
    n_coefficients: int | None = None
    eta: float = 1e-3
    max_total_evaluations: int = 20_000
    n_super_iterations: int = 500
    n_steps: int | None = None
    workers: int = 1
    # Penalty weight or hard-wall height for kinds that do not sweep it.
    constraint_value: float | None = None
    out_csv: str | None = None
    out_plot: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"unknown constraint mode {self.constraint!r}")
        if self.n_instances < 1 or self.n_restarts < 1:
            raise ValueError("n_instances and n_restarts must be >= 1")
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        self.grid = tuple(float(v) for v in self.grid)
        if self.kind in SWEEP_KINDS:
            if not self.grid:
                self.grid = default_grid(self.kind, self.n_qubits, self.constraint)
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValueError("swept grid must be strictly increasing")
            if not self.grid:
                raise ValueError("swept grid must be non-empty")
        if self.kind == SWEEP_FMAX and self.constraint == "none":
            raise ValueError("sweep-fmax needs constraint 'penalty' or 'hardwall'")
        if (
            self.kind != SWEEP_FMAX
            and self.constraint != "none"
            and self.constraint_value is None
        ):
            raise ValueError(
                f"constraint {self.constraint!r} needs constraint_value "
                "outside sweep-fmax"
            )
        if self.kind == SWEEP_NC and any(
            v < 1 or v != int(v) for v in self.grid
        ):
            raise ValueError("sweep-nc grid values must be positive integers")

    def resolved_omega_max(self) -> float:
        if self.omega_max is not None:
            return self.omega_max
        return default_cycles(self.n_qubits) * 2.0 * math.pi / self.total_time

    def base_coefficients(self) -> int:
        if self.n_coefficients is not None:
            return self.n_coefficients
        return int(default_cycles(self.n_qubits))


def instance_seed(master_seed: int, instance_idx: int) -> int:
    """Per-instance stream seed, shared by all swept values and restarts."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(0, instance_idx))
    return int(seq.generate_state(1)[0])


def trial_seed(
    master_seed: int, value_idx: int, instance_idx: int, restart_idx: int
) -> int:
    seq = np.random.SeedSequence(
        master_seed, spawn_key=(1, value_idx, instance_idx, restart_idx)
    )
    return int(seq.generate_state(1)[0])


def generate_instance(n_qubits: int, total_time: float, seed: int) -> SpinProblem:
    """Random instance: couplings uniform on [0, 1], Haar endpoint states."""
    rng = np.random.default_rng(seed)
    alphas = rng.random(n_qubits)
    betas = rng.random(n_qubits)
    dim = 2**n_qubits
    initial = random_state(dim, rng)
    target = random_state(dim, rng)
    return SpinProblem.from_couplings(
        n_qubits, alphas, betas, initial, target, total_time
    )


def generate_basis_transfer_instance(
    n_qubits: int, total_time: float, seed: int
) -> SpinProblem:
    """Random couplings with the fixed transfer |0...0> -> |1...1>."""
    rng = np.random.default_rng(seed)
    alphas = rng.random(n_qubits)
    betas = rng.random(n_qubits)
    dim = 2**n_qubits
    initial = np.zeros(dim, dtype=complex)
    initial[0] = 1.0
    target = np.zeros(dim, dtype=complex)
    target[-1] = 1.0
    return SpinProblem.from_couplings(
        n_qubits, alphas, betas, initial, target, total_time
    )


@dataclass(frozen=True)
class _TrialTask:
    kind: str
    method: str
    constraint: str
    n_qubits: int
    total_time: float
    omega_max: float
    n_coefficients: int
    eta: float
    max_total_evaluations: int
    n_super_iterations: int
    n_steps: int | None
    value: float
    value_idx: int
    instance_idx: int
    restart_idx: int
    instance_seed: int
    trial_seed: int
    basis_transfer: bool
    penalty_weight: float | None = None
    height_bound: float | None = None


@dataclass
class TrialOutcome:
    value: float
    value_idx: int
    instance_idx: int
    restart_idx: int
    instance_seed: int
    trial_seed: int
    record: OptimizationRecord | None
    error: str | None = None

    @property
    def success(self) -> bool:
        return self.record is not None and self.record.success


def _execute_trial(task: _TrialTask) -> TrialOutcome:
    """Run one optimization; any crash becomes a failed trial with a diagnostic."""
    try:
        make = (
            generate_basis_transfer_instance if task.basis_transfer else generate_instance
        )
        problem = make(task.n_qubits, task.total_time, task.instance_seed)
        config = CrabConfig(
            n_coefficients=task.n_coefficients,
            omega_max=task.omega_max,
            n_super_iterations=task.n_super_iterations,
            success_threshold=task.eta,
            max_total_evaluations=task.max_total_evaluations,
            penalty_weight=task.penalty_weight,
            height_bound=task.height_bound,
            n_steps=task.n_steps,
        )
        runner = run_crab if task.method == "crab" else run_dcrab
        record = runner(problem, config, task.trial_seed)
        return TrialOutcome(
            value=task.value,
            value_idx=task.value_idx,
            instance_idx=task.instance_idx,
            restart_idx=task.restart_idx,
            instance_seed=task.instance_seed,
            trial_seed=task.trial_seed,
            record=record,
        )
    except Exception as exc:  # crash containment: never abort the sweep
        diagnostic = "".join(
            traceback.format_exception_only(type(exc), exc)
        ).strip()
        return TrialOutcome(
            value=task.value,
            value_idx=task.value_idx,
            instance_idx=task.instance_idx,
            restart_idx=task.restart_idx,
            instance_seed=task.instance_seed,
            trial_seed=task.trial_seed,
            record=None,
            error=diagnostic,
        )


def _build_tasks(config: ExperimentConfig) -> list[_TrialTask]:
    omega_default = config.resolved_omega_max()
    base_nc = config.base_coefficients()
    tasks = []
    for value_idx, value in enumerate(config.grid):
        omega_max = omega_default
        n_coefficients = base_nc
        penalty_weight = None
        height_bound = None
        basis_transfer = False
        if config.kind == SWEEP_NC:
            n_coefficients = int(value)
        elif config.kind == SWEEP_BANDWIDTH:
            omega_max = value * 2.0 * math.pi / config.total_time
            if config.method == "dcrab":
                n_coefficients = max(math.ceil(2.0 * value), base_nc)
            basis_transfer = True
        elif config.kind == SWEEP_FMAX:
            if config.constraint == "penalty":
                penalty_weight = value
            else:
                height_bound = value
            basis_transfer = True
        if config.kind != SWEEP_FMAX and config.constraint == "penalty":
            penalty_weight = config.constraint_value
        if config.kind != SWEEP_FMAX and config.constraint == "hardwall":
            height_bound = config.constraint_value
        for instance_idx in range(config.n_instances):
            for restart_idx in range(config.n_restarts):
                tasks.append(
                    _TrialTask(
                        kind=config.kind,
                        method=config.method,
                        constraint=config.constraint,
                        n_qubits=config.n_qubits,
                        total_time=config.total_time,
                        omega_max=omega_max,
                        n_coefficients=n_coefficients,
                        eta=config.eta,
                        max_total_evaluations=config.max_total_evaluations,
                        n_super_iterations=config.n_super_iterations,
                        n_steps=config.n_steps,
                        value=value,
                        value_idx=value_idx,
                        instance_idx=instance_idx,
                        restart_idx=restart_idx,
                        instance_seed=instance_seed(config.master_seed, instance_idx),
                        trial_seed=trial_seed(
                            config.master_seed, value_idx, instance_idx, restart_idx
                        ),
                        basis_transfer=basis_transfer,
                        penalty_weight=penalty_weight,
                        height_bound=height_bound,
                    )
                )
    return tasks


@dataclass
class SweepRow:
    swept_value: float
    p: float
    p_std: float
    effort: float
    effort_logstd: float
    n_trials: int


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)
    # Raw per-trial outcomes per row, kept for statistics checks and
    # downstream analysis; not part of the CSV serialization.
    outcomes: list[list[TrialOutcome]] = field(default_factory=list)


def _row_from_outcomes(
    value: float, outcomes: list[TrialOutcome], n_instances: int
) -> SweepRow:
    n_trials = len(outcomes)
    successes = [o for o in outcomes if o.success]
    p = len(successes) / n_trials
    fractions = []
    for i in range(n_instances):
        per_instance = [o for o in outcomes if o.instance_idx == i]
        fractions.append(
            sum(o.success for o in per_instance) / len(per_instance)
            if per_instance
            else 0.0
        )
    p_std = float(np.std(fractions, ddof=1)) if len(fractions) > 1 else 0.0
    if successes:
        n_f = np.array([o.record.n_function_evaluations for o in successes], dtype=float)
        effort = float(np.mean(n_f)) / p
        effort_logstd = float(np.std(np.log10(n_f), ddof=1)) if n_f.size > 1 else 0.0
    else:
        effort = math.inf
        effort_logstd = 0.0
    return SweepRow(
        swept_value=value,
        p=p,
        p_std=p_std,
        effort=effort,
        effort_logstd=effort_logstd,
        n_trials=n_trials,
    )


def run_sweep(config: ExperimentConfig) -> SweepTable:
    """Execute all trials of a sweep and aggregate per swept value."""
    if config.kind not in SWEEP_KINDS:
        raise ValueError(f"run_sweep cannot execute kind {config.kind!r}")
    tasks = _build_tasks(config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_execute_trial, tasks, chunksize=1))
    else:
        outcomes = [_execute_trial(task) for task in tasks]

    table = SweepTable()
    for value_idx, value in enumerate(config.grid):
        row_outcomes = sorted(
            (o for o in outcomes if o.value_idx == value_idx),
            key=lambda o: (o.instance_idx, o.restart_idx),
        )
        table.rows.append(_row_from_outcomes(value, row_outcomes, config.n_instances))
        table.outcomes.append(row_outcomes)
    return table


def run_single(config: ExperimentConfig) -> OptimizationRecord:
    """One optimization at the configured settings (instance 0, restart 0)."""
    seed = instance_seed(config.master_seed, 0)
    problem = generate_instance(config.n_qubits, config.total_time, seed)
    crab_config = CrabConfig(
        n_coefficients=config.base_coefficients(),
        omega_max=config.resolved_omega_max(),
        n_super_iterations=config.n_super_iterations,
        success_threshold=config.eta,
        max_total_evaluations=config.max_total_evaluations,
        penalty_weight=(
            config.constraint_value if config.constraint == "penalty" else None
        ),
        height_bound=(
            config.constraint_value if config.constraint == "hardwall" else None
        ),
        n_steps=config.n_steps,
    )
    runner = run_crab if config.method == "crab" else run_dcrab
    return runner(problem, crab_config, trial_seed(config.master_seed, 0, 0, 0))


def emit_csv(table: SweepTable, path) -> None:
    """Write the table with a stable column order and 17-digit floats."""
    lines = [",".join(CSV_COLUMNS)]
    for row in table.rows:
        lines.append(
            ",".join(
                [
                    format(row.swept_value, ".17g"),
                    format(row.p, ".17g"),
                    format(row.p_std, ".17g"),
                    format(row.effort, ".17g"),
                    format(row.effort_logstd, ".17g"),
                    str(row.n_trials),
                ]
            )
        )
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> SweepTable:
    """Parse a CSV written by :func:`emit_csv`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"unrecognized CSV header in {path}")
    table = SweepTable()
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row: {line!r}")
        table.rows.append(
            SweepRow(
                swept_value=float(parts[0]),
                p=float(parts[1]),
                p_std=float(parts[2]),
                effort=float(parts[3]),
                effort_logstd=float(parts[4]),
                n_trials=int(parts[5]),
            )
        )
        table.outcomes.append([])
    return table


def emit_plot(table: SweepTable, path) -> None:
    """Render success probability (linear) and effort (log) with error bars."""
    if not table.rows:
        raise ValueError("cannot plot an empty table")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    values = [row.swept_value for row in table.rows]
    p = [row.p for row in table.rows]
    p_err = [row.p_std for row in table.rows]

    fig, (ax_p, ax_e) = plt.subplots(2, 1, figsize=(6.0, 7.0), sharex=True)
    ax_p.errorbar(values, p, yerr=p_err, fmt="o-", capsize=3)
    ax_p.set_ylabel("success probability")
    ax_p.set_ylim(-0.05, 1.05)

    finite = [
        (row.swept_value, row.effort, row.effort_logstd)
        for row in table.rows
        if math.isfinite(row.effort)
    ]
    ax_e.set_yscale("log")
    if finite:
        xs, efforts, logstds = zip(*finite)
        lower = [e - e / 10**s for e, s in zip(efforts, logstds)]
        upper = [e * 10**s - e for e, s in zip(efforts, logstds)]
        ax_e.errorbar(xs, efforts, yerr=[lower, upper], fmt="s-", capsize=3)
    ax_e.set_ylabel("function evaluations / p")
    ax_e.set_xlabel("swept value")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
