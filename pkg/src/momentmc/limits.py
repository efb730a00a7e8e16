"""Particle-ensemble scaling studies against the grid solvers.

Two regimes are exercised: order-h acceptance with arbitrary proposals
(jump limit) and incremental proposals with arbitrary acceptance
(drift-diffusion limit).  Each study runs ensembles of independent chains
at a ladder of step scales h, bins them at matched continuum times, and
reports L1 distances to the corresponding grid solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kinetic import (
    FPECoefficients,
    GridDensity,
    KernelGrid,
    boltzmann_ds_max,
    boltzmann_step,
    fokker_planck_ds_max,
    fokker_planck_step,
)

__all__ = [
    "ConvergenceRecord",
    "ConvergenceReport",
    "BoltzmannScenario",
    "BrownianScenario",
    "simulate_jump_ensemble",
    "simulate_increment_ensemble",
    "verify_boltzmann_limit",
    "verify_brownian_limit",
    "rejection_diffusion_probe",
]


@dataclass(frozen=True)
class ConvergenceRecord:
    h: float
    s: float
    l1_distance: float
    noise_floor: float
    passed: bool

    def as_line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"h={self.h:<8g} s={self.s:<6g} L1={self.l1_distance:.5f} "
                f"floor={self.noise_floor:.5f} {flag}")


@dataclass
class ConvergenceReport:
    records: list[ConvergenceRecord]
    passed: bool
    notes: list[str] = field(default_factory=list)

    def as_text(self) -> str:
        lines = [r.as_line() for r in self.records]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        lines.extend(self.notes)
        return "\n".join(lines)


@dataclass
class BoltzmannScenario:
    """Jump-regime study configuration.

    ``alpha0`` is the order-one acceptance factor; the particle chain at
    scale h accepts with probability ``h * alpha0`` while the grid kernel
    carries ``alpha0 * tau`` unscaled.
    """

    kernel: KernelGrid
    alpha0: Callable[[np.ndarray, np.ndarray], np.ndarray]
    tau_sample: Callable[[np.ndarray, np.random.Generator], np.ndarray]
    f0: GridDensity
    f0_sample: Callable[[int, np.random.Generator], np.ndarray]
    s_final: float = 1.0
    ensemble: int = 10_000
    compare_bins: int = 12
    ds: float | None = None


@dataclass
class BrownianScenario:
    """Increment-regime study configuration.

    Particles move by ``h E + sqrt(h) sigma xi`` with standard Gaussian xi
    and accept with probability ``1 - beta``.
    """

    coefficients: FPECoefficients
    E: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    beta: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f0: GridDensity
    f0_sample: Callable[[int, np.random.Generator], np.ndarray]
    s_final: float = 1.0
    ensemble: int = 10_000
    compare_bins: int = 12
    ds: float | None = None


def simulate_jump_ensemble(
    scenario: BoltzmannScenario, h: float, rng: np.random.Generator
) -> np.ndarray:
    """Ensemble of independent chains with acceptance scaled by h, at s_final."""
    n_steps = int(round(scenario.s_final / h))
    x = scenario.f0_sample(scenario.ensemble, rng)
    for _ in range(n_steps):
        x_p = scenario.tau_sample(x, rng)
        a = h * np.asarray(scenario.alpha0(x_p, x), dtype=float)
        if np.any(a > 1.0) or np.any(a < 0.0):
            raise ValueError("scaled acceptance must stay in [0, 1]")
        accept = rng.random(x.size) < a
        x = np.where(accept, x_p, x)
    return x


def simulate_increment_ensemble(
    scenario: BrownianScenario, h: float, rng: np.random.Generator
) -> np.ndarray:
    """Ensemble of incremental-proposal chains at s_final."""
    n_steps = int(round(scenario.s_final / h))
    x = scenario.f0_sample(scenario.ensemble, rng)
    sqrt_h = np.sqrt(h)
    for _ in range(n_steps):
        xi = rng.standard_normal(x.size)
        x_p = x + h * np.asarray(scenario.E(x), float) + sqrt_h * np.asarray(scenario.sigma(x), float) * xi
        b = np.asarray(scenario.beta(x_p, x), dtype=float) * np.ones_like(x)
        accept = rng.random(x.size) < 1.0 - b
        x = np.where(accept, x_p, x)
    return x


def _aggregate(values: np.ndarray, edges: np.ndarray, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Average cell values into coarser equal groups of cells."""
    m = values.size
    if m % n_bins != 0:
        raise ValueError("comparison bins must evenly divide the grid cells")
    group = m // n_bins
    coarse = values.reshape(n_bins, group).mean(axis=1)
    coarse_edges = edges[::group]
    return coarse, coarse_edges


def _l1_on_bins(samples: np.ndarray, reference: GridDensity, n_bins: int) -> float:
    ref_vals, coarse_edges = _aggregate(reference.values, reference.edges, n_bins)
    emp = GridDensity.from_samples(np.clip(samples, reference.edges[0], reference.edges[-1]),
                                   coarse_edges)
    return float(np.abs(emp.values - ref_vals) @ np.diff(coarse_edges))


def _ladder_passed(distances: list[float], floor: float) -> list[bool]:
    flags = [True]
    for prev, cur in zip(distances, distances[1:]):
        flags.append(cur < prev or cur <= floor)
    return flags


def verify_boltzmann_limit(
    scenario: BoltzmannScenario, h_list: list[float], seed: int = 0
) -> ConvergenceReport:
    """Check that ensembles approach the jump-equation solution as h falls."""
    ds_bound = boltzmann_ds_max(scenario.kernel)
    ds = scenario.ds if scenario.ds is not None else min(1e-3, 0.5 * ds_bound)
    f = scenario.f0
    steps = int(round(scenario.s_final / ds))
    for _ in range(steps):
        f = boltzmann_step(f, scenario.kernel, ds)

    floor = 3.0 / np.sqrt(scenario.ensemble)
    rng_seq = np.random.SeedSequence(seed).spawn(len(h_list))
    distances = []
    for h, ss in zip(h_list, rng_seq):
        samples = simulate_jump_ensemble(scenario, h, np.random.default_rng(ss))
        distances.append(_l1_on_bins(samples, f, scenario.compare_bins))
    flags = _ladder_passed(distances, floor)
    records = [
        ConvergenceRecord(h, scenario.s_final, d, floor, ok)
        for h, d, ok in zip(h_list, distances, flags)
    ]
    return ConvergenceReport(records, all(flags))


def verify_brownian_limit(
    scenario: BrownianScenario, h_list: list[float], seed: int = 0
) -> ConvergenceReport:
    """Check that incremental-proposal ensembles approach the drift-diffusion
    solution as h falls.

    The grid equation carries the ``sigma^2 (1 + beta)`` diffusion exactly as
    stated by the continuum result, so the comparison is meaningful for the
    zero-rejection regime; a nonzero constant rejection rate is reported by
    :func:`rejection_diffusion_probe` instead.
    """
    coeff = scenario.coefficients
    ds_bound = fokker_planck_ds_max(coeff)
    ds = scenario.ds if scenario.ds is not None else 0.5 * ds_bound
    steps = int(round(scenario.s_final / ds))
    ds = scenario.s_final / steps
    if ds > ds_bound:
        raise ValueError("step violates the diffusive CFL bound")
    f = scenario.f0
    for _ in range(steps):
        f = fokker_planck_step(f, coeff, ds)

    floor = 3.0 / np.sqrt(scenario.ensemble)
    rng_seq = np.random.SeedSequence(seed).spawn(len(h_list))
    distances = []
    for h, ss in zip(h_list, rng_seq):
        samples = simulate_increment_ensemble(scenario, h, np.random.default_rng(ss))
        distances.append(_l1_on_bins(samples, f, scenario.compare_bins))
    flags = _ladder_passed(distances, floor)
    records = [
        ConvergenceRecord(h, scenario.s_final, d, floor, ok)
        for h, d, ok in zip(h_list, distances, flags)
    ]
    return ConvergenceReport(records, all(flags))


def rejection_diffusion_probe(
    beta_const: float,
    sigma: float = 1.0,
    h: float = 1e-3,
    s_final: float = 1.0,
    ensemble: int = 20_000,
    seed: int = 0,
) -> dict[str, float]:
    """Measured diffusion rate of a constant-rejection random walk.

    Returns the empirically measured variance growth rate alongside the two
    candidate continuum coefficients ``sigma^2 (1 - beta)`` (what the
    discrete dynamics realize) and ``sigma^2 (1 + beta)`` (what the stated
    limit equation carries), so any discrepancy is reported rather than
    hidden.
    """
    rng = np.random.default_rng(seed)
    n_steps = int(round(s_final / h))
    x = np.zeros(ensemble)
    sqrt_h = np.sqrt(h)
    for _ in range(n_steps):
        x_p = x + sqrt_h * sigma * rng.standard_normal(ensemble)
        accept = rng.random(ensemble) < 1.0 - beta_const
        x = np.where(accept, x_p, x)
    measured = float(x.var() / s_final)
    return {
        "beta": beta_const,
        "measured_rate": measured,
        "rate_one_minus_beta": sigma**2 * (1.0 - beta_const),
        "rate_one_plus_beta": sigma**2 * (1.0 + beta_const),
    }
