"""Micro-macro accelerated chain: particle tail plus Gaussian bulk.

Each iteration routes the proposal either to the microscopic kernel (the
ordinary point-centred proposal) or to a macroscopic draw from a Gaussian
parameterized by the running moments of previous macro keeps.  The mass
split follows the ratio of the data variance to the chain variance.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .chain import (
    AcceptanceRule,
    ChainConfig,
    ChainRecord,
    ChainState,
    ProposalKernel,
    _step_with_retries,
)
from .lorenz import ObservationSet
from .moments import MomentVector
from .strategies import ProjectionBox, project_box

__all__ = [
    "MacroState",
    "SplitState",
    "MicroMacroLog",
    "update_zeta",
    "select_branch",
    "macro_proposal",
    "MacroProposal",
    "update_macro_moments",
    "run_micromacro_chain",
]


@dataclass(frozen=True)
class MacroState:
    """Componentwise mean and variance of the macro Gaussian."""

    mean: np.ndarray
    var: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        var = np.asarray(self.var, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)
        if np.any(var < 0.0):
            raise ValueError("macro variance must be nonnegative")

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "MacroState":
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        mean = samples.mean(axis=0)
        var = (samples**2).mean(axis=0) - mean**2
        return cls(mean, np.where(var < 0.0, 0.0, var), samples.shape[0])


@dataclass
class SplitState:
    zeta: float
    macro: MacroState
    sigma_nu_sq: float = 0.0
    sigma_n_sq: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.zeta <= 1.0):
            raise ValueError("zeta must lie in [0, 1]")


@dataclass
class MicroMacroLog:
    """Per-iteration branch routing, mass split, and variance ratio."""

    is_macro: np.ndarray   # (n,) bool
    zeta: np.ndarray       # (n,) value after the iteration's update
    ratio: np.ndarray      # (n,) variance ratio r driving the update

    @property
    def macro_fraction(self) -> float:
        return float(self.is_macro.mean())


def update_zeta(sigma_nu_sq: float, var_macro: float, sigma_n_sq: float, zeta_prev: float) -> float:
    """Mass-split update from the data/chain variance ratio.

    ``r = (sigma_nu_sq - var_macro) / sigma_n_sq``; a positive ratio maps to
    ``sqrt(r)`` clamped into [0, 1], otherwise the previous split is kept.
    """
    if not (0.0 <= zeta_prev <= 1.0):
        raise ValueError("zeta_prev must lie in [0, 1]")
    if sigma_n_sq <= 0.0:
        warnings.warn("degenerate chain variance", RuntimeWarning, stacklevel=2)
        return zeta_prev
    r = (sigma_nu_sq - var_macro) / sigma_n_sq
    if r > 0.0:
        return min(np.sqrt(r), 1.0)
    return zeta_prev


def select_branch(zeta_prev: float, rng: np.random.Generator) -> str:
    """Micro branch iff a uniform draw falls below the previous split."""
    if not (0.0 <= zeta_prev <= 1.0):
        raise ValueError("zeta_prev must lie in [0, 1]")
    return "micro" if rng.random() < zeta_prev else "macro"


def macro_proposal(macro: MacroState, box: ProjectionBox, rng: np.random.Generator) -> np.ndarray:
    """Draw from the moment-parameterized Gaussian, ignoring the current point."""
    z = rng.normal(loc=macro.mean, scale=np.sqrt(macro.var))
    return project_box(z, box)


class MacroProposal:
    """Kernel view of :func:`macro_proposal` bound to a mutable macro state."""

    def __init__(self, box: ProjectionBox, macro: MacroState):
        self.box = box
        self.macro = macro

    def sample(self, x: np.ndarray, kappa: MomentVector, rng: np.random.Generator,
               iteration: int = 0) -> np.ndarray:
        return macro_proposal(self.macro, self.box, rng)


def update_macro_moments(macro: MacroState, x_kept: np.ndarray) -> MacroState:
    """Fold one more kept point into the macro running moments."""
    x = np.asarray(x_kept, dtype=float)
    n = macro.sample_count
    if n == 0:
        return MacroState(x.copy(), np.zeros_like(x), 1)
    second = macro.var + macro.mean**2
    mean = (x + n * macro.mean) / (n + 1)
    second = (x**2 + n * second) / (n + 1)
    var = second - mean**2
    return MacroState(mean, np.where(var < 0.0, 0.0, var), n + 1)


def _prefix_component_variances(values: np.ndarray) -> np.ndarray:
    """Max componentwise variance of every data prefix, vectorized."""
    values = np.atleast_2d(values)
    counts = np.arange(1, values.shape[0] + 1)[:, None]
    mean = np.cumsum(values, axis=0) / counts
    mean_sq = np.cumsum(values**2, axis=0) / counts
    var = mean_sq - mean**2
    return np.maximum(var, 0.0).max(axis=1)


def run_micromacro_chain(
    config: ChainConfig,
    micro_proposal: ProposalKernel,
    acceptance: AcceptanceRule,
    initial,
    observations: ObservationSet,
    initial_macro: MacroState,
    box: ProjectionBox,
    zeta0: float = 0.5,
    zeta_fixed: float | None = None,
) -> tuple[ChainRecord, MicroMacroLog]:
    """Run the micro-macro chain; with a split pinned at 1 it reproduces the
    plain chain bitwise under the same seed.

    Branch selection consumes an independent random stream so that routing
    never perturbs the proposal/acceptance draws of the chain stream.
    """
    rng = np.random.default_rng(config.seed)
    branch_rng = np.random.default_rng([config.seed, 1])
    x0 = np.asarray(initial(rng), dtype=float)
    state = ChainState.start(x0, rng)
    macro = initial_macro

    n = config.n_total
    samples = np.empty((n, x0.size))
    accepted = np.zeros(n, dtype=bool)
    is_macro = np.zeros(n, dtype=bool)
    zetas = np.empty(n)
    ratios = np.empty(n)

    data_sigma_sq = _prefix_component_variances(observations.values)
    k_max = observations.k_max
    macro_kernel = MacroProposal(box, macro)
    zeta = zeta0 if zeta_fixed is None else zeta_fixed
    prev_accepts = 0

    for i in range(n):
        branch = select_branch(zeta, branch_rng)
        if branch == "micro":
            kernel = micro_proposal
        else:
            macro_kernel.macro = macro
            kernel = macro_kernel
        state = _step_with_retries(state, kernel, acceptance, config.retry_limit)
        samples[i] = state.current
        accepted[i] = state.accept_count > prev_accepts
        prev_accepts = state.accept_count
        if branch == "macro":
            macro = update_macro_moments(macro, state.current)
            state.macro_count += 1
            is_macro[i] = True

        sigma_nu_sq = float(data_sigma_sq[min(i, k_max - 1)])
        sigma_n_sq = float(state.moments.variance.max())
        var_macro = float(macro.var.max())
        ratios[i] = (sigma_nu_sq - var_macro) / sigma_n_sq if sigma_n_sq > 0 else np.nan
        if zeta_fixed is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                zeta = update_zeta(sigma_nu_sq, var_macro, sigma_n_sq, zeta)
        zetas[i] = zeta

    record = ChainRecord(samples, accepted, config.burn_in, state.moments, x0)
    return record, MicroMacroLog(is_macro, zetas, ratios)
