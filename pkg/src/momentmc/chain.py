"""Moment-augmented Metropolis Monte Carlo chain driver.

One iteration draws a proposal from a kernel that may depend on the current
point and on the running moments, evaluates an acceptance probability that
sees the tentatively updated moments of both candidates, and keeps either
the proposal or another copy of the current point.  The running moments are
always advanced with whichever point was kept.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .moments import MomentVector, update_moments

__all__ = [
    "ProposalKernel",
    "AcceptanceRule",
    "ModelEvaluationError",
    "ChainState",
    "ChainConfig",
    "ChainRecord",
    "mmc_step",
    "run_chain",
    "initial_from_samples",
]


class ModelEvaluationError(RuntimeError):
    """Forward-model evaluation failed (e.g. trajectory divergence)."""


class ProposalKernel(Protocol):
    def sample(self, x: np.ndarray, kappa: MomentVector, rng: np.random.Generator,
               iteration: int = 0) -> np.ndarray:
        """Draw a proposal given the current point and running moments."""
        ...


class AcceptanceRule(Protocol):
    def alpha(
        self,
        x_p: np.ndarray,
        omega_p: MomentVector,
        x_n: np.ndarray,
        omega_n: MomentVector,
        iteration: int,
    ) -> float:
        """Acceptance probability in [0, 1] for the proposal."""
        ...


@dataclass
class ChainState:
    current: np.ndarray
    moments: MomentVector
    iteration: int
    rng: np.random.Generator
    accept_count: int = 0
    macro_count: int = 0

    @classmethod
    def start(cls, x0: np.ndarray, rng: np.random.Generator) -> "ChainState":
        x0 = np.asarray(x0, dtype=float)
        return cls(x0, MomentVector.empty(x0.size), 0, rng)


@dataclass(frozen=True)
class ChainConfig:
    n_total: int
    burn_in: int = 1000
    seed: int = 0
    retry_limit: int = 100

    def __post_init__(self):
        if self.n_total < self.burn_in:
            raise ValueError("n_total must be at least burn_in")


@dataclass
class ChainRecord:
    samples: np.ndarray        # (n_total, dim), the kept point after each step
    accepted: np.ndarray       # (n_total,) bool
    burn_in: int
    final_moments: MomentVector
    x0: np.ndarray

    @property
    def posterior_samples(self) -> np.ndarray:
        """Samples with the start-up phase discarded."""
        return self.samples[self.burn_in:]

    @property
    def acceptance_fraction(self) -> float:
        return float(self.accepted.mean())


def mmc_step(state: ChainState, proposal: ProposalKernel, acceptance: AcceptanceRule) -> ChainState:
    """Advance the chain by one propose/accept/reinforce iteration."""
    x_p = proposal.sample(state.current, state.moments, state.rng, state.iteration)
    omega_p = update_moments(x_p, state.moments)
    omega_n = update_moments(state.current, state.moments)
    a = acceptance.alpha(x_p, omega_p, state.current, omega_n, state.iteration)
    if not (0.0 <= a <= 1.0):
        raise ValueError("invalid acceptance value")
    accepted = state.rng.random() < a
    if accepted:
        kept, moments = x_p, omega_p
    else:
        kept, moments = state.current, omega_n
    return ChainState(
        current=kept,
        moments=moments,
        iteration=state.iteration + 1,
        rng=state.rng,
        accept_count=state.accept_count + int(accepted),
        macro_count=state.macro_count,
    )


def run_chain(
    config: ChainConfig,
    proposal: ProposalKernel,
    acceptance: AcceptanceRule,
    initial: Callable[[np.random.Generator], np.ndarray],
) -> ChainRecord:
    """Run a full chain from one draw of the initial distribution.

    A step whose model evaluation diverges is retried with a fresh proposal,
    at most ``retry_limit`` times, so the record always holds exactly
    ``n_total`` samples.
    """
    rng = np.random.default_rng(config.seed)
    x0 = np.asarray(initial(rng), dtype=float)
    state = ChainState.start(x0, rng)
    samples = np.empty((config.n_total, x0.size))
    accepted = np.zeros(config.n_total, dtype=bool)
    prev_accepts = 0
    for i in range(config.n_total):
        state = _step_with_retries(state, proposal, acceptance, config.retry_limit)
        samples[i] = state.current
        accepted[i] = state.accept_count > prev_accepts
        prev_accepts = state.accept_count
    return ChainRecord(samples, accepted, config.burn_in, state.moments, x0)


def _step_with_retries(
    state: ChainState,
    proposal: ProposalKernel,
    acceptance: AcceptanceRule,
    retry_limit: int,
) -> ChainState:
    for _ in range(retry_limit):
        try:
            return mmc_step(state, proposal, acceptance)
        except ModelEvaluationError:
            continue
    raise ModelEvaluationError("proposal region exhausted")


def initial_from_samples(samples: np.ndarray) -> Callable[[np.random.Generator], np.ndarray]:
    """Initial distribution that draws uniformly from a fixed sample set."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))

    def draw(rng: np.random.Generator) -> np.ndarray:
        return samples[rng.integers(samples.shape[0])].copy()

    return draw
