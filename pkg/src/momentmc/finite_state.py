"""Exact one-step density evolution on finite state spaces.

Used as the ground-truth oracle for the chain mechanics: on M abstract
states the post-step distribution can be computed by plain enumeration and
compared with simulated step frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .moments import MomentVector

__all__ = [
    "FiniteStateSpec",
    "one_step_density_oracle",
    "simulate_step_frequencies",
    "random_spec",
    "CategoricalProposal",
    "TableAcceptance",
]

_STOCHASTIC_TOL = 1e-12


@dataclass(frozen=True)
class FiniteStateSpec:
    """Proposal and acceptance tables on M states.

    ``proposal[i, j]`` is the probability of proposing state ``i`` given the
    current state ``j`` (column-stochastic), and ``acceptance[i, j]`` the
    probability of accepting that move.
    """

    proposal: np.ndarray
    acceptance: np.ndarray

    def __post_init__(self):
        tau = np.asarray(self.proposal, dtype=float)
        alpha = np.asarray(self.acceptance, dtype=float)
        object.__setattr__(self, "proposal", tau)
        object.__setattr__(self, "acceptance", alpha)
        if tau.ndim != 2 or tau.shape[0] != tau.shape[1]:
            raise ValueError("proposal matrix must be square")
        if alpha.shape != tau.shape:
            raise ValueError("acceptance matrix must match proposal shape")
        if np.any(tau < 0.0):
            raise ValueError("proposal matrix must be nonnegative")
        if np.any(np.abs(tau.sum(axis=0) - 1.0) > _STOCHASTIC_TOL):
            raise ValueError("proposal matrix columns must sum to 1")
        if np.any((alpha < 0.0) | (alpha > 1.0)):
            raise ValueError("acceptance entries must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return self.proposal.shape[0]


def one_step_density_oracle(f: np.ndarray, spec: FiniteStateSpec) -> np.ndarray:
    """Exact distribution after one propose/accept/reinforce step.

    ``f'(x) = sum_y a(x,y) tau(x|y) f(y) + f(x) sum_x' (1 - a(x',x)) tau(x'|x)``
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (spec.n_states,):
        raise ValueError("density length must match state count")
    if np.any(f < 0.0) or abs(f.sum() - 1.0) > _STOCHASTIC_TOL:
        raise ValueError("density must be nonnegative and sum to 1")
    move = (spec.acceptance * spec.proposal) @ f
    stay = f * ((1.0 - spec.acceptance) * spec.proposal).sum(axis=0)
    return move + stay


def simulate_step_frequencies(
    spec: FiniteStateSpec,
    f: np.ndarray,
    n_steps: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Empirical next-state frequencies of independent single MMC steps.

    Each replicate draws a start state from ``f``, proposes from the matching
    proposal column, and accepts with the tabulated probability; the Monte
    Carlo counterpart of :func:`one_step_density_oracle`.
    """
    f = np.asarray(f, dtype=float)
    start = rng.choice(spec.n_states, size=n_steps, p=f / f.sum())
    cum = np.cumsum(spec.proposal, axis=0)
    u = rng.random(n_steps)
    # vectorized inverse-CDF draw from each start state's proposal column
    proposed = (u[:, None] >= cum.T[start]).sum(axis=1)
    proposed = np.minimum(proposed, spec.n_states - 1)
    accept = rng.random(n_steps) < spec.acceptance[proposed, start]
    nxt = np.where(accept, proposed, start)
    return np.bincount(nxt, minlength=spec.n_states) / n_steps


def random_spec(n_states: int, rng: np.random.Generator) -> FiniteStateSpec:
    """Random strictly positive proposal/acceptance tables for testing."""
    tau = rng.random((n_states, n_states)) + 0.1
    tau /= tau.sum(axis=0, keepdims=True)
    alpha = rng.random((n_states, n_states))
    return FiniteStateSpec(tau, alpha)


class CategoricalProposal:
    """Chain-compatible proposal over integer-coded states.

    Lets the generic :func:`momentmc.chain.mmc_step` run on a finite state
    space: points are length-1 float vectors holding the state index.
    """

    def __init__(self, spec: FiniteStateSpec):
        self._cum = np.cumsum(spec.proposal, axis=0)

    def sample(self, x: np.ndarray, kappa: MomentVector, rng: np.random.Generator,
               iteration: int = 0) -> np.ndarray:
        j = int(x[0])
        i = int(np.searchsorted(self._cum[:, j], rng.random(), side="right"))
        return np.array([float(min(i, self._cum.shape[0] - 1))])


class TableAcceptance:
    def __init__(self, spec: FiniteStateSpec):
        self._alpha = spec.acceptance

    def alpha(self, x_p, omega_p, x_n, omega_n, iteration) -> float:
        return float(self._alpha[int(x_p[0]), int(x_n[0])])
