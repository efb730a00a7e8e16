"""Proposal kernels, acceptance rules, and likelihood functions.

The shipped acceptance rules deliberately ignore the tentative moment
updates they are handed (the likelihood-ratio rule compares data misfits
only); the moment arguments stay in the interface so moment-aware rules can
be plugged in without touching the chain driver.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .chain import ModelEvaluationError
from .moments import MomentVector

__all__ = [
    "LIKELIHOOD_FLOOR",
    "ProjectionBox",
    "project_box",
    "acceptance_ratio",
    "Likelihood",
    "FixedTimeLikelihood",
    "RunningTimeLikelihood",
    "LikelihoodRatioAcceptance",
    "MetropolisHastingsAcceptance",
    "ConstantAcceptance",
    "GaussianProposal",
    "GradientProposal",
]

# keeps 1/misfit^2 likelihoods finite at an exact data match
LIKELIHOOD_FLOOR = 1e-12


@dataclass(frozen=True)
class ProjectionBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have matching shapes")
        if np.any(lo > hi):
            raise ValueError("box lower bounds must not exceed upper bounds")

    @classmethod
    def around(cls, center: np.ndarray, lo_factor: float = 0.75, hi_factor: float = 1.25) -> "ProjectionBox":
        """Box spanned componentwise by the two scalings of a reference point."""
        center = np.asarray(center, dtype=float)
        a = lo_factor * center
        b = hi_factor * center
        return cls(np.minimum(a, b), np.maximum(a, b))

    @classmethod
    def unbounded(cls, dim: int) -> "ProjectionBox":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))


def project_box(x: np.ndarray, box: ProjectionBox) -> np.ndarray:
    """Componentwise clamp of a point into the box."""
    return np.clip(np.asarray(x, dtype=float), box.lo, box.hi)


def acceptance_ratio(l_p: float, l_n: float) -> float:
    """Likelihood-ratio acceptance ``L_p / (L_p + L_n)``."""
    if not (l_p > 0.0 and l_n > 0.0):
        raise ValueError("degenerate likelihood")
    return l_p / (l_p + l_n)


class Likelihood(Protocol):
    def value(self, x: np.ndarray, iteration: int) -> float:
        """Strictly positive data likelihood of a parameter point."""
        ...


class _OutputCache:
    """Tiny memo of expensive model outputs keyed by parameter bytes.

    The chain revisits the current point on every rejected step, so a
    handful of slots is enough to avoid re-integrating the model.
    """

    def __init__(self, compute: Callable[[np.ndarray], np.ndarray], slots: int = 8):
        self._compute = compute
        self._slots = slots
        self._store: dict[bytes, np.ndarray] = {}

    def __call__(self, x: np.ndarray) -> np.ndarray:
        key = np.ascontiguousarray(x).tobytes()
        hit = self._store.get(key)
        if hit is not None:
            return hit
        out = self._compute(x)
        if len(self._store) >= self._slots:
            self._store.pop(next(iter(self._store)))
        self._store[key] = out
        return out


class FixedTimeLikelihood:
    """Reciprocal squared misfit against one observation per iteration.

    ``L(x) = 1 / max(||v(T, x) - z_i||^2, floor)`` where ``z_i`` cycles
    through the observation set with the iteration index.
    """

    def __init__(self, terminal_model: Callable[[np.ndarray], np.ndarray], observations: np.ndarray,
                 floor: float = LIKELIHOOD_FLOOR):
        self.observations = np.atleast_2d(np.asarray(observations, dtype=float))
        self.floor = floor
        self._model = _OutputCache(terminal_model)

    def misfit_sq(self, x: np.ndarray, iteration: int) -> float:
        z = self.observations[iteration % self.observations.shape[0]]
        d = self._model(x) - z
        return float(d @ d)

    def value(self, x: np.ndarray, iteration: int) -> float:
        return 1.0 / max(self.misfit_sq(x, iteration), self.floor)

    def model_output(self, x: np.ndarray) -> np.ndarray:
        return self._model(x)


class RunningTimeLikelihood:
    """Reciprocal mean squared trajectory misfit over the data seen so far.

    ``L(x) = 1 / max(mean_i ||v(t_i, x) - z_i||^2, floor)`` over the first
    ``min(iteration + 1, K)`` observations, matching a streaming scenario in
    which datum ``i`` arrives at chain iteration ``i``.
    """

    def __init__(self, trajectory_model: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 times: np.ndarray, observations: np.ndarray, floor: float = LIKELIHOOD_FLOOR):
        self.times = np.asarray(times, dtype=float)
        self.observations = np.atleast_2d(np.asarray(observations, dtype=float))
        if self.times.size != self.observations.shape[0]:
            raise ValueError("one observation time per observation required")
        self.floor = floor
        self._misfits = _OutputCache(self._all_misfits)
        self._trajectory_model = trajectory_model

    def _all_misfits(self, x: np.ndarray) -> np.ndarray:
        v = self._trajectory_model(x, self.times)
        return ((v - self.observations) ** 2).sum(axis=1)

    def value(self, x: np.ndarray, iteration: int) -> float:
        n = min(iteration + 1, self.times.size)
        mean_sq = float(self._misfits(x)[:n].mean())
        return 1.0 / max(mean_sq, self.floor)


class LikelihoodRatioAcceptance:
    """alpha = L(x_p) / (L(x_p) + L(x_n)); ignores the moment updates."""

    def __init__(self, likelihood: Likelihood):
        self.likelihood = likelihood

    def alpha(self, x_p, omega_p, x_n, omega_n, iteration) -> float:
        l_p = self.likelihood.value(x_p, iteration)
        l_n = self.likelihood.value(x_n, iteration)
        return acceptance_ratio(l_p, l_n)


class MetropolisHastingsAcceptance:
    """Classical symmetrizing rule; makes the target the stationary density.

    Included to manufacture chains with a known stationary density for the
    kinetic verification suites: ``alpha * tau`` then satisfies the detail
    balance relation with ``f_inf`` equal to the target.
    """

    def __init__(self, target_density: Callable[[np.ndarray], float],
                 proposal_density: Callable[[np.ndarray, np.ndarray], float] | None = None):
        self.target_density = target_density
        self.proposal_density = proposal_density

    def alpha(self, x_p, omega_p, x_n, omega_n, iteration) -> float:
        num = float(self.target_density(x_p))
        den = float(self.target_density(x_n))
        if self.proposal_density is not None:
            num *= float(self.proposal_density(x_n, x_p))
            den *= float(self.proposal_density(x_p, x_n))
        if den == 0.0:
            return 1.0
        return min(1.0, num / den)


@dataclass(frozen=True)
class ConstantAcceptance:
    value: float

    def alpha(self, x_p, omega_p, x_n, omega_n, iteration) -> float:
        return self.value


class GaussianProposal:
    """Isotropic Gaussian step around the current point, projected into a box."""

    def __init__(self, box: ProjectionBox, scale: float = 1.0):
        self.box = box
        self.scale = scale

    def sample(self, x: np.ndarray, kappa: MomentVector, rng: np.random.Generator,
               iteration: int = 0) -> np.ndarray:
        z = rng.normal(loc=x, scale=self.scale)
        return project_box(z, self.box)

    def density(self, z: np.ndarray, x: np.ndarray) -> float:
        """Unprojected transition density tau(z | x)."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        d = (z - x) / self.scale
        norm = (2.0 * np.pi) ** (-0.5 * d.size) / self.scale**d.size
        return float(norm * np.exp(-0.5 * d @ d))


class GradientProposal:
    """Equal-probability move along +/- an approximate likelihood gradient.

    ``gradient(x, iteration)`` supplies the step; each draw applies it with a
    fair sign flip and projects into the box.
    """

    def __init__(self, gradient: Callable[[np.ndarray, int], np.ndarray], box: ProjectionBox):
        self.gradient = gradient
        self.box = box

    def sample(self, x: np.ndarray, kappa: MomentVector, rng: np.random.Generator,
               iteration: int = 0) -> np.ndarray:
        step = np.asarray(self.gradient(x, iteration), dtype=float)
        if not np.all(np.isfinite(step)):
            raise ModelEvaluationError("model evaluation failed")
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return project_box(x + sign * step, self.box)
