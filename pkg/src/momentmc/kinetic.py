"""Grid solvers for the continuum limits of the chain dynamics.

Everything here lives on a 1D grid with the moment variable integrated
out: the jump (Boltzmann-type) equation driven by the kernel
``K(x, y) = alpha(x, y) tau(x | y)``, its detail-balanced stationary
densities and quadratic entropy, the drift-diffusion (Fokker-Planck-type)
equation of the incremental-proposal regime, and the coupled micro-macro
splitting of the jump dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse.csgraph

__all__ = [
    "GridDensity",
    "KernelGrid",
    "uniform_edges",
    "build_kernel",
    "boltzmann_ds_max",
    "boltzmann_step",
    "apply_jump_operator",
    "stationary_detail_balance",
    "entropy",
    "FPECoefficients",
    "fokker_planck_ds_max",
    "fokker_planck_step",
    "MicroMacroGridResult",
    "solve_micromacro_grid",
]


def uniform_edges(lo: float, hi: float, n_cells: int) -> np.ndarray:
    return np.linspace(lo, hi, n_cells + 1)


@dataclass(frozen=True)
class GridDensity:
    """Cell-averaged density on a 1D grid."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing")
        if values.shape != (edges.size - 1,):
            raise ValueError("one value per cell required")
        if not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite")
        if np.any(values < 0.0):
            raise ValueError("density values must be nonnegative")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mass(self) -> float:
        return float(self.values @ self.widths)

    @classmethod
    def from_function(cls, pdf: Callable[[np.ndarray], np.ndarray], edges: np.ndarray,
                      normalize: bool = True) -> "GridDensity":
        edges = np.asarray(edges, dtype=float)
        centers = 0.5 * (edges[:-1] + edges[1:])
        values = np.asarray(pdf(centers), dtype=float)
        if normalize:
            values = values / (values @ np.diff(edges))
        return cls(edges, values)

    @classmethod
    def from_samples(cls, samples: np.ndarray, edges: np.ndarray) -> "GridDensity":
        counts, _ = np.histogram(np.asarray(samples, dtype=float), bins=np.asarray(edges, float))
        widths = np.diff(edges)
        values = counts / (counts.sum() * widths)
        return cls(edges, values)


@dataclass(frozen=True)
class KernelGrid:
    """Jump kernel sampled at cell-center pairs; ``K[i, j] ~ K(x_i, x_j)``."""

    K: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.K, dtype=float)
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "edges", edges)
        m = edges.size - 1
        if K.shape != (m, m):
            raise ValueError("kernel must be square over the grid cells")
        if np.any(K < 0.0):
            raise ValueError("kernel entries must be nonnegative")

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def loss_rates(self) -> np.ndarray:
        """Total jump rate out of each cell, ``sum_y K(y, x) dy``."""
        return self.K.T @ self.widths


def build_kernel(
    alpha: Callable[[np.ndarray, np.ndarray], np.ndarray],
    tau_density: Callable[[np.ndarray, np.ndarray], np.ndarray],
    edges: np.ndarray,
    renormalize_tau: bool = False,
) -> KernelGrid:
    """Midpoint evaluation of ``alpha(x, y) * tau(x | y)`` on cell centers.

    ``alpha`` and ``tau_density`` must broadcast over numpy arrays; the first
    argument is the proposed state, the second the current state.  With
    ``renormalize_tau`` the proposal density is renormalized columnwise on
    the grid (domain-truncation convention); otherwise a proposal that does
    not integrate to 1 on the grid within 1e-3 is rejected.
    """
    edges = np.asarray(edges, dtype=float)
    centers = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    X, Y = np.meshgrid(centers, centers, indexing="ij")
    tau = np.asarray(tau_density(X, Y), dtype=float) * np.ones_like(X)
    col_mass = widths @ tau
    if renormalize_tau:
        tau = tau / col_mass[None, :]
    elif np.any(np.abs(col_mass - 1.0) > 1e-3):
        raise ValueError("proposal density not normalized on grid")
    kernel = np.asarray(alpha(X, Y), dtype=float) * np.ones_like(X) * tau
    return KernelGrid(kernel, edges)


def boltzmann_ds_max(kernel: KernelGrid) -> float:
    """Largest explicit step that keeps the jump update positivity-preserving."""
    max_rate = float(kernel.loss_rates.max())
    return np.inf if max_rate == 0.0 else 0.9 / max_rate


def apply_jump_operator(kernel: KernelGrid, values: np.ndarray) -> np.ndarray:
    """Gain minus loss of the jump dynamics applied to cell values."""
    gain = kernel.K @ (values * kernel.widths)
    return gain - values * kernel.loss_rates


def boltzmann_step(f: GridDensity, kernel: KernelGrid, ds: float) -> GridDensity:
    """One explicit Euler step of the jump equation; conserves mass exactly."""
    if not np.array_equal(f.edges, kernel.edges):
        raise ValueError("density and kernel must share a grid")
    if ds > boltzmann_ds_max(kernel):
        raise ValueError("step too large")
    return GridDensity(f.edges, f.values + ds * apply_jump_operator(kernel, f.values))


def stationary_detail_balance(kernel: KernelGrid) -> GridDensity:
    """Normalized positive stationary density of the jump dynamics.

    Computed as the null vector of the discrete generator; requires the
    kernel's support graph to be strongly connected so the density is
    unique.
    """
    k = kernel.K
    n_comp, _ = scipy.sparse.csgraph.connected_components(
        scipy.sparse.csr_matrix(k > 0.0), directed=True, connection="strong"
    )
    if n_comp != 1:
        raise ValueError("no unique stationary density")
    widths = kernel.widths
    generator = k * widths[None, :] - np.diag(kernel.loss_rates)
    # swap one redundant balance row for the normalization constraint
    system = generator.copy()
    system[-1, :] = widths
    rhs = np.zeros(widths.size)
    rhs[-1] = 1.0
    values = scipy.linalg.solve(system, rhs)
    residual = generator @ values
    if np.any(values <= 0.0) or np.max(np.abs(residual)) > 1e-8 * max(np.abs(generator).max(), 1.0):
        raise ValueError("no unique stationary density")
    return GridDensity(kernel.edges, values)


def entropy(f: GridDensity, f_inf: GridDensity) -> float:
    """Quadratic entropy ``sum f^2 / f_inf dx``; 1 at ``f = f_inf``."""
    if not np.array_equal(f.edges, f_inf.edges):
        raise ValueError("densities must share a grid")
    if np.any(f_inf.values <= 0.0):
        raise ValueError("reference density must be strictly positive")
    return float((f.values**2 / f_inf.values) @ f.widths)


@dataclass(frozen=True)
class FPECoefficients:
    """Drift/diffusion data of the incremental-proposal limit on cell centers.

    ``beta`` is the rejection rate on the diagonal and ``dbeta`` its
    first-slot gradient there; the realized drift is
    ``E (beta - 1) + sigma^2 dbeta`` and the diffusion ``sigma^2 (1 + beta)``.
    """

    edges: np.ndarray
    E: np.ndarray
    sigma: np.ndarray
    beta: np.ndarray
    dbeta: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        object.__setattr__(self, "edges", edges)
        m = edges.size - 1
        for name in ("E", "sigma", "beta", "dbeta"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (m,)).copy()
            object.__setattr__(self, name, arr)
        if np.any(self.sigma <= 0.0):
            raise ValueError("diffusion scale must be positive")
        if np.any((self.beta < 0.0) | (self.beta > 1.0)):
            raise ValueError("rejection rate must lie in [0, 1]")

    @property
    def diffusion(self) -> np.ndarray:
        return self.sigma**2 * (1.0 + self.beta)

    @property
    def drift(self) -> np.ndarray:
        return self.E * (self.beta - 1.0) + self.sigma**2 * self.dbeta


def _uniform_dx(edges: np.ndarray) -> float:
    widths = np.diff(edges)
    dx = widths[0]
    if np.any(np.abs(widths - dx) > 1e-12 * dx):
        raise ValueError("finite-volume solver requires a uniform grid")
    return float(dx)


def fokker_planck_ds_max(coeff: FPECoefficients) -> float:
    dx = _uniform_dx(coeff.edges)
    return 0.4 * dx**2 / float(coeff.diffusion.max())


def fokker_planck_step(f: GridDensity, coeff: FPECoefficients, ds: float) -> GridDensity:
    """One conservative finite-volume Euler step with no-flux walls.

    Central differences carry the diffusion of ``sigma^2 (1 + beta) f`` and
    upwinding the drift; the flux form telescopes, so mass is conserved to
    roundoff.
    """
    if not np.array_equal(f.edges, coeff.edges):
        raise ValueError("density and coefficients must share a grid")
    dx = _uniform_dx(f.edges)
    if ds > fokker_planck_ds_max(coeff):
        raise ValueError("step violates the diffusive CFL bound")
    a = coeff.drift
    d = coeff.diffusion
    vals = f.values
    # advective velocity of d/ds f = -d/dx (v f) is v = -a
    v_face = -0.5 * (a[:-1] + a[1:])
    upwind = np.where(v_face >= 0.0, vals[:-1], vals[1:])
    flux = np.zeros(vals.size + 1)
    flux[1:-1] = v_face * upwind - 0.5 * (d[1:] * vals[1:] - d[:-1] * vals[:-1]) / dx
    new_vals = vals - ds * np.diff(flux) / dx
    return GridDensity(f.edges, new_vals)


@dataclass
class MicroMacroGridResult:
    """Co-evolved split densities with their reconstruction."""

    edges: np.ndarray
    s_values: np.ndarray           # (steps + 1,)
    zeta_values: np.ndarray        # (steps + 1,)
    f_micro: np.ndarray            # (steps + 1, M)
    f_macro: np.ndarray            # (steps + 1, M)

    @property
    def reconstructed(self) -> np.ndarray:
        z = self.zeta_values[:, None]
        return z * self.f_micro + (1.0 - z) * self.f_macro


def solve_micromacro_grid(
    kernel: KernelGrid,
    gamma: float | str,
    zeta_path: Callable[[float], float],
    f_micro0: GridDensity,
    f_macro0: GridDensity,
    ds: float,
    steps: int,
    dzeta_path: Callable[[float], float] | None = None,
) -> MicroMacroGridResult:
    """Co-evolve the micro/macro split of the jump dynamics.

    ``gamma`` is either a number or ``"zeta"`` to track the split weight.
    Because the jump operator is linear, the reconstruction
    ``zeta f_micro + (1 - zeta) f_macro`` follows the unsplit dynamics up to
    the explicit-Euler error.  The split weight must stay strictly inside
    (0, 1); the macro equation carries a ``1 / (1 - zeta)`` factor.
    """
    if not np.array_equal(f_micro0.edges, f_macro0.edges) or not np.array_equal(
            f_micro0.edges, kernel.edges):
        raise ValueError("densities and kernel must share a grid")
    track_zeta = isinstance(gamma, str)
    if track_zeta and gamma != "zeta":
        raise ValueError("gamma must be a number or 'zeta'")

    if dzeta_path is None:
        eps = 1e-6

        def dzeta_path(s, _z=zeta_path, _e=eps):
            return (_z(s + _e) - _z(s - _e)) / (2.0 * _e)

    m = kernel.edges.size - 1
    f_mi = np.empty((steps + 1, m))
    f_ma = np.empty((steps + 1, m))
    zetas = np.empty(steps + 1)
    s_values = ds * np.arange(steps + 1)
    f_mi[0] = f_micro0.values
    f_ma[0] = f_macro0.values
    zetas[0] = zeta_path(0.0)

    for k in range(steps):
        s = s_values[k]
        z = float(zeta_path(s))
        dz = float(dzeta_path(s))
        if not (1e-9 < z < 1.0 - 1e-9):
            raise ValueError("splitting degenerate")
        g = z if track_zeta else float(gamma)
        arg_mi = g * f_mi[k] + (1.0 - g) * f_ma[k]
        arg_ma = (z * (1.0 - g) / (1.0 - z)) * f_mi[k] \
            + ((1.0 - 2.0 * z + z * g) / (1.0 - z)) * f_ma[k]
        relax = (dz / (1.0 - z)) * (f_mi[k] - f_ma[k])
        f_mi[k + 1] = f_mi[k] + ds * apply_jump_operator(kernel, arg_mi)
        f_ma[k + 1] = f_ma[k] + ds * (apply_jump_operator(kernel, arg_ma) - relax)
        zetas[k + 1] = zeta_path(s_values[k + 1])

    return MicroMacroGridResult(kernel.edges, s_values, zetas, f_mi, f_ma)
