"""Adaptive embedded Runge-Kutta 3(2) integration (Bogacki-Shampine pair).

One core implements the stepper; it runs compiled when handed a jitted
right-hand side and as plain Python otherwise, so the hot Lorenz path and
arbitrary test problems share the same algorithm.  Dense output between
accepted nodes uses the cubic Hermite interpolant of the pair.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from numba.core.dispatcher import Dispatcher

from .chain import ModelEvaluationError

__all__ = ["Trajectory", "TrajectoryDivergenceError", "integrate_rk23", "BLOWUP_LIMIT"]

BLOWUP_LIMIT = 1e8

_STATUS_OK = 0
_STATUS_BLOWUP = 1
_STATUS_STALL = 2


class TrajectoryDivergenceError(ModelEvaluationError):
    """Raised when the integrated state exceeds the blow-up threshold."""

    def __init__(self, time: float):
        super().__init__(f"trajectory divergence at t={time:.6g}")
        self.time = time


@njit(cache=False)
def _hermite(t, t0, t1, y0, y1, f0, f1):
    h = t1 - t0
    s = (t - t0) / h
    s2 = s * s
    s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * f0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * f1)


@njit(cache=False)
def _bs23_core(rhs, params, y0, t0, t1, t_eval, rtol, atol, blowup):
    dim = y0.size
    cap = 512
    ts = np.empty(cap)
    ys = np.empty((cap, dim))
    fs = np.empty((cap, dim))
    t = t0
    y = y0.copy()
    f = rhs(t, y, params)
    ts[0] = t
    ys[0] = y
    fs[0] = f
    n = 1
    y_eval = np.empty((t_eval.size, dim))
    i_eval = 0
    while i_eval < t_eval.size and t_eval[i_eval] <= t0:
        y_eval[i_eval] = y
        i_eval += 1

    span = t1 - t0
    h = span / 100.0
    min_h = 1e-14 * max(abs(t0), abs(t1), 1.0)
    status = _STATUS_OK
    t_stop = t1
    max_steps = 5_000_000
    steps = 0

    while t < t1:
        steps += 1
        if steps > max_steps or h < min_h:
            status = _STATUS_STALL
            t_stop = t
            break
        if t + h > t1:
            h = t1 - t
        k1 = f
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1, params)
        k3 = rhs(t + 0.75 * h, y + 0.75 * h * k2, params)
        y_new = y + h * ((2.0 / 9.0) * k1 + (1.0 / 3.0) * k2 + (4.0 / 9.0) * k3)
        t_new = t + h
        k4 = rhs(t_new, y_new, params)
        # third-order advance minus second-order estimate
        err = h * ((-5.0 / 72.0) * k1 + (1.0 / 12.0) * k2 + (1.0 / 9.0) * k3 - (1.0 / 8.0) * k4)
        err_norm = 0.0
        ok = True
        for j in range(dim):
            yj = abs(y[j])
            yn = abs(y_new[j])
            scale = atol + rtol * (yj if yj > yn else yn)
            e = err[j] / scale
            err_norm += e * e
            if not np.isfinite(y_new[j]):
                ok = False
        err_norm = np.sqrt(err_norm / dim)
        if not ok:
            # treat a non-finite trial state as a hard divergence
            status = _STATUS_BLOWUP
            t_stop = t_new
            break
        if err_norm <= 1.0:
            while i_eval < t_eval.size and t_eval[i_eval] <= t_new:
                y_eval[i_eval] = _hermite(t_eval[i_eval], t, t_new, y, y_new, k1, k4)
                i_eval += 1
            t = t_new
            y = y_new
            f = k4  # first-same-as-last
            if n == cap:
                cap2 = cap * 2
                ts2 = np.empty(cap2)
                ys2 = np.empty((cap2, dim))
                fs2 = np.empty((cap2, dim))
                ts2[:n] = ts[:n]
                ys2[:n] = ys[:n]
                fs2[:n] = fs[:n]
                ts, ys, fs, cap = ts2, ys2, fs2, cap2
            ts[n] = t
            ys[n] = y
            fs[n] = f
            n += 1
            big = False
            for j in range(dim):
                if abs(y[j]) > blowup:
                    big = True
            if big:
                status = _STATUS_BLOWUP
                t_stop = t
                break
            factor = 5.0
            if err_norm > 0.0:
                factor = 0.9 * err_norm ** (-1.0 / 3.0)
                if factor > 5.0:
                    factor = 5.0
                elif factor < 0.2:
                    factor = 0.2
            h *= factor
        else:
            factor = 0.9 * err_norm ** (-1.0 / 3.0)
            if factor < 0.2:
                factor = 0.2
            h *= factor

    return ts[:n], ys[:n], fs[:n], y_eval, i_eval, status, t_stop


@dataclass
class Trajectory:
    """Accepted integration nodes plus the pair's dense interpolant."""

    ts: np.ndarray
    vs: np.ndarray
    fs: np.ndarray

    @property
    def terminal(self) -> np.ndarray:
        return self.vs[-1]

    def at(self, t) -> np.ndarray:
        """Evaluate the trajectory at times inside the integration range."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.ts[0]) or np.any(t > self.ts[-1]):
            raise ValueError("evaluation time outside trajectory range")
        idx = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, self.ts.size - 2)
        out = np.empty((t.size, self.vs.shape[1]))
        for k in range(t.size):
            i = idx[k]
            out[k] = _hermite.py_func(t[k], self.ts[i], self.ts[i + 1],
                                      self.vs[i], self.vs[i + 1], self.fs[i], self.fs[i + 1])
        return out


def integrate_rk23(
    rhs,
    v0: np.ndarray,
    t_span: tuple[float, float],
    *,
    rel_tol: float = 1e-6,
    abs_tol: float = 1e-9,
    t_eval: np.ndarray | None = None,
    params: np.ndarray | None = None,
    blowup_limit: float = BLOWUP_LIMIT,
) -> tuple[Trajectory, np.ndarray]:
    """Integrate ``dv/dt = rhs(t, v, params)`` adaptively over ``t_span``.

    ``rhs`` may be a numba-jitted function (fast path) or any Python callable
    with the same signature.  Returns the trajectory of accepted nodes and,
    when ``t_eval`` is given, the interpolated states at those times.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (t1 >= t0):
        raise ValueError("t_span must satisfy t1 >= t0")
    if rel_tol <= 0.0 or abs_tol <= 0.0:
        raise ValueError("tolerances must be positive")
    v0 = np.asarray(v0, dtype=float)
    params = np.empty(0) if params is None else np.asarray(params, dtype=float)
    eval_times = np.empty(0) if t_eval is None else np.asarray(t_eval, dtype=float)
    if eval_times.size and np.any(np.diff(eval_times) < 0):
        raise ValueError("t_eval must be nondecreasing")
    if t1 == t0:
        traj = Trajectory(np.array([t0]), v0[None, :].copy(), np.zeros((1, v0.size)))
        return traj, np.repeat(v0[None, :], eval_times.size, axis=0)

    core = _bs23_core if isinstance(rhs, Dispatcher) else _bs23_core.py_func
    ts, ys, fs, y_eval, i_eval, status, t_stop = core(
        rhs, params, v0, t0, t1, eval_times, rel_tol, abs_tol, blowup_limit
    )
    if status == _STATUS_BLOWUP:
        raise TrajectoryDivergenceError(t_stop)
    if status == _STATUS_STALL:
        raise ModelEvaluationError(f"integration stalled at t={t_stop:.6g}")
    if i_eval < eval_times.size:
        raise ValueError("evaluation time outside trajectory range")
    return Trajectory(ts, ys, fs), y_eval
