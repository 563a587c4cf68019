"""Damped Gauss-Newton least-squares engine.

Minimizes sum(((y - f(x, p)) / sigma)**2) over parameters p with a
Levenberg-style damping schedule: the normal equations are damped with
lambda * diag(JtJ), lambda starts at 1e-3, divides by 10 on every accepted
step and multiplies by 10 on every rejected one. Convergence is declared when
the relative parameter change drops below 1e-8 or the relative cost decrease
below 1e-10 on an accepted step. Non-convergence after max_iter is reported
on the result, never raised silently.

Bounds are enforced by smooth parameter transformations (logistic for
two-sided, exponential for one-sided), so the optimizer itself is
unconstrained and fitted parameters can approach but never cross a bound.

The covariance is computed from the weighted Jacobian at the optimum,
C = (JtJ)^-1 * chi2_reduced. Scaling by reduced chi-square makes the reported
standard errors track the actual residual scatter rather than trusting the
supplied sigmas absolutely, which is the behaviour count-data fits here rely
on; chi2_reduced itself is reported so the scaling is transparent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

__all__ = ["FitParameter", "FitResult", "nlls_fit", "finite_difference_jacobian"]

LAMBDA_INIT = 1e-3
LAMBDA_MAX = 1e14
PTOL = 1e-8
CTOL = 1e-10


@dataclass
class FitParameter:
    """One model parameter: name, initial value, optional open bounds."""

    name: str
    init: float
    lower: float = -np.inf
    upper: float = np.inf

    def __post_init__(self) -> None:
        if not np.isfinite(self.init):
            raise ValueError(f"parameter {self.name}: init must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"parameter {self.name}: lower must be < upper")
        if not (self.lower < self.init < self.upper):
            raise ValueError(
                f"parameter {self.name}: init {self.init} outside "
                f"({self.lower}, {self.upper})"
            )


@dataclass
class FitResult:
    """Outcome of one least-squares fit.

    ``stderr`` entries are sqrt of the covariance diagonal. ``converged`` is
    False when the iteration budget ran out or the damping diverged; callers
    decide whether that is fatal.
    """

    param_names: list[str]
    params: np.ndarray
    stderr: np.ndarray
    covariance: np.ndarray
    chi2: float
    chi2_reduced: float
    n_points: int
    iterations: int
    converged: bool
    message: str = ""

    def param(self, name: str) -> float:
        return float(self.params[self.param_names.index(name)])

    def stderr_of(self, name: str) -> float:
        return float(self.stderr[self.param_names.index(name)])

    def as_dict(self) -> dict:
        return {
            "param_names": list(self.param_names),
            "params": {n: float(v) for n, v in zip(self.param_names, self.params)},
            "stderr": {n: float(v) for n, v in zip(self.param_names, self.stderr)},
            "covariance": [[float(v) for v in row] for row in self.covariance],
            "chi2": float(self.chi2),
            "chi2_reduced": float(self.chi2_reduced),
            "n_points": int(self.n_points),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "message": self.message,
        }


class _Transform:
    """Map between external (bounded) and internal (free) parameter space."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        self.lower = lower
        self.upper = upper
        self.lo_fin = np.isfinite(lower)
        self.hi_fin = np.isfinite(upper)

    def to_internal(self, p: np.ndarray) -> np.ndarray:
        t = np.array(p, dtype=float)
        both = self.lo_fin & self.hi_fin
        t[both] = logit((p[both] - self.lower[both]) / (self.upper[both] - self.lower[both]))
        lo = self.lo_fin & ~self.hi_fin
        t[lo] = np.log(p[lo] - self.lower[lo])
        hi = ~self.lo_fin & self.hi_fin
        t[hi] = np.log(self.upper[hi] - p[hi])
        return t

    def to_external(self, t: np.ndarray) -> np.ndarray:
        p = np.array(t, dtype=float)
        both = self.lo_fin & self.hi_fin
        p[both] = self.lower[both] + (self.upper[both] - self.lower[both]) * expit(t[both])
        lo = self.lo_fin & ~self.hi_fin
        p[lo] = self.lower[lo] + np.exp(t[lo])
        hi = ~self.lo_fin & self.hi_fin
        p[hi] = self.upper[hi] - np.exp(t[hi])
        return p

    def dext_dint(self, t: np.ndarray) -> np.ndarray:
        d = np.ones_like(t)
        both = self.lo_fin & self.hi_fin
        s = expit(t[both])
        d[both] = (self.upper[both] - self.lower[both]) * s * (1.0 - s)
        lo = self.lo_fin & ~self.hi_fin
        d[lo] = np.exp(t[lo])
        hi = ~self.lo_fin & self.hi_fin
        d[hi] = -np.exp(t[hi])
        return d


def finite_difference_jacobian(model, x, p: np.ndarray, bounds=None) -> np.ndarray:
    """Central-difference Jacobian of model(x, p) w.r.t. p, shape (n, k).

    Steps shrink near bounds so the model is never evaluated outside them.
    """
    p = np.asarray(p, dtype=float)
    y0 = np.asarray(model(x, p), dtype=float)
    jac = np.empty((y0.size, p.size))
    for i in range(p.size):
        h = 6e-6 * max(abs(p[i]), 1e-8)
        if bounds is not None:
            lo, hi = bounds[0][i], bounds[1][i]
            room = min(p[i] - lo, hi - p[i])
            if np.isfinite(room):
                h = min(h, 0.4 * room)
        up = p.copy()
        dn = p.copy()
        up[i] += h
        dn[i] -= h
        jac[:, i] = (np.asarray(model(x, up)) - np.asarray(model(x, dn))) / (2.0 * h)
    return jac


def nlls_fit(
    model,
    x,
    y,
    sigma,
    params: list[FitParameter],
    jacobian=None,
    max_iter: int = 200,
) -> FitResult:
    """Weighted nonlinear least squares.

    Parameters
    ----------
    model : callable
        ``model(x, p)`` returning predictions matching ``y``; ``x`` is passed
        through opaquely (array, tuple of arrays, ...).
    y, sigma : array_like
        Data and positive per-point uncertainties.
    params : list of FitParameter
        Initial values strictly inside their bounds.
    jacobian : callable, optional
        ``jacobian(x, p) -> (n, k)`` analytic derivative; central finite
        differences are used when omitted.
    """
    y = np.asarray(y, dtype=float).ravel()
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape).ravel()
    if y.size == 0:
        raise ValueError("cannot fit zero data points")
    if np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise ValueError("all sigmas must be positive and finite")
    if not params:
        raise ValueError("at least one parameter is required")

    names = [q.name for q in params]
    lower = np.array([q.lower for q in params], dtype=float)
    upper = np.array([q.upper for q in params], dtype=float)
    tf = _Transform(lower, upper)
    bounds = (lower, upper)

    def residual(p):
        # extreme trial parameters may overflow the model; the caller treats
        # non-finite results as a rejected step, so silence the warnings
        with np.errstate(all="ignore"):
            f = np.asarray(model(x, p), dtype=float).ravel()
            return (y - f) / sigma

    def jac_ext(p):
        with np.errstate(all="ignore"):
            if jacobian is not None:
                j = np.asarray(jacobian(x, p), dtype=float)
            else:
                j = finite_difference_jacobian(model, x, p, bounds)
        return j.reshape(y.size, len(params))

    theta = tf.to_internal(np.array([q.init for q in params], dtype=float))
    p = tf.to_external(theta)
    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise ValueError("model returned non-finite values at the initial guess")
    cost = float(r @ r)

    lam = LAMBDA_INIT
    converged = False
    message = ""
    iterations = 0
    for iterations in range(1, max_iter + 1):
        jw = jac_ext(p) / sigma[:, None]
        ji = jw * tf.dext_dint(theta)[None, :]
        if not np.all(np.isfinite(ji)):
            # cost kept improving into an overflow region; the last accepted
            # parameters stand but no further step can be trusted
            message = "non-finite Jacobian; stopped at last accepted parameters"
            break
        a = ji.T @ ji
        g = ji.T @ r
        d = np.diag(a).copy()
        d[~(d > 0)] = max(float(d.max(initial=0.0)), 1.0)
        try:
            step = np.linalg.solve(a + lam * np.diag(d), g)
        except np.linalg.LinAlgError:
            try:
                step = np.linalg.lstsq(a + lam * np.diag(d), g, rcond=None)[0]
            except np.linalg.LinAlgError:
                message = "normal equations unsolvable; stopped"
                break
            message = "singular normal equations; used least-squares step"
        if not np.all(np.isfinite(step)):
            message = "non-finite step; damping diverged"
            break
        trial_theta = theta + step
        trial_p = tf.to_external(trial_theta)
        trial_r = residual(trial_p)
        trial_cost = float(trial_r @ trial_r)
        if np.isfinite(trial_cost) and trial_cost <= cost:
            dp = np.abs(trial_p - p)
            rel_p = float(np.max(dp / np.maximum(np.abs(trial_p), 1e-12)))
            rel_c = (cost - trial_cost) / max(cost, 1e-300)
            theta, p, r, cost = trial_theta, trial_p, trial_r, trial_cost
            lam = max(lam / 10.0, 1e-12)
            if rel_p < PTOL or rel_c < CTOL:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > LAMBDA_MAX:
                message = "damping limit reached without an acceptable step"
                break

    if not converged and not message:
        message = f"no convergence within {max_iter} iterations"

    jw = jac_ext(p) / sigma[:, None]
    a = jw.T @ jw
    dof = max(y.size - len(params), 1)
    chi2_red = cost / dof
    if np.all(np.isfinite(a)):
        cov = np.linalg.pinv(a)
        if np.linalg.matrix_rank(a) < len(params):
            message = (message + "; " if message else "") + "singular Jacobian at optimum"
        cov = 0.5 * (cov + cov.T) * chi2_red
    else:
        cov = np.full((len(params), len(params)), np.nan)
        message = (message + "; " if message else "") + "covariance unavailable"
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    return FitResult(
        param_names=names,
        params=p,
        stderr=stderr,
        covariance=cov,
        chi2=cost,
        chi2_reduced=chi2_red,
        n_points=int(y.size),
        iterations=iterations,
        converged=converged,
        message=message,
    )
