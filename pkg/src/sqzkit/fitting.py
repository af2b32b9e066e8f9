"""Damped nonlinear least-squares engine and the experiment's model fits.

The engine minimizes sum(w_i * r_i(p)^2) with Levenberg-Marquardt damping:
lambda starts at 1e-3, grows x10 on a rejected step and shrinks /10 on an
accepted one, scaling the diagonal of the normal matrix.  Convergence is
declared when the relative SSE change drops below ``tol`` or the gradient
infinity-norm falls below 1e-10.  Parameter covariance is the standard
``SSE/(n-p) * (J^T W J)^-1``.

Three residual models are provided: the two-branch gain/squeezing law
``eta*exp(sign*2*sqrt(alpha*P)) + 1 - eta`` (fit in linear space, dB data
converted on entry) and the phase-curve model
``S+ * sin^2(a*x + b) + S- * cos^2(a*x + b)``, each with an analytic
Jacobian.

One fit runs single-threaded; independent problems can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import SingularNormalEquationsError

Residual = Callable[[np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray], np.ndarray]


@dataclass
class FitProblem:
    """A weighted least-squares problem.

    residual maps params to the residual vector; jacobian (optional) to the
    (n_points, n_params) matrix of residual derivatives.  Without a
    jacobian, central finite differences are used.  bounds is an optional
    per-parameter (low, high) list; steps are projected back into the box.
    """

    residual: Residual
    initial_params: np.ndarray
    jacobian: Jacobian | None = None
    weights: np.ndarray | None = None
    bounds: Sequence[tuple[float, float]] | None = None

    def __post_init__(self):
        self.initial_params = np.asarray(self.initial_params, dtype=float)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(self.weights <= 0):
                raise ValueError("weights must be positive")
        if self.bounds is not None:
            if len(self.bounds) != self.initial_params.size:
                raise ValueError("bounds length must match parameter count")
            for p, (lo, hi) in zip(self.initial_params, self.bounds):
                if not lo <= p <= hi:
                    raise ValueError(f"initial param {p} outside bounds [{lo}, {hi}]")


@dataclass
class FitResult:
    params: np.ndarray
    covariance: np.ndarray
    stderr: np.ndarray
    sse: float
    iterations: int
    converged: bool

    def as_dict(self) -> dict:
        return {
            "params": self.params.tolist(),
            "stderr": self.stderr.tolist(),
            "covariance": self.covariance.tolist(),
            "sse": self.sse,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def finite_difference_jacobian(residual: Residual, params: np.ndarray,
                               h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian, step max(h, h*|param|) per coordinate."""
    params = np.asarray(params, dtype=float)
    r0 = np.asarray(residual(params), dtype=float)
    jac = np.empty((r0.size, params.size))
    for i in range(params.size):
        step = max(h, h * abs(params[i]))
        plus = params.copy()
        minus = params.copy()
        plus[i] += step
        minus[i] -= step
        jac[:, i] = (np.asarray(residual(plus)) - np.asarray(residual(minus))) / (2.0 * step)
    return jac


def _project(params: np.ndarray, bounds) -> np.ndarray:
    if bounds is None:
        return params
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.clip(params, lo, hi)


def levenberg_marquardt(problem: FitProblem, tol: float = 1e-10,
                        max_iter: int = 200) -> FitResult:
    """Run the damped least-squares iteration.

    Raises SingularNormalEquationsError if the (damped) normal equations
    cannot be solved; returns converged=False when max_iter accepted steps
    pass without meeting either convergence test.
    """
    p = problem.initial_params.copy()
    residual = problem.residual
    jac_fn = problem.jacobian or (lambda q: finite_difference_jacobian(residual, q))

    r = np.asarray(residual(p), dtype=float)
    n, m = r.size, p.size
    if n < m:
        raise ValueError(f"residual dimension {n} < parameter dimension {m}")
    w = problem.weights if problem.weights is not None else np.ones(n)
    if w.size != n:
        raise ValueError("weights length must match residual length")

    sse = float(np.sum(w * r * r))
    lam = 1e-3
    accepted = 0
    converged = False
    normal = None

    for _ in range(max_iter):
        jac = np.asarray(jac_fn(p), dtype=float)
        grad = jac.T @ (w * r)
        if np.max(np.abs(grad)) < 1e-10 or sse == 0.0:
            converged = True
            break
        normal = (jac.T * w) @ jac

        stepped = False
        while lam <= 1e12:
            system = normal + lam * np.eye(m)
            try:
                delta = np.linalg.solve(system, -grad)
            except np.linalg.LinAlgError:
                cond = float(np.linalg.cond(system))
                raise SingularNormalEquationsError(
                    "normal equations singular", cond) from None
            if not np.all(np.isfinite(delta)):
                cond = float(np.linalg.cond(system))
                raise SingularNormalEquationsError(
                    "normal equations produced non-finite step", cond)
            candidate = _project(p + delta, problem.bounds)
            r_new = np.asarray(residual(candidate), dtype=float)
            sse_new = float(np.sum(w * r_new * r_new))
            if sse_new < sse:
                rel_change = (sse - sse_new) / sse if sse > 0 else 0.0
                p, r, sse = candidate, r_new, sse_new
                lam = max(lam / 10.0, 1e-15)
                accepted += 1
                stepped = True
                if rel_change < tol:
                    converged = True
                break
            lam *= 10.0
        if not stepped:
            # damping exhausted without an acceptable step: local minimum
            converged = True
            break
        if converged:
            break

    jac = np.asarray(jac_fn(p), dtype=float)
    normal = (jac.T * w) @ jac
    dof = max(n - m, 1)
    scale = sse / dof
    try:
        cov = scale * np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        cov = scale * np.linalg.pinv(normal)
    cov = 0.5 * (cov + cov.T)
    stderr = np.sqrt(np.maximum(np.diag(cov), 0.0))
    return FitResult(params=p, covariance=cov, stderr=stderr, sse=sse,
                     iterations=accepted, converged=converged)


# ---------------------------------------------------------------------------
# gain / squeezing model: y = eta * exp(sign * 2 sqrt(alpha P)) + 1 - eta

def two_branch_model(powers_w: np.ndarray, signs: np.ndarray,
                     eta: float, alpha: float) -> np.ndarray:
    exponent = signs * 2.0 * np.sqrt(alpha * powers_w)
    return eta * np.exp(exponent) + 1.0 - eta


def two_branch_jacobian(powers_w: np.ndarray, signs: np.ndarray,
                        eta: float, alpha: float) -> np.ndarray:
    """Columns: d/d eta, d/d alpha."""
    root = np.sqrt(alpha * powers_w)
    expo = np.exp(signs * 2.0 * root)
    d_eta = expo - 1.0
    # d/d alpha of exp(s*2*sqrt(alpha P)) = exp(..) * s * sqrt(P/alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        d_alpha = eta * expo * signs * np.sqrt(np.where(alpha > 0, powers_w / alpha, 0.0))
    d_alpha = np.where(alpha * powers_w > 0, d_alpha, 0.0)
    return np.column_stack([d_eta, d_alpha])


def _branch_points(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = list(points)
    if not pts:
        raise ValueError("no data points")
    powers = np.array([p[0] for p in pts], dtype=float)
    values_db = np.array([p[1] for p in pts], dtype=float)
    signs = np.array([p[2] for p in pts], dtype=float)
    if np.any(powers < 0):
        raise ValueError("powers must be >= 0")
    if not np.all(np.abs(signs) == 1.0):
        raise ValueError("branch sign must be +1 or -1")
    return powers, values_db, signs


def _two_branch_init(powers, values_lin, signs) -> tuple[float, float]:
    """Heuristic start: invert the branch pair at the highest power.

    With u = (y+ + y-)/2 - 1 = eta*(cosh x - 1) and v = (y+ - y-)/2
    = eta*sinh x, x = 2*artanh(u/v); falls back to mild defaults when only
    one branch is available or the data is too noisy to invert.
    """
    eta0, alpha0 = 0.9, 0.1
    idx = np.argsort(powers)
    p_max = powers[idx[-1]]
    if p_max > 0:
        near = np.abs(powers - p_max) < 1e-12
        plus = values_lin[near & (signs > 0)]
        minus = values_lin[near & (signs < 0)]
        if plus.size and minus.size:
            u = (plus.mean() + minus.mean()) / 2.0 - 1.0
            v = (plus.mean() - minus.mean()) / 2.0
            if v > 0 and 0 < u < v:
                x = 2.0 * math.atanh(u / v)
                if x > 0:
                    eta0 = min(max(v / math.sinh(x), 1e-3), 1.0)
                    alpha0 = (x / 2.0) ** 2 / p_max
        elif plus.size:
            # single branch: assume good mode matching, slope from endpoint
            y = max(plus.mean(), 1.0 + 1e-6)
            alpha0 = (math.log(y) / 2.0) ** 2 / p_max
    return eta0, max(alpha0, 1e-6)


def fit_gain_curve(points, weights: np.ndarray | None = None,
                   tol: float = 1e-10, max_iter: int = 200) -> FitResult:
    """Joint fit of both gain branches; params are (eta_mm, alpha_per_w).

    points are (peak_power_w, gain_db, sign) triples; dB values are
    converted to linear ratios before fitting.
    """
    powers, values_db, signs = _branch_points(points)
    values_lin = 10.0 ** (values_db / 10.0)
    eta0, alpha0 = _two_branch_init(powers, values_lin, signs)

    def residual(params):
        return two_branch_model(powers, signs, params[0], params[1]) - values_lin

    def jacobian(params):
        return two_branch_jacobian(powers, signs, params[0], params[1])

    problem = FitProblem(
        residual=residual,
        jacobian=jacobian,
        initial_params=np.array([eta0, alpha0]),
        weights=weights,
        bounds=[(0.0, 1.0), (1e-12, np.inf)],
    )
    return levenberg_marquardt(problem, tol=tol, max_iter=max_iter)


def fit_squeezing_curve(points, alpha_per_w: float | None = None,
                        weights: np.ndarray | None = None,
                        tol: float = 1e-10, max_iter: int = 200) -> FitResult:
    """Fit measured squeezing/anti-squeezing vs peak power.

    With alpha_per_w given (the independently measured conversion
    efficiency) only the total detection efficiency is floated and the
    result has params (eta,).  With alpha_per_w None both (eta, alpha) are
    fitted, as in fit_gain_curve.
    """
    if alpha_per_w is None:
        return fit_gain_curve(points, weights=weights, tol=tol, max_iter=max_iter)
    if alpha_per_w < 0:
        raise ValueError("alpha_per_w must be >= 0")
    powers, values_db, signs = _branch_points(points)
    values_lin = 10.0 ** (values_db / 10.0)

    expo = np.exp(signs * 2.0 * np.sqrt(alpha_per_w * powers))
    grow = expo - 1.0
    # linear in eta; start from the least-squares slope, clipped physical
    denom = float(np.sum(grow * grow))
    eta0 = float(np.sum(grow * (values_lin - 1.0)) / denom) if denom > 0 else 0.5
    eta0 = min(max(eta0, 1e-6), 1.0)

    def residual(params):
        return params[0] * grow + 1.0 - values_lin

    def jacobian(params):
        return grow[:, None].copy()

    problem = FitProblem(
        residual=residual,
        jacobian=jacobian,
        initial_params=np.array([eta0]),
        weights=weights,
        bounds=[(0.0, 1.0)],
    )
    return levenberg_marquardt(problem, tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# phase-curve model: V(x) = S+ sin^2(a x + b) + S- cos^2(a x + b)

def phase_curve_model(x: np.ndarray, s_minus: float, s_plus: float,
                      slope: float, offset: float) -> np.ndarray:
    theta = slope * x + offset
    sin2 = np.sin(theta) ** 2
    return s_plus * sin2 + s_minus * (1.0 - sin2)


def phase_curve_jacobian(x: np.ndarray, s_minus: float, s_plus: float,
                         slope: float, offset: float) -> np.ndarray:
    """Columns: d/dS-, d/dS+, d/d slope, d/d offset."""
    theta = slope * x + offset
    sin2 = np.sin(theta) ** 2
    swing = (s_plus - s_minus) * np.sin(2.0 * theta)
    return np.column_stack([1.0 - sin2, sin2, swing * x, swing])
