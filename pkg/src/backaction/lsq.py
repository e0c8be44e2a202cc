"""Damped Gauss-Newton (Levenberg-Marquardt) least-squares solver.

The solver tries an undamped Gauss-Newton step first and only adds
Marquardt damping (scaled by ``diag(J^T J)``) when a step fails to lower
the cost, so linear problems finish in a single accepted step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

EPS = np.finfo(float).eps


class FitError(RuntimeError):
    """A fit could not produce a usable estimate; ``result`` holds diagnostics."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SingularFitError(FitError):
    pass


@dataclass
class FitResult:
    params: dict
    sigmas: dict
    residual_norm: float
    n_iter: int
    converged: bool
    covariance: np.ndarray = field(repr=False, default=None)
    message: str = ""
    n_points: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return np.array(list(self.params.values()), dtype=float)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "sigmas": {k: float(v) for k, v in self.sigmas.items()},
            "residual_norm": float(self.residual_norm),
            "n_iter": int(self.n_iter),
            "converged": bool(self.converged),
            "n_points": int(self.n_points),
            "message": self.message,
            "extra": {k: _jsonable(v) for k, v in self.extra.items()},
        }


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def numeric_jacobian(fun, x, r0=None, step=None):
    """Central-difference Jacobian of ``fun`` at ``x``."""
    x = np.asarray(x, dtype=float)
    if step is None:
        step = EPS ** (1 / 3) * np.maximum(np.abs(x), 1.0)
    cols = []
    for j in range(x.size):
        h = np.zeros_like(x)
        h[j] = step[j] if np.ndim(step) else step
        cols.append((fun(x + h) - fun(x - h)) / (2 * h[j]))
    return np.column_stack(cols)


def _orthogonality(J, r):
    """Largest cosine between the residual and any Jacobian column."""
    rn = np.linalg.norm(r)
    if rn == 0:
        return 0.0
    cn = np.linalg.norm(J, axis=0)
    g = np.abs(J.T @ r)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = np.where(cn > 0, g / (cn * rn), 0.0)
    return float(np.max(cos)) if cos.size else 0.0


def nonlinear_least_squares(
    residuals: Callable[[np.ndarray], np.ndarray],
    x0: Sequence[float],
    jac: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    names: Sequence[str] | None = None,
    xtol: float = 1e-10,
    ftol: float = 1e-12,
    gtol: float = 1e-8,
    max_iter: int = 500,
    absolute_sigma: bool = True,
) -> FitResult:
    """Minimise ``sum(residuals(x)**2)`` starting from ``x0``.

    Stops when the relative step is below ``xtol``, the relative cost
    change is below ``ftol``, or the residual is orthogonal to the
    Jacobian columns to within ``gtol``.  Raises :class:`FitError` after
    ``max_iter`` iterations and :class:`SingularFitError` when no amount of
    damping yields a decrease.
    """
    x = np.array(x0, dtype=float)
    names = list(names) if names is not None else [f"p{i}" for i in range(x.size)]
    if len(names) != x.size:
        raise ValueError("names and x0 have different lengths")

    def fun(p):
        return np.asarray(residuals(p), dtype=float).ravel()

    def jacobian(p, r):
        if jac is not None:
            return np.atleast_2d(np.asarray(jac(p), dtype=float))
        return numeric_jacobian(fun, p, r)

    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial point")
    cost = cost0 = float(r @ r)
    J = jacobian(x, r)
    lam = 0.0
    n_iter = 0
    stalls = 0
    converged = False
    message = "maximum iterations reached"

    for _ in range(max_iter):
        if cost == 0.0 or _orthogonality(J, r) <= gtol:
            converged = True
            message = "gradient orthogonality criterion met"
            break

        A = J.T @ J
        grad = J.T @ r
        diag = np.diag(A).copy()
        diag[diag <= 0] = 1.0

        accepted = False
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -grad)
                ok = np.all(np.isfinite(step))
            except np.linalg.LinAlgError:
                ok = False
            if ok:
                x_new = x + step
                r_new = fun(x_new)
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
                null_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
                if cost_new < cost or (cost_new == cost and null_step):
                    accepted = True
                    break
            lam = 1e-3 if lam == 0.0 else lam * 10.0
            if lam > 1e16:
                break

        if not accepted:
            result = _finish(x, r, J, cost, n_iter, False, names, absolute_sigma,
                             "damping escalation failed: singular or non-descent problem")
            raise SingularFitError(result.message, result)

        n_iter += 1
        small_step = np.linalg.norm(step) <= xtol * (np.linalg.norm(x) + xtol)
        small_cost = abs(cost - cost_new) <= ftol * cost
        x, r, cost = x_new, r_new, cost_new
        J = jacobian(x, r)
        lam = lam / 10.0 if lam > 1e-10 else 0.0
        stalls = stalls + 1 if small_cost else 0
        # Near-zero residuals are pure roundoff; their angle to J means nothing.
        orthogonal = cost <= 1e-20 * cost0 or _orthogonality(J, r) <= gtol
        # A flat cost alone is not enough: keep stepping while the gradient
        # test fails, unless the cost has stalled several times in a row.
        if small_step or (small_cost and orthogonal) or stalls >= 3:
            # A Gauss-Newton step below xtol is itself a stationarity test.
            converged = orthogonal or small_step
            message = "relative step below xtol" if small_step else "relative cost change below ftol"
            break
    else:
        result = _finish(x, r, J, cost, n_iter, False, names, absolute_sigma, message)
        raise FitError(f"no convergence after {max_iter} iterations", result)

    return _finish(x, r, J, cost, n_iter, converged, names, absolute_sigma, message)


def _finish(x, r, J, cost, n_iter, converged, names, absolute_sigma, message):
    n, p = J.shape
    cov = np.linalg.pinv(J.T @ J)
    if not absolute_sigma:
        cov = cov * (cost / (n - p) if n > p else 0.0)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return FitResult(
        params=dict(zip(names, x.tolist())),
        sigmas=dict(zip(names, sig.tolist())),
        residual_norm=cost,
        n_iter=n_iter,
        converged=bool(converged),
        covariance=cov,
        message=message,
        n_points=n,
    )
