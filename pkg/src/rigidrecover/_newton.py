"""Damped Newton iteration shared by the polynomial solvers."""

from __future__ import annotations

from typing import Callable

import numpy as np


def damped_newton(
    fun: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iter: int = 40,
    converge_tol: float = 1e-12,
    backtrack_factor: float = 0.5,
    max_backtracks: int = 25,
    early_abort: tuple[int, float] | None = None,
) -> tuple[np.ndarray, float, bool]:
    """Newton's method with a backtracking line search on the residual norm.

    Returns ``(x, residual_inf_norm, converged)``.  A singular Jacobian or a
    step that cannot reduce the residual ends the iteration early with
    ``converged=False`` unless the residual already meets the tolerance.
    ``early_abort=(k, r)`` abandons a start whose residual norm still
    exceeds ``r`` after ``k`` iterations (multistart screening economy).
    """
    x = np.array(x0, dtype=float)
    r = fun(x)
    rnorm = float(np.linalg.norm(r))
    for it in range(max_iter):
        if early_abort is not None and it == early_abort[0] and rnorm > early_abort[1]:
            break
        if np.abs(r).max() < converge_tol:
            return x, float(np.abs(r).max()), True
        j = jac(x)
        try:
            step = np.linalg.solve(j, -r)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(j, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            break
        alpha = 1.0
        improved = False
        for _ in range(max_backtracks):
            x_new = x + alpha * step
            r_new = fun(x_new)
            rnorm_new = float(np.linalg.norm(r_new))
            if np.isfinite(rnorm_new) and rnorm_new < rnorm:
                x, r, rnorm = x_new, r_new, rnorm_new
                improved = True
                break
            alpha *= backtrack_factor
        if not improved:
            break
    return x, float(np.abs(r).max()), bool(np.abs(r).max() < converge_tol)


def complex_step_jacobian(
    fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-200
) -> np.ndarray:
    """Machine-precision Jacobian of an analytic real function.

    ``fun`` must accept complex input and avoid absolute values and
    branch cuts near the real axis.
    """
    x = np.asarray(x, dtype=float)
    base = x.astype(complex)
    cols = []
    for j in range(x.size):
        xc = base.copy()
        xc[j] += 1j * h
        cols.append(np.imag(fun(xc)) / h)
    return np.array(cols).T
