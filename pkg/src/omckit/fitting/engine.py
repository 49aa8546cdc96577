"""Weighted nonlinear least squares with analytic Jacobians.

The minimization itself is delegated to ``scipy.optimize.least_squares``
(trust-region reflective, so box bounds are honoured). This module adds what
the fits need around it: fixed parameters, per-parameter scaling, covariance
from the Jacobian at the solution, and explicit failure modes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

MAX_ITERATIONS = 500
TOLERANCE = 1e-10
# relative singular-value floor below which the weighted Jacobian is treated as rank deficient
SINGULAR_RCOND = 1e-10


class FitError(RuntimeError):
    """Base class for fit failures."""


class ConvergenceError(FitError):
    def __init__(self, message, best_params, iterations):
        super().__init__(message)
        self.best_params = best_params
        self.iterations = iterations


class SingularJacobianError(FitError):
    def __init__(self, parameter: str, message: str | None = None):
        super().__init__(message or f"singular Jacobian: parameter {parameter!r} is not constrained by the data")
        self.parameter = parameter


@dataclass(frozen=True)
class Spectrum:
    """Sampled data: x strictly increasing, optional per-point standard deviation."""

    x: np.ndarray
    y: np.ndarray
    y_sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("spectrum contains non-finite values")
        if x.size > 1 and not np.all(np.diff(x) > 0):
            raise ValueError("x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.y_sigma is not None:
            s = np.asarray(self.y_sigma, dtype=float)
            if s.shape != x.shape or not np.all(s > 0) or not np.all(np.isfinite(s)):
                raise ValueError("y_sigma must be finite, strictly positive and match x")
            object.__setattr__(self, "y_sigma", s)

    def __len__(self):
        return self.x.size


@dataclass(frozen=True)
class Model:
    """A parametric curve f(x, p) with its Jacobian df/dp of shape (len(x), len(p))."""

    name: str
    params: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, p):
        return self.func(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def jacobian(self, x, p):
        return self.jac(np.asarray(x, dtype=float), np.asarray(p, dtype=float))


@dataclass
class LeastSquaresSolution:
    names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    iterations: int
    fixed: tuple[str, ...] = ()
    residuals: np.ndarray = field(repr=False, default=None)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residuals))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.params)))

    def errors(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.stderr)))


def _covariance(jw: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """(J^T J)^-1 via SVD of the column-normalized weighted Jacobian."""
    norms = np.linalg.norm(jw, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise SingularJacobianError(names[zero[0]])
    jn = jw / norms
    _, s, vt = np.linalg.svd(jn, full_matrices=False)
    if s[-1] < SINGULAR_RCOND * s[0]:
        raise SingularJacobianError(names[int(np.argmax(np.abs(vt[-1])))])
    cov_n = (vt.T / s ** 2) @ vt
    return cov_n / np.outer(norms, norms)


def solve_least_squares(
    model: Model,
    spectrum: Spectrum,
    initial: Sequence[float],
    bounds: Mapping[str, tuple[float, float]] | None = None,
    *,
    fixed: Mapping[str, float] | None = None,
    scale: Mapping[str, float] | None = None,
    max_iterations: int = MAX_ITERATIONS,
) -> LeastSquaresSolution:
    """Minimize sum(((y - model(x)) / sigma)^2) starting at ``initial``.

    ``fixed`` pins parameters to given values. ``scale`` gives the size of a
    meaningful change in each parameter; the optimizer works in the offsets
    (p - p0) / scale so that parameters of very different magnitude (an optical
    resonance at 1e15 rad/s next to a Fano parameter of order 1) are resolved
    equally well. Without sigma, the covariance is scaled by the reduced chi^2.
    """
    names = model.params
    p0 = np.array(initial, dtype=float)
    if p0.shape != (len(names),):
        raise ValueError(f"{model.name}: expected {len(names)} initial values")
    fixed = dict(fixed or {})
    for k, v in fixed.items():
        p0[names.index(k)] = v
    free = np.array([n not in fixed for n in names])
    free_names = tuple(n for n in names if n not in fixed)
    n_free = int(free.sum())
    if len(spectrum) < n_free + 1:
        raise ValueError(f"{model.name}: need at least {n_free + 1} points, got {len(spectrum)}")

    lo = np.full(len(names), -np.inf)
    hi = np.full(len(names), np.inf)
    for k, (a, b) in (bounds or {}).items():
        i = names.index(k)
        lo[i], hi[i] = a, b
    if np.any(p0 < lo) or np.any(p0 > hi):
        raise ValueError(f"{model.name}: initial parameters outside bounds")

    sc = np.array([abs(v) if v != 0 else 1.0 for v in p0])
    for k, v in (scale or {}).items():
        sc[names.index(k)] = abs(v)
    sc_f = sc[free]
    base = p0.copy()

    x, y = spectrum.x, spectrum.y
    w = 1.0 / spectrum.y_sigma if spectrum.y_sigma is not None else np.ones_like(y)

    def unpack(z):
        p = base.copy()
        p[free] = base[free] + z * sc_f
        return p

    def resid(z):
        return (model.func(x, unpack(z)) - y) * w

    def jac(z):
        return model.jac(x, unpack(z))[:, free] * w[:, None] * sc_f

    zlo = (lo[free] - base[free]) / sc_f
    zhi = (hi[free] - base[free]) / sc_f
    # trf needs a strictly feasible start
    z0 = np.zeros(n_free)
    at_bound = (z0 <= zlo) | (z0 >= zhi)
    if np.any(at_bound):
        raise ValueError(f"{model.name}: initial parameters must lie strictly inside bounds")

    res = least_squares(
        resid, z0, jac=jac, bounds=(zlo, zhi), method="trf", x_scale="jac",
        ftol=TOLERANCE, xtol=TOLERANCE, gtol=TOLERANCE, max_nfev=max_iterations,
    )
    p = unpack(res.x)
    if res.status == 0:
        raise ConvergenceError(
            f"{model.name}: no convergence after {res.nfev} iterations", dict(zip(names, p)), res.nfev)
    if res.status < 0:
        raise FitError(f"{model.name}: {res.message}")

    r = resid(res.x)
    chi2 = float(r @ r)
    dof = len(y) - n_free
    jw = model.jac(x, p)[:, free] * w[:, None]
    cov_f = _covariance(jw, free_names)
    if spectrum.y_sigma is None:
        cov_f = cov_f * (chi2 / dof if dof > 0 else np.nan)
    cov = np.zeros((len(names), len(names)))
    cov[np.ix_(free, free)] = cov_f
    return LeastSquaresSolution(
        names=names, params=p, covariance=cov, chi2=chi2, dof=dof,
        iterations=int(res.nfev), fixed=tuple(fixed), residuals=r,
    )
