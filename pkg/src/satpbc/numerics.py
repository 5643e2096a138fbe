"""Dense small-scale numerics: finite differences, definiteness tests,
eigenvalues, and fixed-step integration.

Vectors and matrices are plain float64 numpy arrays. Every routine is pure
and re-entrant; nothing here keeps state between calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, EvaluationError, NumericFailure, ShapeError

__all__ = [
    "Spectrum",
    "RawTrace",
    "fd_gradient",
    "fd_hessian",
    "fd_jacobian",
    "is_positive_definite",
    "eigenvalues",
    "integrate_fixed",
    "default_step",
]


@dataclass(frozen=True)
class Spectrum:
    """Full complex spectrum of a square matrix."""

    eigenvalues: np.ndarray
    max_real_part: float


@dataclass(frozen=True)
class RawTrace:
    """Uniform-grid integration output: ``states[k]`` is the state at ``times[k]``."""

    times: np.ndarray
    states: np.ndarray


def default_step(x: np.ndarray, scale: float) -> float:
    """Step size for central differences, relative to the point's magnitude."""
    return scale * max(1.0, float(np.linalg.norm(x)))


def _eval_checked(f, point):
    v = f(point)
    if not np.all(np.isfinite(v)):
        raise EvaluationError("evaluator returned a non-finite value", point=np.asarray(point))
    return v


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Central-difference gradient of a scalar function.

    Component i is (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). Default eps is
    1e-6 * max(1, ||x||).
    """
    x = np.asarray(x, dtype=float)
    if eps is None:
        eps = default_step(x, 1e-6)
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    g = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        g[i] = (_eval_checked(f, xp) - _eval_checked(f, xm)) / (2.0 * eps)
    return g


def fd_hessian(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Second central differences, symmetrized by averaging with the transpose.

    Default eps is 1e-4 * max(1, ||x||); coarser than the gradient step because
    second differences lose two digits to cancellation.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if eps is None:
        eps = default_step(x, 1e-4)
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    h = np.empty((n, n))
    f0 = _eval_checked(f, x)
    for i in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[i] += eps
        xm[i] -= eps
        h[i, i] = (_eval_checked(f, xp) - 2.0 * f0 + _eval_checked(f, xm)) / (eps * eps)
    for i in range(n):
        for j in range(i + 1, n):
            xpp = x.copy()
            xpm = x.copy()
            xmp = x.copy()
            xmm = x.copy()
            xpp[i] += eps; xpp[j] += eps
            xpm[i] += eps; xpm[j] -= eps
            xmp[i] -= eps; xmp[j] += eps
            xmm[i] -= eps; xmm[j] -= eps
            v = (_eval_checked(f, xpp) - _eval_checked(f, xpm)
                 - _eval_checked(f, xmp) + _eval_checked(f, xmm)) / (4.0 * eps * eps)
            h[i, j] = v
            h[j, i] = v
    return 0.5 * (h + h.T)


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Central-difference Jacobian J[i, j] = d f_i / d x_j."""
    x = np.asarray(x, dtype=float)
    if eps is None:
        eps = default_step(x, 1e-6)
    f0 = np.asarray(_eval_checked(f, x), dtype=float)
    jac = np.empty((f0.shape[0], x.shape[0]))
    for j in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[j] += eps
        xm[j] -= eps
        jac[:, j] = (np.asarray(_eval_checked(f, xp)) - np.asarray(_eval_checked(f, xm))) / (2.0 * eps)
    return jac


def is_positive_definite(a: np.ndarray, tol: float | None = None) -> bool:
    """Attempted Cholesky-style factorization; true iff every pivot exceeds tol.

    Requires a symmetric input: asymmetry beyond tol is a shape error, not a
    "false". Default tol is 1e-10 * max|a|.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("positive-definiteness is only defined for square matrices")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if tol is None:
        tol = 1e-10 * scale
    if float(np.max(np.abs(a - a.T), initial=0.0)) > max(tol, 1e-12 * max(scale, 1.0)):
        raise ShapeError("matrix is not symmetric within tolerance")
    n = a.shape[0]
    work = 0.5 * (a + a.T)
    low = np.zeros((n, n))
    for i in range(n):
        pivot = work[i, i] - np.dot(low[i, :i], low[i, :i])
        if not pivot > tol:
            return False
        low[i, i] = np.sqrt(pivot)
        for j in range(i + 1, n):
            low[j, i] = (work[j, i] - np.dot(low[j, :i], low[i, :i])) / low[i, i]
    return True


_MAX_EIG_DIM = 64


def eigenvalues(a: np.ndarray, return_vectors: bool = False):
    """Full complex spectrum of a dense square matrix.

    Backed by LAPACK's Hessenberg-reduction + shifted-QR driver. With
    ``return_vectors`` the right eigenvectors are returned as well and each
    pair is validated against the residual bound ||A v - lam v|| <= 1e-8 ||A||.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("eigenvalues requires a square matrix")
    if a.shape[0] > _MAX_EIG_DIM:
        raise ShapeError(f"matrix dimension {a.shape[0]} exceeds the supported {_MAX_EIG_DIM}")
    try:
        if return_vectors:
            vals, vecs = np.linalg.eig(a)
        else:
            vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure is exotic
        raise NumericFailure(f"eigenvalue iteration did not converge: {exc}") from exc
    spectrum = Spectrum(eigenvalues=vals, max_real_part=float(np.max(vals.real)) if vals.size else -np.inf)
    if return_vectors:
        norm_a = float(np.linalg.norm(a))
        for k in range(vals.shape[0]):
            resid = float(np.linalg.norm(a @ vecs[:, k] - vals[k] * vecs[:, k]))
            if resid > 1e-8 * max(norm_a, 1.0):
                raise NumericFailure(f"eigenpair {k} residual {resid:.3e} exceeds 1e-8*||A||")
        return spectrum, vecs
    return spectrum


def integrate_fixed(
    dynamics: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    t0: float,
    tf: float,
    dt: float,
    record_stride: int = 1,
) -> RawTrace:
    """Classical fourth-order Runge-Kutta on a uniform grid.

    The grid is t0 + k*dt; a shortened final step lands exactly on tf when
    (tf - t0) is not an integer multiple of dt. ``record_stride`` keeps every
    k-th grid point (plus the final one) in the output, which is the only
    concession to long stiff runs; the stepping itself is never decimated.

    Raises DivergenceError carrying the blow-up time as soon as any state
    component stops being finite.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if tf <= t0:
        raise ValueError("tf must exceed t0")
    if record_stride < 1:
        raise ValueError("record_stride must be >= 1")
    x = np.array(x0, dtype=float, copy=True)
    span = tf - t0
    n_full = int(np.floor(span / dt + 1e-9))
    remainder = span - n_full * dt
    has_tail = remainder > 1e-12 * max(abs(tf), 1.0)
    n_steps = n_full + (1 if has_tail else 0)

    times = [t0]
    states = [x.copy()]
    t = t0
    for k in range(n_steps):
        h = dt if k < n_full else remainder
        k1 = dynamics(x)
        k2 = dynamics(x + 0.5 * h * k1)
        k3 = dynamics(x + 0.5 * h * k2)
        k4 = dynamics(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = tf if k == n_steps - 1 else t0 + (k + 1) * dt
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"state became non-finite at t={t!r}", time=t)
        if (k + 1) % record_stride == 0 or k == n_steps - 1:
            times.append(t)
            states.append(x.copy())
    return RawTrace(times=np.asarray(times), states=np.asarray(states))
