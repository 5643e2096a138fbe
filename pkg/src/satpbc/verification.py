"""Numerical verification of the standing hypotheses and stability conditions.

Each check evaluates a residual over deterministic samples (or at a point) and
compares it against a tolerance. Results are plain records; no check mutates
the model. Definiteness checks report the margin deficit
``threshold - lambda_min`` as their residual with tolerance zero, so the
``passed == (residual <= tolerance)`` convention holds uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics
from .controllers import (
    DynamicExtensionController,
    NaturalDampingController,
    SaturationShape,
)
from .errors import MetadataError, NumericFailure, PreconditionError, ShapeError
from .models import InputAffineModel, holding_input, passive_output

__all__ = [
    "CheckResult",
    "SampleSpec",
    "check_cyclo_passivity",
    "check_equilibrium_gradient",
    "check_output_integral",
    "check_shaped_hessian",
    "check_decoupled_damping",
    "check_virtual_damping_psd",
    "check_closed_loop_hessian",
    "suggest_kc",
    "lyapunov_monitor",
    "linearization_stability",
    "dissipation_obstacle_flag",
]


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named check. ``passed`` iff ``residual <= tolerance``."""

    name: str
    passed: bool
    residual: float
    tolerance: float
    witness: Optional[np.ndarray] = None
    details: dict = field(default_factory=dict)

    @classmethod
    def from_residual(cls, name, residual, tolerance, witness=None, details=None):
        residual = float(residual)
        tolerance = float(tolerance)
        return cls(name=name, passed=residual <= tolerance, residual=residual,
                   tolerance=tolerance, witness=witness, details=details or {})


@dataclass(frozen=True)
class SampleSpec:
    """Deterministic uniform sampling box standing in for a verification domain."""

    box: np.ndarray            # (n, 2) per-coordinate [lo, hi]
    count: int = 1000
    seed: int = 0

    def __post_init__(self):
        box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if box.shape[1] != 2 or np.any(box[:, 0] > box[:, 1]):
            raise ShapeError("sample box must be (n, 2) with lo <= hi")
        object.__setattr__(self, "box", box)

    def draw(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        lo, hi = self.box[:, 0], self.box[:, 1]
        return lo + (hi - lo) * rng.random((self.count, self.box.shape[0]))

    def draw_inputs(self, m: int, scale: float = 1.0) -> np.ndarray:
        rng = np.random.default_rng(self.seed + 1)
        return scale * (2.0 * rng.random((self.count, m)) - 1.0)


def _worst(samples, values):
    i = int(np.argmax(values))
    return float(values[i]), samples[i]


def check_cyclo_passivity(model: InputAffineModel, samples: SampleSpec, tol: float = 1e-8) -> CheckResult:
    """Residual of grad(S)^T f + ||ell||^2 = 0 over the sample box."""
    if model.storage is None or model.ell is None:
        raise MetadataError(f"{model.name}: cyclo-passivity check needs storage and dissipation maps")
    pts = samples.draw()
    vals = np.empty(len(pts))
    for k, x in enumerate(pts):
        grad = model.storage_gradient(x)
        ellx = np.atleast_1d(model.ell(x))
        vals[k] = abs(float(grad @ model.f(x)) + float(ellx @ ellx))
    residual, witness = _worst(pts, vals)
    return CheckResult.from_residual("cyclo_passivity", residual, tol, witness)


def check_equilibrium_gradient(model: InputAffineModel, x_star: np.ndarray, tol: float = 1e-8) -> CheckResult:
    """Residual of grad(S)(x*) + Jgamma(x*) kappa = 0."""
    x_star = np.asarray(x_star, dtype=float)
    kappa = holding_input(model, x_star)
    grad = model.storage_gradient(x_star)
    jg = model.gamma_jacobian(x_star)
    residual = float(np.linalg.norm(grad + jg @ kappa))
    return CheckResult.from_residual("equilibrium_gradient", residual, tol, x_star,
                                     details={"kappa": kappa.tolist()})


def check_output_integral(model: InputAffineModel, samples: SampleSpec,
                          tol: float = 1e-8, input_scale: float = 1.0) -> CheckResult:
    """Residual of d/dt gamma = y along the vector field, sampled over (x, u)."""
    if model.gamma is None:
        raise MetadataError(f"{model.name}: no output integral registered")
    pts = samples.draw()
    us = samples.draw_inputs(model.m, input_scale)
    vals = np.empty(len(pts))
    for k, (x, u) in enumerate(zip(pts, us)):
        jg = model.gamma_jacobian(x)
        xdot = np.asarray(model.f(x)) + np.atleast_2d(np.asarray(model.g(x))).reshape(model.n, model.m) @ u
        vals[k] = float(np.max(np.abs(jg.T @ xdot - passive_output(model, x, u))))
    residual, witness = _worst(pts, vals)
    return CheckResult.from_residual("output_integral", residual, tol, witness)


def _shaped_hessian_matrix(model: InputAffineModel, x_star: np.ndarray, shape: SaturationShape) -> np.ndarray:
    if model.storage is None or model.gamma is None:
        raise MetadataError(f"{model.name}: shaped Hessian needs storage and output integral")
    kappa = holding_input(model, x_star)
    hess_s = numerics.fd_hessian(model.storage, x_star)
    jg = model.gamma_jacobian(x_star)
    shaped = hess_s + (jg * (shape.alpha * shape.beta)) @ jg.T
    if np.any(kappa != 0.0):
        hess_lin = numerics.fd_hessian(lambda z: float(np.atleast_1d(model.gamma(z)) @ kappa), x_star)
        shaped = shaped + hess_lin
    return shaped


def _definiteness_result(name, matrix, witness=None, details=None) -> CheckResult:
    scale = float(np.max(np.abs(matrix), initial=0.0))
    threshold = 1e-8 * max(scale, 1.0)
    lam_min = float(np.min(np.linalg.eigvalsh(0.5 * (matrix + matrix.T))))
    det = dict(details or {})
    det["lambda_min"] = lam_min
    return CheckResult.from_residual(name, threshold - lam_min, 0.0, witness, det)


def check_shaped_hessian(model: InputAffineModel, x_star: np.ndarray, shape: SaturationShape) -> CheckResult:
    """Positive definiteness of the energy-shaped Hessian at the target."""
    x_star = np.asarray(x_star, dtype=float)
    shaped = _shaped_hessian_matrix(model, x_star, shape)
    return _definiteness_result("shaped_hessian", shaped, x_star)


def check_decoupled_damping(model: InputAffineModel, samples: SampleSpec,
                            tol: float = 1e-8, input_scale: float = 1.0) -> CheckResult:
    """Joint residual of the damped-coordinate hypotheses.

    Orthogonality: max ||Jgamma^T Jeta|| over samples. Domination: the
    dissipation must upper-bound the weighted rates of eta and y, i.e.
    max(0, ||etadot||^2_L + ||y||^2_C - ||ell + w u||^2) stays at zero.
    """
    for attr in ("gamma", "eta", "lambda_ell", "lambda_c", "ell"):
        if getattr(model, attr) is None:
            raise MetadataError(f"{model.name}: decoupled-damping check needs '{attr}' metadata")
    pts = samples.draw()
    us = samples.draw_inputs(model.m, input_scale)
    orth = np.empty(len(pts))
    dom = np.empty(len(pts))
    for k, (x, u) in enumerate(zip(pts, us)):
        jg = model.gamma_jacobian(x)
        je = model.eta_jacobian(x)
        orth[k] = float(np.max(np.abs(jg.T @ je), initial=0.0))
        xdot = np.asarray(model.f(x)) + np.atleast_2d(np.asarray(model.g(x))).reshape(model.n, model.m) @ u
        eta_dot = je.T @ xdot
        y = passive_output(model, x, u)
        lam_l = np.atleast_2d(model.lambda_ell(x))
        lam_c = np.atleast_2d(model.lambda_c(x))
        ellu = np.atleast_1d(model.ell(x)).astype(float)
        if model.w is not None:
            ellu = ellu + np.atleast_2d(np.asarray(model.w(x), dtype=float)) @ u
        slack = float(eta_dot @ lam_l @ eta_dot) + float(y @ lam_c @ y) - float(ellu @ ellu)
        dom[k] = max(0.0, slack)
    res_o, wit_o = _worst(pts, orth)
    res_d, wit_d = _worst(pts, dom)
    residual = max(res_o, res_d)
    witness = wit_o if res_o >= res_d else wit_d
    return CheckResult.from_residual("decoupled_damping", residual, tol, witness,
                                     details={"orthogonality": res_o, "domination": res_d})


def _theta_matrix(lambda_ell, lambda_c, upsilon, r_l, k_l) -> np.ndarray:
    lam_l = np.atleast_2d(np.asarray(lambda_ell, dtype=float))
    lam_c = np.atleast_2d(np.asarray(lambda_c, dtype=float))
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    r_inv = np.linalg.inv(np.atleast_2d(np.asarray(r_l, dtype=float)))
    k_l = np.atleast_2d(np.asarray(k_l, dtype=float))
    s = lam_l.shape[0]
    m = lam_c.shape[0]
    z_sm = np.zeros((s, m))
    return np.block([
        [lam_l, z_sm, 0.5 * ups.T @ r_inv],
        [z_sm.T, lam_c, -0.5 * r_inv],
        [0.5 * r_inv @ ups, -0.5 * r_inv, k_l @ r_inv],
    ])


def check_virtual_damping_psd(lambda_ell, lambda_c, upsilon, r_l, k_l,
                              strict: bool = False) -> CheckResult:
    """Semidefiniteness of the damping trade-off matrix coupling the natural
    dissipation weights with the virtual-state gains.

    Evaluated two ways that must agree: directly by the minimum eigenvalue of
    the assembled block matrix, and through its Schur complement in the
    virtual-state block.
    """
    theta = _theta_matrix(lambda_ell, lambda_c, upsilon, r_l, k_l)
    lam_min = float(np.min(np.linalg.eigvalsh(0.5 * (theta + theta.T))))
    scale = float(np.max(np.abs(theta), initial=1.0))
    margin = 1e-10 * scale
    direct = lam_min >= (margin if strict else -margin)

    lam_l = np.atleast_2d(np.asarray(lambda_ell, dtype=float))
    lam_c = np.atleast_2d(np.asarray(lambda_c, dtype=float))
    ups = np.atleast_2d(np.asarray(upsilon, dtype=float))
    kr_inv = np.linalg.inv(np.atleast_2d(np.asarray(k_l, dtype=float))
                           @ np.atleast_2d(np.asarray(r_l, dtype=float)))
    s, m = ups.T.shape[0], lam_c.shape[0]
    corner = np.block([[lam_l, np.zeros((s, m))], [np.zeros((m, s)), lam_c]])
    stack = np.vstack([ups.T, -np.eye(m)])
    schur = corner - 0.25 * stack @ kr_inv @ stack.T
    schur_min = float(np.min(np.linalg.eigvalsh(0.5 * (schur + schur.T))))
    schur_ok = schur_min >= (margin if strict else -margin)

    if direct != schur_ok:
        raise NumericFailure(
            f"direct ({lam_min:.3e}) and Schur ({schur_min:.3e}) semidefiniteness tests disagree")
    target = margin if strict else -margin
    return CheckResult.from_residual("virtual_damping_psd", target - lam_min, 0.0,
                                     details={"lambda_min": lam_min, "schur_lambda_min": schur_min,
                                              "strict": strict})


def _closed_loop_hessian_matrix(model, x_star, ctrl) -> np.ndarray:
    x_star = np.asarray(x_star, dtype=float)
    shaped = _shaped_hessian_matrix(model, x_star, SaturationShape(np.zeros(ctrl.m), ctrl.shape_c.beta))
    jg = model.gamma_jacobian(x_star)
    m = ctrl.m
    d_c = np.diag(ctrl.shape_c.alpha * ctrl.shape_c.beta)
    top = np.hstack([shaped + jg @ d_c @ jg.T, jg @ d_c])
    bot = np.hstack([d_c @ jg.T, ctrl.k_c + d_c])
    hess = np.vstack([top, bot])
    if isinstance(ctrl, NaturalDampingController) and np.any(ctrl.shape_l.alpha > 0.0):
        je = model.eta_jacobian(x_star)
        n = model.n
        d_l = np.diag(ctrl.shape_l.alpha * ctrl.shape_l.beta)
        jz = np.hstack([ctrl.upsilon @ je.T, np.zeros((m, m)), ctrl.k_l])
        hess = np.block([
            [hess, np.zeros((n + m, m))],
            [np.zeros((m, n + m)), np.zeros((m, m))],
        ]) + jz.T @ d_l @ jz
    return hess


def check_closed_loop_hessian(model: InputAffineModel, x_star, ctrl) -> CheckResult:
    """Positive definiteness of the full closed-loop storage Hessian at the
    target, over plant and controller states jointly."""
    if not isinstance(ctrl, (DynamicExtensionController, NaturalDampingController)):
        raise MetadataError("closed-loop Hessian check applies to extension-based families")
    hess = _closed_loop_hessian_matrix(model, x_star, ctrl)
    return _definiteness_result("closed_loop_hessian", hess, np.asarray(x_star, dtype=float))


def suggest_kc(model: InputAffineModel, x_star, ctrl) -> np.ndarray:
    """Smallest tested scaling s*I of the extension gain that makes the
    closed-loop Hessian positive definite: doubling until feasible, then
    eight bisection steps."""
    import dataclasses

    def feasible(scaling: float) -> bool:
        trial = dataclasses.replace(ctrl, k_c=scaling * np.eye(ctrl.m))
        return check_closed_loop_hessian(model, x_star, trial).passed

    hi = 1.0
    for _ in range(64):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise NumericFailure("no positive-definite extension gain found up to 2^64")
    lo = 0.0
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        if mid <= 0.0:
            break
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi * np.eye(ctrl.m)


def lyapunov_monitor(times: np.ndarray, storage: np.ndarray, tol: float | None = None) -> CheckResult:
    """Largest one-step increase rate of the recorded storage.

    ``residual = max_k (S_{k+1} - S_k) / (t_{k+1} - t_k)``; the default
    tolerance scales with the initial storage value.
    """
    times = np.asarray(times, dtype=float)
    storage = np.asarray(storage, dtype=float)
    if times.shape != storage.shape or times.ndim != 1 or times.shape[0] < 2:
        raise ShapeError("monitor needs matching 1-d time and storage arrays with >= 2 samples")
    if np.any(np.diff(times) <= 0.0):
        raise ShapeError("times must be strictly increasing")
    if tol is None:
        tol = 1e-6 * (1.0 + abs(float(storage[0])))
    rates = np.diff(storage) / np.diff(times)
    i = int(np.argmax(rates))
    return CheckResult.from_residual("lyapunov_monotonicity", float(rates[i]), tol,
                                     witness=np.array([times[i + 1]]),
                                     details={"worst_time": float(times[i + 1])})


def linearization_stability(aug_dynamics: Callable[[np.ndarray], np.ndarray],
                            zeta_star: np.ndarray,
                            eps: float | None = None):
    """Spectrum of the finite-difference Jacobian at an equilibrium of the
    augmented closed loop; passes iff every real part is below -1e-9.

    Returns (Spectrum, CheckResult).
    """
    zeta_star = np.asarray(zeta_star, dtype=float)
    residual0 = float(np.linalg.norm(np.asarray(aug_dynamics(zeta_star), dtype=float)))
    if residual0 > 1e-6:
        raise PreconditionError(
            f"point is not an equilibrium (|f| = {residual0:.3e})", residual=residual0)
    jac = numerics.fd_jacobian(aug_dynamics, zeta_star, eps)
    spectrum = numerics.eigenvalues(jac)
    result = CheckResult.from_residual(
        "linearization_stability", spectrum.max_real_part, -1e-9, zeta_star,
        details={"eigenvalues": [[float(v.real), float(v.imag)] for v in spectrum.eigenvalues]})
    return spectrum, result


def dissipation_obstacle_flag(model: InputAffineModel, x_star: np.ndarray) -> bool:
    """True when the dissipation map does not vanish at the target, in which
    case shaping through the natural passive output is obstructed."""
    if model.ell is None:
        raise MetadataError(f"{model.name}: flag requires the dissipation map")
    return float(np.linalg.norm(np.atleast_1d(model.ell(np.asarray(x_star, dtype=float))))) > 1e-9
