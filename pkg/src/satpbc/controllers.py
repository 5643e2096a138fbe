"""Saturated controller families.

Every control law here is built from the bounded shaping term
``alpha_i * tanh(beta_i * z_i)``, so the output of each family lives in a
closed interval per channel regardless of the plant state. Controllers are
parameter blocks with pure ``control``/``state_derivative`` evaluators; the
simulation layer owns the controller state and integrates it jointly with the
plant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "SaturationShape",
    "sat_potential",
    "sat_potential_grad",
    "OutputDampingController",
    "DynamicExtensionController",
    "NaturalDampingController",
    "FullyActuatedController",
    "SteadyStateFilter",
    "FilteredController",
    "saturation_bounds",
]

_LN2 = float(np.log(2.0))


def _as_positive_vector(v, name, allow_zero=False):
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if allow_zero:
        if np.any(arr < 0.0):
            raise ConfigurationError(f"{name} entries must be nonnegative")
    elif np.any(arr <= 0.0):
        raise ConfigurationError(f"{name} entries must be positive")
    return arr


def _as_pd_matrix(v, m, name, diagonal=False):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(m)
    elif arr.ndim == 1:
        arr = np.diag(arr)
    if arr.shape != (m, m):
        raise ConfigurationError(f"{name} must be {m}x{m}")
    if diagonal and np.any(arr - np.diag(np.diag(arr)) != 0.0):
        raise ConfigurationError(f"{name} must be diagonal")
    eigs = np.linalg.eigvalsh(0.5 * (arr + arr.T))
    if np.any(eigs <= 0.0):
        raise ConfigurationError(f"{name} must be positive definite")
    return arr


@dataclass(frozen=True)
class SaturationShape:
    """Per-channel amplitude/steepness pair of the tanh shaping term.

    Amplitudes must be nonnegative (a zero entry disables that channel's
    shaping term entirely); steepnesses must be strictly positive.
    """

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_positive_vector(self.alpha, "alpha", allow_zero=True))
        object.__setattr__(self, "beta", _as_positive_vector(self.beta, "beta"))
        if self.alpha.shape != self.beta.shape:
            raise ConfigurationError("alpha and beta must have matching shapes")

    @property
    def m(self) -> int:
        return self.alpha.shape[0]


def _lncosh(t: np.ndarray) -> np.ndarray:
    # |t| + log(1 + exp(-2|t|)) - log 2 never overflows, unlike log(cosh(t)).
    a = np.abs(t)
    return a + np.log1p(np.exp(-2.0 * a)) - _LN2


def sat_potential(shape: SaturationShape, z: np.ndarray) -> float:
    """Bounded-slope shaping potential: sum_i alpha_i/beta_i * ln cosh(beta_i z_i)."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return float(np.sum(shape.alpha / shape.beta * _lncosh(shape.beta * z)))


def sat_potential_grad(shape: SaturationShape, z: np.ndarray) -> np.ndarray:
    """Gradient of the shaping potential: alpha_i * tanh(beta_i z_i), bounded by alpha."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return shape.alpha * np.tanh(shape.beta * z)


@dataclass(frozen=True)
class OutputDampingController:
    """Static saturated law; damping injected through the measured output.

    u = -grad_potential(gamma - gamma*) - kappa - kp .* tanh(y). Requires the
    passive output as a measurement, so it is the only family that cannot run
    without output sensors.
    """

    shape: SaturationShape
    kp: np.ndarray
    kappa: np.ndarray
    gamma_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kp", _as_positive_vector(self.kp, "kp"))
        object.__setattr__(self, "kappa", np.atleast_1d(np.asarray(self.kappa, dtype=float)))
        object.__setattr__(self, "gamma_star", np.atleast_1d(np.asarray(self.gamma_star, dtype=float)))

    @property
    def m(self) -> int:
        return self.shape.m

    @property
    def state_dim(self) -> int:
        return 0

    def control(self, gamma_x: np.ndarray, y: np.ndarray) -> np.ndarray:
        gamma_x = np.atleast_1d(np.asarray(gamma_x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return (-sat_potential_grad(self.shape, gamma_x - self.gamma_star)
                - self.kappa - self.kp * np.tanh(y))


@dataclass(frozen=True)
class DynamicExtensionController:
    """Saturated law with a dirty-derivative extension state x_c.

    The extension injects damping using only the output integral gamma(x):

        z_c   = gamma(x) - gamma* + x_c
        u     = -kappa - grad_potential_c(z_c)
        xcdot = -R_c [grad_potential_c(z_c) + K_c x_c]

    The extension equilibrium is pinned at x_c = 0.
    """

    shape_c: SaturationShape
    kappa: np.ndarray
    gamma_star: np.ndarray
    k_c: np.ndarray
    r_c: np.ndarray

    def __post_init__(self):
        m = self.shape_c.m
        object.__setattr__(self, "kappa", np.atleast_1d(np.asarray(self.kappa, dtype=float)))
        object.__setattr__(self, "gamma_star", np.atleast_1d(np.asarray(self.gamma_star, dtype=float)))
        object.__setattr__(self, "k_c", _as_pd_matrix(self.k_c, m, "K_c"))
        object.__setattr__(self, "r_c", _as_pd_matrix(self.r_c, m, "R_c"))

    @property
    def m(self) -> int:
        return self.shape_c.m

    @property
    def state_dim(self) -> int:
        return self.m

    def z_c(self, gamma_x: np.ndarray, x_c: np.ndarray) -> np.ndarray:
        return np.atleast_1d(np.asarray(gamma_x, dtype=float)) - self.gamma_star + x_c

    def control(self, gamma_x: np.ndarray, x_c: np.ndarray) -> np.ndarray:
        return -self.kappa - sat_potential_grad(self.shape_c, self.z_c(gamma_x, x_c))

    def state_derivative(self, gamma_x: np.ndarray, x_c: np.ndarray) -> np.ndarray:
        grad = sat_potential_grad(self.shape_c, self.z_c(gamma_x, x_c))
        return -self.r_c @ (grad + self.k_c @ x_c)


@dataclass(frozen=True)
class NaturalDampingController:
    """Dynamic extension plus a virtual state x_l that recruits the plant's
    own dissipation on coordinates away from the output port.

        z_l   = Upsilon (eta(x) - eta*) + K_l x_l
        u     = -kappa - grad_potential_l(z_l) - grad_potential_c(z_c)
        xldot = -R_l grad_potential_l(z_l)

    K_l and R_l must be diagonal positive definite (their product has to
    commute); Upsilon must have rank min(m, s).
    """

    shape_c: SaturationShape
    shape_l: SaturationShape
    kappa: np.ndarray
    gamma_star: np.ndarray
    eta_star: np.ndarray
    k_c: np.ndarray
    r_c: np.ndarray
    upsilon: np.ndarray
    k_l: np.ndarray
    r_l: np.ndarray

    def __post_init__(self):
        m = self.shape_c.m
        object.__setattr__(self, "kappa", np.atleast_1d(np.asarray(self.kappa, dtype=float)))
        object.__setattr__(self, "gamma_star", np.atleast_1d(np.asarray(self.gamma_star, dtype=float)))
        object.__setattr__(self, "eta_star", np.atleast_1d(np.asarray(self.eta_star, dtype=float)))
        object.__setattr__(self, "k_c", _as_pd_matrix(self.k_c, m, "K_c"))
        object.__setattr__(self, "r_c", _as_pd_matrix(self.r_c, m, "R_c"))
        ups = np.atleast_2d(np.asarray(self.upsilon, dtype=float))
        s = self.eta_star.shape[0]
        if ups.shape != (m, s):
            raise ConfigurationError(f"Upsilon must be {m}x{s}")
        if np.linalg.matrix_rank(ups) < min(m, s):
            raise ConfigurationError("Upsilon must have rank min(m, s)")
        object.__setattr__(self, "upsilon", ups)
        object.__setattr__(self, "k_l", _as_pd_matrix(self.k_l, m, "K_l", diagonal=True))
        object.__setattr__(self, "r_l", _as_pd_matrix(self.r_l, m, "R_l", diagonal=True))
        if self.shape_l.m != m:
            raise ConfigurationError("shape_l dimension must match the input dimension")

    @property
    def m(self) -> int:
        return self.shape_c.m

    @property
    def state_dim(self) -> int:
        return 2 * self.m

    def z_c(self, gamma_x, x_c):
        return np.atleast_1d(np.asarray(gamma_x, dtype=float)) - self.gamma_star + x_c

    def z_l(self, eta_x, x_l):
        eta_x = np.atleast_1d(np.asarray(eta_x, dtype=float))
        return self.upsilon @ (eta_x - self.eta_star) + self.k_l @ x_l

    def control(self, gamma_x, eta_x, x_c, x_l) -> np.ndarray:
        return (-self.kappa
                - sat_potential_grad(self.shape_l, self.z_l(eta_x, x_l))
                - sat_potential_grad(self.shape_c, self.z_c(gamma_x, x_c)))

    def state_derivative(self, gamma_x, eta_x, x_c, x_l):
        grad_c = sat_potential_grad(self.shape_c, self.z_c(gamma_x, x_c))
        grad_l = sat_potential_grad(self.shape_l, self.z_l(eta_x, x_l))
        return -self.r_c @ (grad_c + self.k_c @ x_c), -self.r_l @ grad_l


@dataclass(frozen=True)
class FullyActuatedController:
    """Mechanical law for square actuation: cancel the potential gradient and
    assign a saturated one in its place.

        u = grad_potential(q) - grad_potential_c(q - q* + x_c)

    with the same dirty-derivative extension as the dynamic-extension family.
    ``grad_potential_bound`` records sup |grad V_i| for the saturation
    interval report.
    """

    shape_c: SaturationShape
    q_star: np.ndarray
    k_c: np.ndarray
    r_c: np.ndarray
    grad_potential: callable
    grad_potential_bound: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.shape_c.m
        object.__setattr__(self, "q_star", np.atleast_1d(np.asarray(self.q_star, dtype=float)))
        if self.q_star.shape[0] != n:
            raise ConfigurationError("q_star dimension must match the shaping dimension")
        object.__setattr__(self, "k_c", _as_pd_matrix(self.k_c, n, "K_c"))
        object.__setattr__(self, "r_c", _as_pd_matrix(self.r_c, n, "R_c"))
        if self.grad_potential_bound is not None:
            object.__setattr__(self, "grad_potential_bound",
                               np.abs(np.atleast_1d(np.asarray(self.grad_potential_bound, dtype=float))))

    @property
    def m(self) -> int:
        return self.shape_c.m

    @property
    def state_dim(self) -> int:
        return self.m

    def z_c(self, q, x_c):
        return np.atleast_1d(np.asarray(q, dtype=float)) - self.q_star + x_c

    def control(self, q, x_c) -> np.ndarray:
        grad_v = np.atleast_1d(np.asarray(self.grad_potential(np.asarray(q, dtype=float)), dtype=float))
        return grad_v - sat_potential_grad(self.shape_c, self.z_c(q, x_c))

    def state_derivative(self, q, x_c) -> np.ndarray:
        grad = sat_potential_grad(self.shape_c, self.z_c(q, x_c))
        return -self.r_c @ (grad + self.k_c @ x_c)


@dataclass(frozen=True)
class SteadyStateFilter:
    """Saturated filter state that absorbs constant input offsets.

        psidot = -R_psi psi + Gain(psi) q_err
        u_psi  = -alpha_psi .* tanh(beta_psi .* psi)

    ``gain="sech"`` uses Gain(psi) = diag(alpha_i beta_i sech(beta_i psi_i)),
    which keeps the filter's authority bounded; ``gain="identity"`` with a
    zero leak recovers a plain integrator of the position error.
    """

    shape_psi: SaturationShape
    r_psi: np.ndarray
    gain: str = "sech"

    def __post_init__(self):
        m = self.shape_psi.m
        arr = np.asarray(self.r_psi, dtype=float)
        if arr.ndim == 0:
            arr = float(arr) * np.eye(m)
        elif arr.ndim == 1:
            arr = np.diag(arr)
        if arr.shape != (m, m) or np.any(arr - np.diag(np.diag(arr)) != 0.0):
            raise ConfigurationError("R_psi must be diagonal")
        if np.any(np.diag(arr) < 0.0):
            raise ConfigurationError("R_psi entries must be nonnegative")
        object.__setattr__(self, "r_psi", arr)
        if self.gain not in ("sech", "identity"):
            raise ConfigurationError("gain must be 'sech' or 'identity'")

    @property
    def m(self) -> int:
        return self.shape_psi.m

    def gain_matrix(self, psi: np.ndarray) -> np.ndarray:
        if self.gain == "identity":
            return np.eye(self.m)
        a, b = self.shape_psi.alpha, self.shape_psi.beta
        return np.diag(a * b / np.cosh(b * np.atleast_1d(np.asarray(psi, dtype=float))))

    def u_psi(self, psi: np.ndarray) -> np.ndarray:
        if self.gain == "identity":
            return -np.atleast_1d(np.asarray(psi, dtype=float))
        return -sat_potential_grad(self.shape_psi, psi)

    def state_derivative(self, psi: np.ndarray, q_err: np.ndarray) -> np.ndarray:
        psi = np.atleast_1d(np.asarray(psi, dtype=float))
        q_err = np.atleast_1d(np.asarray(q_err, dtype=float))
        return -self.r_psi @ psi + self.gain_matrix(psi) @ q_err


@dataclass(frozen=True)
class FilteredController:
    """Fully-actuated law augmented with the steady-state filter.

    The state-dependent gravity term of the base law is replaced by its value
    at the target, so the whole control stays saturated:

        u = -grad_potential_c(q - q* + x_c) + u_psi(psi) + grad_potential(q*)
    """

    base: FullyActuatedController
    filt: SteadyStateFilter
    grad_potential_star: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.filt.m != self.base.m:
            raise ConfigurationError("filter dimension must match the base controller")
        gstar = self.grad_potential_star
        if gstar is None:
            gstar = np.atleast_1d(np.asarray(self.base.grad_potential(self.base.q_star), dtype=float))
        object.__setattr__(self, "grad_potential_star", np.atleast_1d(np.asarray(gstar, dtype=float)))

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def state_dim(self) -> int:
        return 2 * self.m

    def control(self, q, x_c, psi) -> np.ndarray:
        shaped = sat_potential_grad(self.base.shape_c, self.base.z_c(q, x_c))
        return -shaped + self.filt.u_psi(psi) + self.grad_potential_star

    def state_derivative(self, q, x_c, psi):
        xc_dot = self.base.state_derivative(q, x_c)
        q_err = np.atleast_1d(np.asarray(q, dtype=float)) - self.base.q_star
        psi_dot = self.filt.state_derivative(psi, q_err)
        return xc_dot, psi_dot


def saturation_bounds(ctrl) -> np.ndarray:
    """Closed per-channel interval [lo_i, hi_i] containing every possible output.

    The intervals are exact consequences of |tanh| <= 1 for each family.
    """
    if isinstance(ctrl, OutputDampingController):
        radius = ctrl.shape.alpha + ctrl.kp
        center = -ctrl.kappa
    elif isinstance(ctrl, NaturalDampingController):
        radius = ctrl.shape_c.alpha + ctrl.shape_l.alpha
        center = -ctrl.kappa
    elif isinstance(ctrl, DynamicExtensionController):
        radius = ctrl.shape_c.alpha
        center = -ctrl.kappa
    elif isinstance(ctrl, FullyActuatedController):
        if ctrl.grad_potential_bound is None:
            raise ConfigurationError("saturation bounds need grad_potential_bound metadata")
        radius = ctrl.shape_c.alpha + ctrl.grad_potential_bound
        center = np.zeros(ctrl.m)
    elif isinstance(ctrl, FilteredController):
        radius = ctrl.base.shape_c.alpha + ctrl.filt.shape_psi.alpha
        center = ctrl.grad_potential_star
    else:
        raise ConfigurationError(f"unknown controller family: {type(ctrl).__name__}")
    return np.column_stack([center - radius, center + radius])
