"""Plant representations and the reductions between them.

Three model classes live here:

* :class:`InputAffineModel` -- the common currency ``xdot = f(x) + g(x) u``
  with optional passivity metadata (storage, dissipation, output integral,
  damped coordinates).
* :class:`MechanicalModel` -- positions/momenta form with inertia matrix,
  potential, diagonal damping and a constant actuation selector. State order
  is (q, p).
* :class:`BraytonMoserModel` -- circuit dynamics in inductor currents and
  capacitor voltages driven by gradients of resistive/conductive potentials.
  State order is (i_L, v_C).

``mech_to_affine`` and ``bm_to_affine`` produce input-affine reductions that
carry all the metadata the controller synthesis and verification layers need,
so nothing downstream has to know which physical domain a plant came from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics
from .errors import (
    AssumptionViolation,
    DegenerateNetworkError,
    MetadataError,
    NotAssignableError,
    RankError,
)

__all__ = [
    "InputAffineModel",
    "MechanicalModel",
    "BraytonMoserModel",
    "equilibrium_residual",
    "holding_input",
    "mech_to_affine",
    "bm_gradient_field",
    "bm_descriptor",
    "bm_storage",
    "bm_to_affine",
    "bm_integrability_residual",
    "passive_output",
]

Evaluator = Callable[[np.ndarray], np.ndarray]
ScalarEvaluator = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class InputAffineModel:
    """Input-affine plant with optional passivity metadata.

    Required: state dimension ``n``, input dimension ``m``, drift ``f`` and
    input matrix ``g``. Everything else is metadata consumed by specific
    operations, which raise :class:`MetadataError` when it is missing:

    * ``storage`` / ``grad_storage`` -- storage function S and its gradient
      (finite differences are used when the gradient is not registered).
    * ``ell`` -- dissipation map with ``grad(S)^T f = -||ell||^2``.
    * ``w`` -- feedthrough part of the dissipation (r x m); zero when absent.
    * ``d_skew`` -- skew-symmetric direct-feedthrough term (m x m).
    * ``gamma`` / ``grad_gamma`` -- output integral satisfying
      ``d/dt gamma = y`` along trajectories.
    * ``eta`` / ``grad_eta`` -- naturally damped coordinates not associated
      with the output port, with diagonal weights ``lambda_ell`` (s x s) and
      ``lambda_c`` (m x m).
    * ``meta`` -- free-form hints used for wiring (e.g. ``{"dof": 3}`` marks
      a mechanical reduction whose first ``dof`` states are positions).
    """

    n: int
    m: int
    f: Evaluator
    g: Evaluator
    storage: Optional[ScalarEvaluator] = None
    grad_storage: Optional[Evaluator] = None
    ell: Optional[Evaluator] = None
    w: Optional[Evaluator] = None
    d_skew: Optional[Evaluator] = None
    gamma: Optional[Evaluator] = None
    grad_gamma: Optional[Evaluator] = None
    eta: Optional[Evaluator] = None
    grad_eta: Optional[Evaluator] = None
    lambda_ell: Optional[Evaluator] = None
    lambda_c: Optional[Evaluator] = None
    name: str = "plant"
    meta: dict = field(default_factory=dict)

    def storage_gradient(self, x: np.ndarray) -> np.ndarray:
        """Registered analytic gradient of S, else central differences."""
        if self.storage is None:
            raise MetadataError(f"{self.name}: no storage function registered")
        if self.grad_storage is not None:
            return np.asarray(self.grad_storage(x), dtype=float)
        return numerics.fd_gradient(self.storage, x)

    def gamma_jacobian(self, x: np.ndarray) -> np.ndarray:
        """d gamma_j / d x_i as an (n, m) array, analytic when registered."""
        if self.gamma is None:
            raise MetadataError(f"{self.name}: no output integral registered")
        if self.grad_gamma is not None:
            return np.asarray(self.grad_gamma(x), dtype=float).reshape(self.n, self.m)
        return numerics.fd_jacobian(lambda z: np.atleast_1d(self.gamma(z)), x).T

    def eta_jacobian(self, x: np.ndarray) -> np.ndarray:
        if self.eta is None:
            raise MetadataError(f"{self.name}: no damped-coordinate map registered")
        if self.grad_eta is not None:
            return np.asarray(self.grad_eta(x), dtype=float)
        return numerics.fd_jacobian(lambda z: np.atleast_1d(self.eta(z)), x).T


@dataclass(frozen=True)
class MechanicalModel:
    """Port-based mechanical system in positions q and momenta p.

    ``mass_matrix(q)`` must be symmetric positive definite, ``damping(q, p)``
    diagonal positive semi-definite, and ``actuation`` is a constant n x m
    selector. Underactuated systems use the stacked form with the identity on
    the actuated (last m) rows; fully actuated systems use the identity.
    """

    dof: int
    mass_matrix: Callable[[np.ndarray], np.ndarray]
    potential: Callable[[np.ndarray], float]
    grad_potential: Optional[Callable[[np.ndarray], np.ndarray]] = None
    damping: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    actuation: Optional[np.ndarray] = None
    name: str = "mechanical"

    def __post_init__(self):
        if self.actuation is None:
            object.__setattr__(self, "actuation", np.eye(self.dof))

    @property
    def m(self) -> int:
        return self.actuation.shape[1]

    def potential_gradient(self, q: np.ndarray) -> np.ndarray:
        if self.grad_potential is not None:
            return np.asarray(self.grad_potential(q), dtype=float)
        return numerics.fd_gradient(self.potential, q)

    def damping_matrix(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        if self.damping is None:
            return np.zeros((self.dof, self.dof))
        return np.asarray(self.damping(q, p), dtype=float)

    def hamiltonian(self, q: np.ndarray, p: np.ndarray) -> float:
        mass = np.asarray(self.mass_matrix(q), dtype=float)
        return 0.5 * float(p @ np.linalg.solve(mass, p)) + float(self.potential(q))

    def grad_q_hamiltonian(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        """dH/dq = dV/dq - 1/2 v^T (dM/dq_i) v with v = M^{-1} p.

        dM/dq_i is built by central differences of the inertia evaluator; at
        p = 0 the kinetic part vanishes identically.
        """
        grad = self.potential_gradient(q).copy()
        if np.any(p):
            mass = np.asarray(self.mass_matrix(q), dtype=float)
            v = np.linalg.solve(mass, p)
            eps = numerics.default_step(q, 1e-6)
            for i in range(self.dof):
                qp = q.copy(); qm = q.copy()
                qp[i] += eps; qm[i] -= eps
                dm = (np.asarray(self.mass_matrix(qp)) - np.asarray(self.mass_matrix(qm))) / (2.0 * eps)
                grad[i] += -0.5 * float(v @ dm @ v)
        return grad

    def velocity(self, q: np.ndarray, p: np.ndarray) -> np.ndarray:
        mass = np.asarray(self.mass_matrix(q), dtype=float)
        return np.linalg.solve(mass, p)


@dataclass(frozen=True)
class BraytonMoserModel:
    """Topologically complete RLC network in mixed current/voltage coordinates.

    ``v_r`` maps inductor currents to resistive voltage drops and ``i_g`` maps
    capacitor voltages to conductive currents; both vanish at the origin and
    are monotone (checked by sampling, not proven). ``interconnection`` is the
    inductor/capacitor coupling matrix with entries in {-1, 0, 1}.
    """

    inductances: np.ndarray
    capacitances: np.ndarray
    interconnection: np.ndarray
    v_r: Evaluator
    i_g: Evaluator
    g_l: np.ndarray
    g_c: np.ndarray
    jac_v_r: Optional[Evaluator] = None
    jac_i_g: Optional[Evaluator] = None
    name: str = "network"

    @property
    def n_l(self) -> int:
        return self.inductances.shape[0]

    @property
    def n_c(self) -> int:
        return self.capacitances.shape[0]

    @property
    def n(self) -> int:
        return self.n_l + self.n_c

    @property
    def m(self) -> int:
        return self.g_l.shape[1] + self.g_c.shape[1]

    def split(self, x: np.ndarray):
        return x[: self.n_l], x[self.n_l:]

    def descriptor(self) -> np.ndarray:
        """Constant descriptor blockdiag(-L, C) multiplying xdot."""
        return np.block([
            [-self.inductances, np.zeros((self.n_l, self.n_c))],
            [np.zeros((self.n_c, self.n_l)), self.capacitances],
        ])

    def input_matrix(self) -> np.ndarray:
        out = np.zeros((self.n, self.m))
        out[: self.n_l, : self.g_l.shape[1]] = self.g_l
        out[self.n_l:, self.g_l.shape[1]:] = self.g_c
        return out

    def v_r_jacobian(self, i_l: np.ndarray) -> np.ndarray:
        if self.n_l == 0:
            return np.zeros((0, 0))
        if self.jac_v_r is not None:
            return np.asarray(self.jac_v_r(i_l), dtype=float)
        return numerics.fd_jacobian(lambda z: np.atleast_1d(self.v_r(z)), i_l)

    def i_g_jacobian(self, v_c: np.ndarray) -> np.ndarray:
        if self.n_c == 0:
            return np.zeros((0, 0))
        if self.jac_i_g is not None:
            return np.asarray(self.jac_i_g(v_c), dtype=float)
        return numerics.fd_jacobian(lambda z: np.atleast_1d(self.i_g(z)), v_c)


# ---------------------------------------------------------------------------
# assignable equilibria


def _projector_residual(model: InputAffineModel, x: np.ndarray) -> float:
    """Norm of the drift component orthogonal to the input-matrix image.

    Equivalent to annihilating the drift with a left annihilator of g, but
    avoids choosing an annihilator basis: the orthogonal projector
    I - g (g^T g)^{-1} g^T is basis-free.
    """
    g = np.atleast_2d(np.asarray(model.g(x), dtype=float)).reshape(model.n, model.m)
    fx = np.asarray(model.f(x), dtype=float)
    sv = np.linalg.svd(g, compute_uv=False)
    if sv.size < model.m or sv[-1] <= 1e-10 * max(sv[0], 1.0):
        raise RankError(f"{model.name}: input matrix is rank deficient at the query point")
    coeff = np.linalg.solve(g.T @ g, g.T @ fx)
    return float(np.linalg.norm(fx - g @ coeff))


def equilibrium_residual(model: InputAffineModel, x_star: np.ndarray) -> float:
    """Distance of f(x*) from the image of g(x*); zero iff x* is assignable."""
    return _projector_residual(model, np.asarray(x_star, dtype=float))


def holding_input(model: InputAffineModel, x_star: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Constant input that cancels the drift at an assignable equilibrium.

    kappa = (g^T g)^{-1} g^T f evaluated at x*, with the opposite sign
    convention folded into the control laws (they subtract kappa).
    """
    x_star = np.asarray(x_star, dtype=float)
    residual = equilibrium_residual(model, x_star)
    if residual > tol:
        raise NotAssignableError(
            f"{model.name}: residual {residual:.3e} exceeds {tol:.1e}; target is not assignable")
    g = np.atleast_2d(np.asarray(model.g(x_star), dtype=float)).reshape(model.n, model.m)
    fx = np.asarray(model.f(x_star), dtype=float)
    return np.linalg.solve(g.T @ g, g.T @ fx)


# ---------------------------------------------------------------------------
# mechanical reduction


def mech_to_affine(mech: MechanicalModel) -> InputAffineModel:
    """Input-affine reduction of a mechanical model, state x = (q, p).

    The storage is the total energy, the output integral is G^T q (so the
    passive output is G^T qdot), and when the damping matrix has nonzero
    entries on unactuated coordinates those positions are exposed as the
    damped coordinates with the damping values as weights. The actuated-block
    damping must be nonsingular for the damped-coordinate metadata to be
    valid; it is omitted otherwise.
    """
    n = mech.dof
    big_g = np.asarray(mech.actuation, dtype=float)
    m = big_g.shape[1]

    def f(x):
        q, p = x[:n], x[n:]
        qdot = mech.velocity(q, p)
        dq_h = mech.grad_q_hamiltonian(q, p)
        damp = mech.damping_matrix(q, p)
        return np.concatenate([qdot, -dq_h - damp @ qdot])

    g_const = np.vstack([np.zeros((n, m)), big_g])

    def g(x):
        return g_const

    def storage(x):
        return mech.hamiltonian(x[:n], x[n:])

    def grad_storage(x):
        q, p = x[:n], x[n:]
        return np.concatenate([mech.grad_q_hamiltonian(q, p), mech.velocity(q, p)])

    def gamma(x):
        return big_g.T @ x[:n]

    grad_gamma_const = np.vstack([big_g, np.zeros((n, m))])

    def grad_gamma(x):
        return grad_gamma_const

    def ell(x):
        q, p = x[:n], x[n:]
        damp = mech.damping_matrix(q, p)
        return np.sqrt(np.clip(np.diag(damp), 0.0, None)) * mech.velocity(q, p)

    meta = {"dof": n, "kind": "mechanical", "mechanical": mech}

    eta = grad_eta = lambda_ell = lambda_c = None
    if mech.damping is not None and m < n:
        # Damped-coordinate metadata only makes sense for a constant diagonal
        # damping pattern; probe it at the origin.
        damp0 = mech.damping_matrix(np.zeros(n), np.zeros(n))
        unact = np.diag(damp0)[: n - m]
        act = np.diag(damp0)[n - m:]
        idx = np.nonzero(unact > 0.0)[0]
        if idx.size > 0:
            if np.any(act <= 0.0):
                raise AssumptionViolation(
                    f"{mech.name}: actuated-block damping must be nonsingular to expose damped coordinates")
            sel = np.zeros((2 * n, idx.size))
            for k, i in enumerate(idx):
                sel[i, k] = 1.0

            def eta(x, _idx=idx):
                return x[_idx]

            def grad_eta(x, _sel=sel):
                return _sel

            def lambda_ell(x, _vals=unact[idx]):
                return np.diag(_vals)

            def lambda_c(x, _vals=act):
                return np.diag(_vals)

            meta["eta_indices"] = idx

    return InputAffineModel(
        n=2 * n, m=m, f=f, g=g,
        storage=storage, grad_storage=grad_storage,
        ell=ell, gamma=gamma, grad_gamma=grad_gamma,
        eta=eta, grad_eta=grad_eta, lambda_ell=lambda_ell, lambda_c=lambda_c,
        name=mech.name, meta=meta,
    )


# ---------------------------------------------------------------------------
# Brayton-Moser reduction


def bm_gradient_field(bm: BraytonMoserModel, x: np.ndarray) -> np.ndarray:
    """Gradient of the mixed potential, assembled from the network data."""
    i_l, v_c = bm.split(np.asarray(x, dtype=float))
    gamma_ic = bm.interconnection
    top = gamma_ic @ v_c + np.atleast_1d(bm.v_r(i_l)) if bm.n_l else np.zeros(0)
    bot = gamma_ic.T @ i_l - np.atleast_1d(bm.i_g(v_c)) if bm.n_c else np.zeros(0)
    return np.concatenate([top, bot])


def _bm_hessian(bm: BraytonMoserModel, x: np.ndarray) -> np.ndarray:
    i_l, v_c = bm.split(np.asarray(x, dtype=float))
    jv = bm.v_r_jacobian(i_l)
    ji = bm.i_g_jacobian(v_c)
    return np.block([
        [jv, bm.interconnection],
        [bm.interconnection.T, -ji],
    ])


def bm_descriptor(bm: BraytonMoserModel, x: np.ndarray) -> np.ndarray:
    """State-dependent descriptor matrix of the gradient-form dynamics.

    Equals hess(P) * blockdiag(L^{-1}, C^{-1}) * Q, which reduces to the block
    form [[-Jv_r, Gamma], [-Gamma^T, -Ji_g]]; its symmetric part is negative
    semi-definite for monotone branch characteristics.
    """
    x = np.asarray(x, dtype=float)
    hess = _bm_hessian(bm, x)
    sv = np.linalg.svd(hess, compute_uv=False)
    if sv.size and sv[-1] <= 1e-10 * max(sv[0], 1.0):
        raise DegenerateNetworkError(f"{bm.name}: mixed-potential Hessian is singular")
    jv = hess[: bm.n_l, : bm.n_l]
    ji = -hess[bm.n_l:, bm.n_l:]
    return np.block([
        [-jv, bm.interconnection],
        [-bm.interconnection.T, -ji],
    ])


def bm_storage(bm: BraytonMoserModel, x: np.ndarray) -> float:
    """Storage candidate: half the squared potential gradient, weighted by
    blockdiag(L^{-1}, C^{-1})."""
    grad = bm_gradient_field(bm, x)
    xi = np.concatenate([
        np.linalg.solve(bm.inductances, grad[: bm.n_l]) if bm.n_l else np.zeros(0),
        np.linalg.solve(bm.capacitances, grad[bm.n_l:]) if bm.n_c else np.zeros(0),
    ])
    return 0.5 * float(grad @ xi)


def bm_to_affine(bm: BraytonMoserModel) -> InputAffineModel:
    """Input-affine reduction of a network model.

    f = Q^{-1} grad(P), g = Q^{-1} g_tilde, storage = the gradient-weighted
    candidate from :func:`bm_storage`. The passive output is
    y(x, u) = -g^T descriptor(x)^T xdot, which the returned model exposes via
    its storage gradient (y = g^T grad(S), no feedthrough: the dissipation map
    does not involve u because g_tilde is constant).
    """
    q_desc = bm.descriptor()
    g_const = np.linalg.solve(q_desc, bm.input_matrix())

    def f(x):
        return np.linalg.solve(q_desc, bm_gradient_field(bm, x))

    def g(x):
        return g_const

    def storage(x):
        return bm_storage(bm, x)

    def grad_storage(x):
        return bm_descriptor(bm, x) @ f(x)

    def ell(x):
        desc = bm_descriptor(bm, x)
        sym = -0.5 * (desc + desc.T)
        vals, vecs = np.linalg.eigh(sym)
        fx = f(x)
        return np.sqrt(np.clip(vals, 0.0, None)) * (vecs.T @ fx)

    meta = {"kind": "brayton_moser", "network": bm}

    return InputAffineModel(
        n=bm.n, m=bm.m, f=f, g=g,
        storage=storage, grad_storage=grad_storage, ell=ell,
        name=bm.name, meta=meta,
    )


def bm_integrability_residual(bm: BraytonMoserModel, x: np.ndarray) -> float:
    """Asymmetry of the Jacobian of x -> descriptor(x) @ g per input column.

    Zero means the output admits a local integral gamma with gammadot = y;
    the check realizes the closed-one-form criterion by brute force.
    """
    x = np.asarray(x, dtype=float)
    q_desc = bm.descriptor()
    g_const = np.linalg.solve(q_desc, bm.input_matrix())
    worst = 0.0
    for j in range(g_const.shape[1]):
        def column(z, _j=j):
            return bm_descriptor(bm, z) @ g_const[:, _j]

        jac = numerics.fd_jacobian(column, x)
        worst = max(worst, float(np.max(np.abs(jac - jac.T), initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# passive output


def passive_output(model: InputAffineModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Output conjugate to the storage function.

    y = g^T grad(S) + 2 w^T ell + (w^T w + D) u; the last two terms drop out
    for models without feedthrough dissipation or skew feedthrough.
    """
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if model.storage is None:
        raise MetadataError(f"{model.name}: passive output requires a storage function")
    g = np.atleast_2d(np.asarray(model.g(x), dtype=float)).reshape(model.n, model.m)
    y = g.T @ model.storage_gradient(x)
    if model.w is not None:
        if model.ell is None:
            raise MetadataError(f"{model.name}: feedthrough dissipation requires the dissipation map")
        w = np.atleast_2d(np.asarray(model.w(x), dtype=float))
        y = y + 2.0 * w.T @ np.atleast_1d(model.ell(x)) + (w.T @ w) @ u
    if model.d_skew is not None:
        dsk = np.atleast_2d(np.asarray(model.d_skew(x), dtype=float))
        if float(np.max(np.abs(dsk + dsk.T), initial=0.0)) > 1e-12:
            raise MetadataError(f"{model.name}: skew feedthrough term is not skew-symmetric")
        y = y + dsk @ u
    return y
