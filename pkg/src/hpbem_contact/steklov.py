"""Discrete Poincare-Steklov operator and the stabilization matrices.

S = W + (K + M/2)^T V^-1 (K + M/2) on the primal space.  Pointwise, the discrete
Steklov operator applied to u is  W u + (K' + 1/2) psi  with psi = V^-1 (K + M/2) u,
where W u = -d/ds V*(du/ds) is taken by a central difference on the reference
interval.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import CONTACT
from .kernels import PanelKernel
from .operators import galerkin, mass_matrix, potential_matrix
from .quadrature import graded_both_ends
from .spaces import discontinuous_space

FD_STEP = 1e-4
FULL = "full"
APPROXIMATE = "approximate"
OFF = "off"


@dataclass(frozen=True)
class GammaWeight:
    gamma0: float
    values: np.ndarray  # per element of the mesh

    def on(self, k):
        return float(self.values[k])


def build_gamma(mesh, gamma0):
    if gamma0 < 0:
        raise ValueError("gamma0 must be nonnegative")
    h = mesh.arrays()[4]
    return GammaWeight(float(gamma0), gamma0 * h / mesh.degrees.astype(float) ** 2)


@dataclass(frozen=True)
class SteklovMatrices:
    S: np.ndarray
    chol: tuple
    H: np.ndarray      # V^-1 (K + M/2): primal coefficients -> density coefficients
    Khalf: np.ndarray  # K + M/2

    def density(self, u):
        return self.H @ u


def build_steklov(ops):
    Kh = ops.K + 0.5 * ops.M
    try:
        chol = cho_factor(ops.V, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("single layer matrix is not positive definite") from exc
    H = cho_solve(chol, Kh)
    return SteklovMatrices(ops.W + Kh.T @ H, chol, H, Kh)


def _contact_rule(mesh, levels=2, n=8, sigma=0.15):
    """Quadrature points on the contact elements, graded toward both element ends."""
    a, b, tau, nrm, h = mesh.arrays()
    t, w = graded_both_ends(levels, n, sigma)
    ids = np.array(mesh.ids(CONTACT), dtype=int)
    return ids, t, w


def pointwise_steklov(ops, stek, X, NX, tangents, hs, fd_step=FD_STEP):
    """Matrix A with (S_hp u)(X[q]) = A[q] @ u, shape (len(X), 2, primal ndof).

    tangents/hs give the element tangent and length used for the difference quotient
    of V*(du/ds) along the boundary.
    """
    sp = ops.spaces
    vstar = PanelKernel("Vstar", ops.material)
    kadj = PanelKernel("Kadj", ops.material)
    step = (fd_step * hs)[:, None] * tangents
    plus = potential_matrix(vstar, ops.mesh, sp.primal, X + step, deriv=True)
    minus = potential_matrix(vstar, ops.mesh, sp.primal, X - step, deriv=True)
    PW = -(plus - minus) / (2.0 * fd_step * hs)[:, None, None]
    PK = potential_matrix(kadj, ops.mesh, sp.density, X, NX)
    return PW + np.einsum("qcd,de->qce", PK + 0.5 * _point_values(ops, sp.density, X), stek.H)


def _point_values(ops, space, X):
    """Evaluation matrix of a vector space at boundary points, shape (len(X), 2, ndof)."""
    mesh = ops.mesh
    a, b, tau, nrm, h = mesh.arrays()
    out = np.zeros((X.shape[0], 2, space.ndof))
    for q, x in enumerate(X):
        k = _locate(mesh, x)
        pos = space.local(k)
        if pos < 0:
            continue
        t = float((x - a[k]) @ tau[k] / h[k])
        vals = space.basis(pos, np.array([t]))[:, 0]
        for bb, d in enumerate(space.dofmaps[pos]):
            if d >= 0:
                out[q, 0, 2 * d] = vals[bb]
                out[q, 1, 2 * d + 1] = vals[bb]
    return out


def _locate(mesh, x):
    a, b, tau, nrm, h = mesh.arrays()
    rel = x - a
    al = np.einsum("kc,kc->k", rel, tau)
    be = np.abs(np.einsum("kc,kc->k", rel, nrm))
    inside = (al >= -1e-12 * h) & (al <= h * (1 + 1e-12))
    cand = np.where(inside, be, np.inf)
    return int(np.argmin(cand))


def contact_evaluation(ops, stek, levels=2, n=8, sigma=0.15, fd_step=FD_STEP):
    """Pointwise Steklov matrix and weights at the graded contact quadrature points."""
    mesh = ops.mesh
    a, b, tau, nrm, h = mesh.arrays()
    ids, t, w = _contact_rule(mesh, levels, n, sigma)
    X = (a[ids][:, None, :] + t[None, :, None] * (b[ids] - a[ids])[:, None, :]).reshape(-1, 2)
    NX = np.repeat(nrm[ids], t.size, axis=0)
    T = np.repeat(tau[ids], t.size, axis=0)
    hs = np.repeat(h[ids], t.size)
    A = pointwise_steklov(ops, stek, X, NX, T, hs, fd_step)
    W = (w[None, :] * h[ids][:, None]).ravel()
    elem = np.repeat(ids, t.size)
    return A, W, elem, X


def build_Shat_full(ops, stek, gamma, fd_step=FD_STEP):
    """<gamma S_hp u, S_hp v> on the contact part from pointwise Steklov values."""
    A, W, elem, _ = contact_evaluation(ops, stek, fd_step=fd_step)
    wg = W * gamma.values[elem]
    A2 = A.reshape(-1, A.shape[-1])
    return A2.T @ (np.repeat(wg, 2)[:, None] * A2)


def _bracket_matrix(ops, test, weight):
    """-sum_E weight_E [phi_i V*(dv/ds)]_{dE} over the elements of test (discontinuous)."""
    mesh = ops.mesh
    a, b, tau, nrm, h = mesh.arrays()
    vstar = PanelKernel("Vstar", ops.material)
    ends = np.concatenate([a[list(test.elems)], b[list(test.elems)]])
    P = potential_matrix(vstar, mesh, ops.spaces.primal, ends, deriv=True)
    m = len(test.elems)
    out = np.zeros((test.ndof, ops.spaces.primal.ndof))
    for pos, k in enumerate(test.elems):
        at0 = test.basis(pos, np.array([0.0]))[:, 0]
        at1 = test.basis(pos, np.array([1.0]))[:, 0]
        for bb, d in enumerate(test.dofmaps[pos]):
            for c in range(2):
                out[2 * d + c] -= weight[k] * (at1[bb] * P[m + pos, c] - at0[bb] * P[pos, c])
    return out


def _row_weights(space, weight):
    r = np.zeros(space.ndof)
    for pos, k in enumerate(space.elems):
        for d in space.dofmaps[pos]:
            r[2 * d:2 * d + 2] = weight[k]
    return r


def weak_steklov_rows(ops, stek, test, weight):
    """Rows <weight * phi_i, S_hp v> for a discontinuous test space on the contact part,
    with W handled by elementwise integration by parts."""
    mesh = ops.mesh
    sp = ops.spaces
    vstar = PanelKernel("Vstar", ops.material)
    kadj = PanelKernel("Kadj", ops.material)
    rw = _row_weights(test, weight)
    Wt = galerkin(vstar, mesh, test, sp.primal, True, True) * rw[:, None] + _bracket_matrix(ops, test, weight)
    Kt = galerkin(kadj, mesh, test, sp.density) + 0.5 * mass_matrix(mesh, test, sp.density)
    return Wt + (Kt * rw[:, None]) @ stek.H


def build_coupling_Stilde(ops, stek, gamma, multiplier_space=None):
    """S~[i, :] = <gamma mu_i, S_hp v> for multiplier basis functions mu_i."""
    mult = ops.spaces.multiplier if multiplier_space is None else multiplier_space
    return weak_steklov_rows(ops, stek, mult, gamma.values)


def projection_space(mesh):
    """Discontinuous Legendre space of degree p_E on the contact elements."""
    return discontinuous_space(mesh, "projection", 0, mesh.ids(CONTACT))


def build_Shat_approx(ops, stek, gamma):
    """A^T M_gamma A with A the L2 projection of S_hp onto the degree-p space on the contact part."""
    mesh = ops.mesh
    D = projection_space(mesh)
    ones = np.ones(len(mesh))
    Wbar = weak_steklov_rows(ops, stek, D, ones)
    MD = mass_matrix(mesh, D, D)
    A = np.linalg.solve(MD, Wbar)
    Mg = mass_matrix(mesh, D, D, weight=gamma.values)
    return A.T @ Mg @ A
