"""Lamé kernels (plane strain) in global and panel-local coordinates.

Panel-local coordinates: for a straight panel with start point a, unit tangent tau,
unit normal n and a target x, write x - a = alpha*tau + beta*n.  A source point at
arclength s has u = s - alpha, so y - x = u*tau - beta*n and |y - x|^2 = u^2 + beta^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class Material:
    youngs_modulus: float
    poisson_ratio: float

    def __post_init__(self):
        if self.youngs_modulus <= 0 or not 0.0 < self.poisson_ratio < 0.5:
            raise ValueError("need E > 0 and 0 < nu < 1/2")

    @property
    def mu(self):
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))

    @property
    def lam(self):
        nu = self.poisson_ratio
        return self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def single_layer_constants(self):
        lam, mu = self.lam, self.mu
        c1 = (lam + 3.0 * mu) / (4.0 * np.pi * mu * (lam + 2.0 * mu))
        return c1, (lam + mu) / (lam + 3.0 * mu)

    @property
    def double_layer_constants(self):
        nu = self.poisson_ratio
        return (1.0 - 2.0 * nu) / (4.0 * np.pi * (1.0 - nu)), 1.0 / (2.0 * np.pi * (1.0 - nu))

    @property
    def hypersingular_constant(self):
        # scale of the modified single layer kernel used for W by integration by parts
        return self.mu / (2.0 * np.pi * (1.0 - self.poisson_ratio))


def fundamental_solution(material, d):
    """Displacement kernel G(x, y) for d = x - y."""
    d = np.asarray(d, dtype=float)
    r2 = float(d @ d)
    if r2 == 0.0:
        raise ValueError("fundamental solution evaluated at zero distance")
    c1, c2 = material.single_layer_constants
    return c1 * (-0.5 * np.log(r2) * np.eye(2) + c2 * np.outer(d, d) / r2)


def traction_kernel(material, x, y, n_y):
    """Double layer kernel (T_y G(x, y))^T, so that (K v)(x) = int kernel(x, y) v(y) ds_y."""
    r = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    n = np.asarray(n_y, dtype=float)
    r2 = float(r @ r)
    if r2 == 0.0:
        raise ValueError("traction kernel evaluated at zero distance")
    kap, om = material.double_layer_constants
    rn = float(r @ n)
    return (-kap * rn * np.eye(2) - om * rn * np.outer(r, r) / r2
            + kap * (np.outer(r, n) - np.outer(n, r))) / r2


def adjoint_traction_kernel(material, x, y, n_x):
    """Adjoint double layer kernel T_x G(x, y)."""
    r = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    n = np.asarray(n_x, dtype=float)
    r2 = float(r @ r)
    kap, om = material.double_layer_constants
    rn = float(r @ n)
    return (-kap * rn * np.eye(2) - om * rn * np.outer(r, r) / r2
            + kap * (np.outer(n, r) - np.outer(r, n))) / r2


_KINDS = {"V": 0, "Vstar": 0, "K": 1, "Kadj": 2}


@njit(cache=True)
def _kernel_loop(kind, u, beta, tau, n, nx, c0, c1, out):
    for q in range(u.size):
        uq = u[q]
        bq = beta[q]
        rho2 = uq * uq + bq * bq
        if kind == 0:
            d0 = -uq * tau[0] + bq * n[0]
            d1 = -uq * tau[1] + bq * n[1]
            lg = -0.5 * c0 * np.log(rho2)
            f = c1 / rho2
            out[q, 0, 0] = lg + f * d0 * d0
            out[q, 0, 1] = f * d0 * d1
            out[q, 1, 0] = f * d1 * d0
            out[q, 1, 1] = lg + f * d1 * d1
            continue
        kap = c0
        om = c1
        if kind == 1:
            r0 = uq * tau[0] - bq * n[0]
            r1 = uq * tau[1] - bq * n[1]
            m0 = n[0]
            m1 = n[1]
            rn = -bq
            sgn = 1.0
        else:
            r0 = -uq * tau[0] + bq * n[0]
            r1 = -uq * tau[1] + bq * n[1]
            m0 = nx[q if nx.shape[0] > 1 else 0, 0]
            m1 = nx[q if nx.shape[0] > 1 else 0, 1]
            rn = r0 * m0 + r1 * m1
            sgn = -1.0
        g = -om * rn / rho2
        inv = 1.0 / rho2
        a01 = sgn * kap * (r0 * m1 - m0 * r1)
        out[q, 0, 0] = (g * r0 * r0 - kap * rn) * inv
        out[q, 0, 1] = (g * r0 * r1 + a01) * inv
        out[q, 1, 0] = (g * r1 * r0 - a01) * inv
        out[q, 1, 1] = (g * r1 * r1 - kap * rn) * inv


def _outer(a, b):
    return a[:, None] * b[None, :]


class PanelKernel:
    """Kernel evaluator in panel-local coordinates for one of four operator families.

    kind: "V" (single layer), "Vstar" (modified single layer for W), "K" (double
    layer), "Kadj" (adjoint double layer; needs the target normal).
    """

    def __init__(self, kind, material):
        if kind not in ("V", "Vstar", "K", "Kadj"):
            raise ValueError(f"unknown kernel kind {kind!r}")
        self.kind = kind
        if kind == "V":
            c1, c2 = material.single_layer_constants
            self.log_coef, self.rank_coef = c1, c1 * c2
        elif kind == "Vstar":
            a = material.hypersingular_constant
            self.log_coef, self.rank_coef = a, a
        else:
            self.kap, self.om = material.double_layer_constants

    def values(self, u, beta, tau, n, nx=None):
        """Kernel matrices at local coordinates; u, beta broadcastable, result (..., 2, 2)."""
        u = np.asarray(u, dtype=float)
        shape = np.broadcast_shapes(u.shape, np.shape(beta))
        uf = np.ascontiguousarray(np.broadcast_to(u, shape)).ravel()
        bf = np.ascontiguousarray(np.broadcast_to(np.asarray(beta, dtype=float), shape)).ravel()
        if self.kind == "Kadj":
            nxf = np.ascontiguousarray(np.broadcast_to(np.asarray(nx, dtype=float), shape + (2,))).reshape(-1, 2)
        else:
            nxf = np.zeros((1, 2))
        out = np.empty((uf.size, 2, 2))
        _kernel_loop(_KINDS[self.kind], uf, bf, np.asarray(tau, dtype=float), np.asarray(n, dtype=float),
                     nxf, *self._coefs(), out)
        return out.reshape(shape + (2, 2))

    def _coefs(self):
        if self.kind in ("V", "Vstar"):
            return self.log_coef, self.rank_coef
        return self.kap, self.om

    def constant_density_integral(self, u0, u1, beta, tau, n, nx=None):
        """Closed form of int_{u0}^{u1} kernel du for each target; shape (N, 2, 2).

        beta must already be snapped to exactly zero for targets on the panel line.
        """
        on_line = beta == 0.0
        b = np.where(on_line, 1.0, beta)

        def at(u):
            return np.where(on_line, 0.0, np.arctan(u / b))

        def lg(u):
            r2 = u * u + beta * beta
            return np.log(np.where(r2 > 0.0, r2, 1.0))

        def ulg(u):
            r2 = u * u + beta * beta
            return np.where(r2 > 0.0, u * np.log(np.where(r2 > 0.0, r2, 1.0)), 0.0)

        A0 = at(u1) - at(u0)                      # int beta / rho^2
        B0 = 0.5 * (lg(u1) - lg(u0))              # int u / rho^2 (principal value on line)
        N = np.shape(u0)[0]
        TT = _outer(tau, tau)
        TN = _outer(tau, n) + _outer(n, tau)
        NN = _outer(n, n)
        if self.kind in ("V", "Vstar"):
            Lg = (ulg(u1) - 2 * u1 + 2 * beta * at(u1)) - (ulg(u0) - 2 * u0 + 2 * beta * at(u0))
            C = beta * A0                          # int beta^2 / rho^2
            D = beta * B0                          # int u beta / rho^2
            U = u1 - u0
            out = self.rank_coef * ((U - C)[:, None, None] * TT - D[:, None, None] * TN
                                    + C[:, None, None] * NN)
            out[:, 0, 0] += -0.5 * self.log_coef * Lg
            out[:, 1, 1] += -0.5 * self.log_coef * Lg
            return out
        kap, om = self.kap, self.om

        def frac(u):
            r2 = u * u + beta * beta
            return np.where(on_line, 0.0, beta * u / np.where(r2 > 0, r2, 1.0))

        def frac2(u):
            r2 = u * u + beta * beta
            return np.where(on_line, 0.0, beta * beta / np.where(r2 > 0, r2, 1.0))

        P0 = 0.5 * (frac(u1) - frac(u0)) + 0.5 * A0        # int beta^3 / rho^4
        Q0 = -0.5 * (frac2(u1) - frac2(u0))                 # int u beta^2 / rho^4
        R0 = 0.5 * A0 - 0.5 * (frac(u1) - frac(u0))         # int u^2 beta / rho^4
        if self.kind == "K":
            out = om * (R0[:, None, None] * TT - Q0[:, None, None] * TN + P0[:, None, None] * NN)
            out[:, 0, 0] += kap * A0
            out[:, 1, 1] += kap * A0
            out += kap * B0[:, None, None] * (_outer(tau, n) - _outer(n, tau))
            return out
        nx = np.asarray(nx, dtype=float)
        if nx.ndim == 1:
            nx = np.broadcast_to(nx, (N, 2))
        tn = nx @ tau
        nn_ = nx @ n
        E3 = B0 + 0.5 * (frac2(u1) - frac2(u0))             # int u^3 / rho^4
        c_tt = tn * E3 - nn_ * R0
        c_tn = -(tn * R0 - nn_ * Q0)
        c_nn = tn * Q0 - nn_ * P0
        out = om * (c_tt[:, None, None] * TT + c_tn[:, None, None] * TN + c_nn[:, None, None] * NN)
        diag = kap * (tn * B0 - nn_ * A0)
        out[:, 0, 0] += diag
        out[:, 1, 1] += diag
        nxt = nx[:, :, None] * tau[None, None, :] - tau[None, :, None] * nx[:, None, :]
        nxn = nx[:, :, None] * n[None, None, :] - n[None, :, None] * nx[:, None, :]
        out += kap * (-B0[:, None, None] * nxt + A0[:, None, None] * nxn)
        return out
