"""Independent reference computations for the operator tests.

Inner integrals over a straight source panel are done with closed-form moments
of the kernel pieces against 1 and the local coordinate u; outer integrals use
scipy's adaptive QUADPACK routine.  Nothing here calls into hpbem_contact.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import quad


def lame_constants(E, nu):
    mu = E / (2 * (1 + nu))
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    return lam, mu


def kelvin(E, nu, d):
    lam, mu = lame_constants(E, nu)
    c1 = (lam + 3 * mu) / (4 * np.pi * mu * (lam + 2 * mu))
    c2 = (lam + mu) / (lam + 3 * mu)
    r2 = d @ d
    return c1 * (-0.5 * np.log(r2) * np.eye(2) + c2 * np.outer(d, d) / r2)


class Moments:
    """Antiderivative-based moments int_{u0}^{u1} u^k f(u) du, k = 0, 1, for rho^2 = u^2 + b^2."""

    def __init__(self, u0, u1, b):
        self.u0, self.u1, self.b = u0, u1, b

    def _ev(self, F):
        return F(self.u1) - F(self.u0)

    def _at(self, u):
        return 0.0 if self.b == 0 else np.arctan(u / self.b)

    def _lr(self, u):
        # log(rho^2), with the convention 0 at rho = 0 (only reached with a vanishing prefactor)
        r2 = u * u + self.b * self.b
        return np.log(r2) if r2 > 0 else 0.0

    def log(self, k):  # log(rho^2)
        b = self.b
        if k == 0:
            return self._ev(lambda u: (u * self._lr(u) if u != 0 or b != 0 else 0.0) - 2 * u + 2 * b * self._at(u))
        return self._ev(lambda u: 0.5 * (u * u + b * b) * self._lr(u) - 0.5 * u * u)

    def frac(self, m, n, k):
        """int u^(m+k) b^n / rho^(2j) for the few combinations the kernels need."""
        b, key = self.b, (m + k, n)
        at, lr = self._at, self._lr
        two = {  # 1 / rho^2
            (0, 1): lambda u: at(u),
            (1, 0): lambda u: 0.5 * lr(u),
            (0, 2): lambda u: b * at(u),
            (1, 1): lambda u: 0.5 * b * lr(u),
            (2, 0): lambda u: u - b * at(u),
            (2, 1): lambda u: b * (u - b * at(u)),
            (1, 2): lambda u: 0.5 * b * b * lr(u),
            (3, 0): lambda u: 0.5 * u * u - 0.5 * b * b * lr(u),
        }
        return self._ev(two[key])

    def frac4(self, m, n, k):
        """int u^(m+k) b^n / rho^4."""
        b, key = self.b, (m + k, n)
        at, lr = self._at, self._lr

        def q(u):
            r2 = u * u + b * b
            return 0.0 if b == 0 else u / r2

        def w(u):
            r2 = u * u + b * b
            return 0.0 if b == 0 else 1.0 / r2

        four = {
            (0, 3): lambda u: 0.5 * b * q(u) + 0.5 * at(u),
            (1, 2): lambda u: -0.5 * b * b * w(u),
            (2, 1): lambda u: 0.5 * at(u) - 0.5 * b * q(u),
            (1, 3): lambda u: -0.5 * b ** 3 * w(u),
            (2, 2): lambda u: b * (0.5 * at(u) - 0.5 * b * q(u)),
            (3, 1): lambda u: b * (0.5 * lr(u) + 0.5 * b * b * w(u)),
        }
        return self._ev(four[key])


def _local(x, a, tau, nrm):
    rel = x - a
    b = rel @ nrm
    return rel @ tau, (0.0 if abs(b) < 1e-14 else b)


def inner_single_layer(c_log, c_rank, x, a, tau, nrm, h, coef):
    """int over panel of (-c_log/2 log rho^2 I + c_rank d d^T / rho^2) * (coef[0] + coef[1] s) ds."""
    al, b = _local(x, a, tau, nrm)
    m = Moments(-al, h - al, b)
    # density in u: coef0 + coef1 (u + al)
    d0, d1 = coef[0] + coef[1] * al, coef[1]
    mom = lambda f: d0 * f(0) + d1 * f(1)
    TT, NN = np.outer(tau, tau), np.outer(nrm, nrm)
    TN = np.outer(tau, nrm) + np.outer(nrm, tau)
    out = -0.5 * c_log * mom(m.log) * np.eye(2)
    out += c_rank * (mom(lambda k: m.frac(2, 0, k)) * TT - mom(lambda k: m.frac(1, 1, k)) * TN
                     + mom(lambda k: m.frac(0, 2, k)) * NN)
    return out


def inner_double_layer(kap, om, x, a, tau, nrm, h, coef):
    """int over panel of the double layer kernel times the density (principal value on the panel)."""
    al, b = _local(x, a, tau, nrm)
    m = Moments(-al, h - al, b)
    d0, d1 = coef[0] + coef[1] * al, coef[1]
    mom = lambda f: d0 * f(0) + d1 * f(1)
    TT, NN = np.outer(tau, tau), np.outer(nrm, nrm)
    TN = np.outer(tau, nrm) + np.outer(nrm, tau)
    out = kap * mom(lambda k: m.frac(0, 1, k)) * np.eye(2)
    out += om * (mom(lambda k: m.frac4(2, 1, k)) * TT - mom(lambda k: m.frac4(1, 2, k)) * TN
                 + mom(lambda k: m.frac4(0, 3, k)) * NN)
    out += kap * mom(lambda k: m.frac(1, 0, k)) * (np.outer(tau, nrm) - np.outer(nrm, tau))
    return out


def square_panels(n_side=1):
    """Counterclockwise panels of the unit square centred at the origin."""
    c = [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
    pts = []
    for k in range(4):
        A, B = np.array(c[k]), np.array(c[(k + 1) % 4])
        for i in range(n_side):
            pts.append((A + (B - A) * i / n_side, A + (B - A) * (i + 1) / n_side))
    out = []
    for A, B in pts:
        h = np.linalg.norm(B - A)
        tau = (B - A) / h
        out.append((A, tau, np.array([tau[1], -tau[0]]), h))
    return out


def _outer(func, k, panels, test_fn):
    A, tau, nrm, h = panels[k]
    out = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            g = lambda t: test_fn(t) * func(A + t * h * tau)[i, j]
            out[i, j] = quad(g, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=400)[0] * h
    return out


def oracle_matrices(E, nu, n_side=1):
    """V (constants x constants), K (constants x hats) and W (hats x hats, via the
    integration-by-parts form) on the p = 1 square mesh; block layout (2*dof + comp)."""
    lam, mu = lame_constants(E, nu)
    c1 = (lam + 3 * mu) / (4 * np.pi * mu * (lam + 2 * mu))
    c2 = (lam + mu) / (lam + 3 * mu)
    kap = (1 - 2 * nu) / (4 * np.pi * (1 - nu))
    om = 1 / (2 * np.pi * (1 - nu))
    alpha = mu / (2 * np.pi * (1 - nu))
    P = square_panels(n_side)
    m = len(P)
    V = np.zeros((2 * m, 2 * m))
    K = np.zeros((2 * m, 2 * m))
    W = np.zeros((2 * m, 2 * m))
    one = lambda t: 1.0
    for k in range(m):
        for j in range(m):
            A, tau, nrm, h = P[j]
            blk = _outer(lambda x: inner_single_layer(c1, c1 * c2, x, A, tau, nrm, h, (1.0, 0.0)), k, P, one)
            V[2 * k:2 * k + 2, 2 * j:2 * j + 2] = blk
            # hats: element j carries the falling part of vertex j and rising part of vertex j+1
            for node, coef in ((j, (1.0, -1.0 / h)), ((j + 1) % m, (0.0, 1.0 / h))):
                blk = _outer(lambda x: inner_double_layer(kap, om, x, A, tau, nrm, h, coef), k, P, one)
                K[2 * k:2 * k + 2, 2 * node:2 * node + 2] += blk
            hk = P[k][3]
            inner = _outer(lambda x: inner_single_layer(alpha, alpha, x, A, tau, nrm, h, (1.0, 0.0)), k, P, one)
            for ni, si in ((k, -1.0 / hk), ((k + 1) % m, 1.0 / hk)):
                for nj, sj in ((j, -1.0 / h), ((j + 1) % m, 1.0 / h)):
                    W[2 * ni:2 * ni + 2, 2 * nj:2 * nj + 2] += si * sj * inner
    return V, K, W
