"""Reference-interval bases (Bernstein, GLL Lagrange, Legendre) and quadrature rules.

Bases live on [0, 1]; Gauss tables are generated on [-1, 1] and mapped explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import legendre as npleg


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    interval: tuple = (-1.0, 1.0)

    def mapped(self, lo, hi):
        """The same rule transported to [lo, hi]."""
        a, b = self.interval
        scale = (hi - lo) / (b - a)
        return QuadratureRule(lo + (self.nodes - a) * scale, self.weights * scale,
                              self.degree, (lo, hi))

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def bernstein_eval(i, q, t):
    if not 0 <= i <= q:
        raise IndexError(f"Bernstein index {i} out of range for degree {q}")
    t = np.asarray(t, dtype=float)
    return comb(q, i) * t**i * (1.0 - t) ** (q - i)


def bernstein_basis(q, t, deriv=False):
    """All degree-q Bernstein polynomials (or their t-derivatives) at t, shape (q+1, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if not deriv:
        return np.array([bernstein_eval(i, q, t) for i in range(q + 1)])
    if q == 0:
        return np.zeros((1, t.size))
    low = bernstein_basis(q - 1, t)
    out = np.zeros((q + 1, t.size))
    out[1:] += q * low
    out[:-1] -= q * low
    return out


@lru_cache(maxsize=None)
def _gauss(n):
    x, w = npleg.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule(n):
    if n < 1:
        raise ValueError("n must be at least 1")
    x, w = _gauss(n)
    return QuadratureRule(x, w, 2 * n - 1)


@lru_cache(maxsize=None)
def _gll(q):
    inner = npleg.Legendre.basis(q).deriv().roots() if q > 1 else np.array([])
    x = np.concatenate([[-1.0], np.sort(np.real(inner)), [1.0]])
    w = 2.0 / (q * (q + 1) * npleg.legval(x, [0] * q + [1]) ** 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gll_nodes_weights(q):
    if q < 1:
        raise ValueError("q must be at least 1")
    x, w = _gll(q)
    return QuadratureRule(x, w, 2 * q - 1)


def gll_points01(q):
    """GLL nodes mapped to [0, 1]."""
    return 0.5 * (np.asarray(_gll(q)[0]) + 1.0) if q >= 1 else np.array([0.5])


def composite_graded_rule(singularity_end="left", levels=10, n_per_cell=8, sigma=0.15):
    """Rule on [0, 1] geometrically graded toward 0 ("left") or 1 ("right")."""
    if not 0.0 < sigma < 1.0:
        raise ValueError("grading ratio must lie in (0, 1)")
    if levels < 1:
        raise ValueError("levels must be at least 1")
    base = gauss_rule(n_per_cell)
    edges = np.concatenate([[0.0], sigma ** np.arange(levels, -1, -1)])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        r = base.mapped(lo, hi)
        nodes.append(r.nodes)
        weights.append(r.weights)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    if singularity_end == "right":
        x = 1.0 - x[::-1]
        w = w[::-1]
    elif singularity_end != "left":
        raise ValueError("singularity_end must be 'left' or 'right'")
    return QuadratureRule(x, w, base.degree, (0.0, 1.0))


@lru_cache(maxsize=None)
def graded_both_ends(levels, n_per_cell, sigma=0.15):
    """Rule on [0, 1] graded toward both endpoints (two mirrored halves)."""
    half = composite_graded_rule("left", levels, n_per_cell, sigma)
    x = np.concatenate([0.5 * half.nodes, 1.0 - 0.5 * half.nodes[::-1]])
    w = np.concatenate([0.5 * half.weights, 0.5 * half.weights[::-1]])
    return x, w


def gauss01(n):
    x, w = _gauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _lagrange_coeffs(nodes):
    """Legendre coefficients (rows) of the Lagrange cardinal functions on nodes in [0, 1]."""
    x = np.asarray(nodes)
    V = legendre01(x.size, x)  # V[k, j] = P_k(2 x_j - 1)
    return np.linalg.inv(V)


def lagrange_basis(nodes, t, deriv=False):
    """Lagrange cardinal functions on the given nodes, shape (len(nodes), len(t))."""
    C = _lagrange_coeffs(tuple(float(v) for v in nodes))
    return C @ legendre01(C.shape[0], t, deriv)


def legendre01(n, t, deriv=False):
    """Legendre polynomials P_k(2t-1), k < n, or their t-derivatives; shape (n, len(t))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = 2.0 * t - 1.0
    P = np.empty((max(n, 1), t.size))
    P[0] = 1.0
    if n > 1:
        P[1] = x
    for k in range(1, n - 1):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
    if not deriv:
        return P[:n]
    D = np.zeros_like(P)
    # P'_{k+1} = P'_{k-1} + (2k+1) P_k
    for k in range(1, n):
        D[k] = (D[k - 2] if k >= 2 else 0.0) + (2 * k - 1) * P[k - 1]
    return 2.0 * D[:n]
