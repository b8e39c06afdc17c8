"""Piecewise polynomial spaces on a boundary mesh.

Every space is scalar with a per-element local basis and a scalar DOF map; vector
fields use two components per scalar DOF, ordered (2*dof, 2*dof + 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CONTACT, DIRICHLET
from .quadrature import bernstein_basis, gll_points01, lagrange_basis, legendre01

BERNSTEIN = "bernstein"
GLL = "gll"


@dataclass(frozen=True)
class ScalarSpace:
    name: str
    elems: tuple        # element ids carrying local functions
    family: str         # "lagrange", "legendre", "bernstein"
    degrees: tuple      # local polynomial degree per entry of elems
    dofmaps: tuple      # per entry of elems: array of scalar DOFs (-1 = fixed to zero)
    n: int

    def local(self, k):
        """Position of element id k in elems, or -1."""
        return self._index().get(k, -1)

    def _index(self):
        idx = getattr(self, "_idx", None)
        if idx is None:
            idx = {e: i for i, e in enumerate(self.elems)}
            object.__setattr__(self, "_idx", idx)
        return idx

    def basis(self, pos, t, deriv=False):
        """Local basis (or d/dt) of entry pos at reference points t, shape (nloc, len(t))."""
        deg = self.degrees[pos]
        if self.family == "lagrange":
            return lagrange_basis(gll_points01(deg), t, deriv) if deg >= 1 else np.ones((1, np.size(t)))
        if self.family == "legendre":
            return legendre01(deg + 1, t, deriv)
        if self.family == "bernstein":
            return bernstein_basis(deg, t, deriv)
        raise ValueError(self.family)

    @property
    def ndof(self):
        return 2 * self.n


def primal_space(mesh):
    """Continuous degree-p functions on the non-Dirichlet part, zero at its Dirichlet ends."""
    els = mesh.elements
    m = len(els)
    dirich = [e.part == DIRICHLET for e in els]
    # vertex k is the start of element k and the end of element k-1
    vertex_dof = -np.ones(m, dtype=int)
    count = 0
    for k in range(m):
        if not dirich[k] and not dirich[k - 1]:
            vertex_dof[k] = count
            count += 1
    elems, degrees, maps = [], [], []
    for k, e in enumerate(els):
        if dirich[k]:
            continue
        interior = np.arange(count, count + e.p - 1)
        count += e.p - 1
        maps.append(np.concatenate([[vertex_dof[k]], interior, [vertex_dof[(k + 1) % m]]]).astype(int))
        elems.append(k)
        degrees.append(e.p)
    return ScalarSpace("primal", tuple(elems), "lagrange", tuple(degrees), tuple(maps), count)


def discontinuous_space(mesh, name="density", shift=-1, elems=None):
    """Discontinuous Legendre space of degree p_E + shift on the given elements."""
    ids = range(len(mesh.elements)) if elems is None else elems
    out_e, degs, maps = [], [], []
    count = 0
    for k in ids:
        d = mesh.elements[k].p + shift
        if d < 0:
            continue
        out_e.append(k)
        degs.append(d)
        maps.append(np.arange(count, count + d + 1))
        count += d + 1
    return ScalarSpace(name, tuple(out_e), "legendre", tuple(degs), tuple(maps), count)


def multiplier_space(mesh, basis=BERNSTEIN):
    """Discontinuous degree-q multipliers on the contact elements (q = p)."""
    ids = mesh.ids(CONTACT)
    degs, maps = [], []
    count = 0
    for k in ids:
        q = mesh.elements[k].p
        degs.append(q)
        maps.append(np.arange(count, count + q + 1))
        count += q + 1
    family = {BERNSTEIN: "bernstein", GLL: "lagrange"}[basis]
    return ScalarSpace("multiplier", tuple(ids), family, tuple(degs), tuple(maps), count)


def control_points(space, mesh):
    """Reference positions of the multiplier constraints per element (i/q or GLL points)."""
    out = []
    for pos, k in enumerate(space.elems):
        q = space.degrees[pos]
        out.append(np.arange(q + 1) / q if space.family == "bernstein" else gll_points01(q))
    return out


@dataclass(frozen=True)
class DiscreteSpaces:
    primal: ScalarSpace
    density: ScalarSpace
    multiplier: ScalarSpace
    basis_kind: str


def build_spaces(mesh, basis=BERNSTEIN):
    return DiscreteSpaces(primal_space(mesh), discontinuous_space(mesh), multiplier_space(mesh, basis), basis)


def evaluate(space, mesh, coeffs, k, t, deriv=False):
    """Vector field with DOF vector coeffs on element k at reference points t, shape (len(t), 2)."""
    pos = space.local(k)
    t = np.atleast_1d(t)
    if pos < 0:
        return np.zeros((t.size, 2))
    dm = space.dofmaps[pos]
    vals = space.basis(pos, t, deriv)
    c = np.zeros((dm.size, 2))
    ok = dm >= 0
    c[ok] = np.asarray(coeffs).reshape(-1, 2)[dm[ok]]
    out = vals.T @ c
    if deriv:
        out /= mesh.elements[k].h
    return out


def frame_matrix(space, mesh):
    _, _, tau, nrm, _ = mesh.arrays()
    R = np.zeros((space.ndof, space.ndof))
    for pos, k in enumerate(space.elems):
        for d in space.dofmaps[pos]:
            R[2 * d:2 * d + 2, 2 * d] = nrm[k]
            R[2 * d:2 * d + 2, 2 * d + 1] = tau[k]
    return R
