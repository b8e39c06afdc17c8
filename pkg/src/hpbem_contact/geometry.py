"""Polygonal boundaries, hp boundary meshes and refinement."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
CONTACT = "contact"
PARTS = (DIRICHLET, NEUMANN, CONTACT)

SPLIT_H = "split_h"
RAISE_P = "raise_p"


@dataclass(frozen=True)
class PolygonalBoundary:
    """Closed counterclockwise polygon; segment k runs from vertex k to vertex k+1."""

    vertices: tuple
    part_tags: tuple

    @property
    def segments(self):
        n = len(self.vertices)
        return tuple((k, (k + 1) % n) for k in range(n))

    def part_length(self, part):
        total = 0.0
        for (i, j), tag in zip(self.segments, self.part_tags):
            if tag == part:
                total += float(np.hypot(*np.subtract(self.vertices[j], self.vertices[i])))
        return total

    def length(self):
        return sum(self.part_length(p) for p in PARTS)


@dataclass(frozen=True)
class Element:
    a: tuple
    b: tuple
    part: str
    p: int
    level: int = 0
    uid: int = 0
    parent: int = -1

    @property
    def h(self):
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))

    @property
    def q(self):
        # multiplier degree equals the primal degree on the contact part
        return self.p if self.part == CONTACT else 0


@dataclass(frozen=True)
class RefinementMark:
    element: int
    action: str


@dataclass(frozen=True)
class Mesh:
    """Closed loop of straight elements in counterclockwise order."""

    elements: tuple
    next_uid: int = 0
    generation: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __len__(self):
        return len(self.elements)

    def ids(self, part=None):
        return [k for k, e in enumerate(self.elements) if part is None or e.part == part]

    def arrays(self):
        """Endpoints, tangents, normals and lengths as arrays (cached)."""
        if "arrays" not in self._cache:
            a = np.array([e.a for e in self.elements], dtype=float)
            b = np.array([e.b for e in self.elements], dtype=float)
            h = np.hypot(*(b - a).T)
            tau = (b - a) / h[:, None]
            nrm = np.column_stack([tau[:, 1], -tau[:, 0]])
            self._cache["arrays"] = (a, b, tau, nrm, h)
        return self._cache["arrays"]

    @property
    def degrees(self):
        return np.array([e.p for e in self.elements], dtype=int)

    def part_length(self, part):
        return float(sum(e.h for e in self.elements if e.part == part))

    def to_json(self):
        rows = [{"a": list(e.a), "b": list(e.b), "part": e.part, "p": e.p, "level": e.level}
                for e in self.elements]
        return json.dumps(rows)


def build_square_boundary(side=1.0, preset="tresca_mixed"):
    """Square [-side/2, side/2]^2 with the contact part on the bottom edge."""
    if side <= 0:
        raise ValueError("side must be positive")
    s = 0.5 * side
    if preset == "tresca_mixed":
        vertices = ((-s, -s), (s, -s), (s, s), (0.5 * s, s), (-0.5 * s, s), (-s, s))
        tags = (CONTACT, NEUMANN, DIRICHLET, NEUMANN, NEUMANN, NEUMANN)
    elif preset == "coulomb_neumann":
        vertices = ((-s, -s), (s, -s), (s, s), (-s, s))
        tags = (CONTACT, NEUMANN, NEUMANN, NEUMANN)
    else:
        raise ValueError(f"unknown boundary preset {preset!r}")
    return PolygonalBoundary(vertices=vertices, part_tags=tags)


def initial_mesh(boundary, n_per_unit, p0=1):
    if n_per_unit < 1 or p0 < 1:
        raise ValueError("n_per_unit and p0 must be at least 1")
    elements = []
    for (i, j), tag in zip(boundary.segments, boundary.part_tags):
        va = np.asarray(boundary.vertices[i], dtype=float)
        vb = np.asarray(boundary.vertices[j], dtype=float)
        m = max(1, int(round(np.hypot(*(vb - va)) * n_per_unit)))
        for k in range(m):
            a = va + (vb - va) * k / m
            b = va + (vb - va) * (k + 1) / m
            elements.append(Element(tuple(a), tuple(b), tag, int(p0), 0, len(elements)))
    return Mesh(tuple(elements), next_uid=len(elements))


def apply_marks(mesh, marks):
    if not marks:
        return mesh
    actions = {}
    for mk in marks:
        if not 0 <= mk.element < len(mesh.elements):
            raise IndexError(f"element id {mk.element} not in mesh")
        if mk.action not in (SPLIT_H, RAISE_P):
            raise ValueError(f"unknown refinement action {mk.action!r}")
        actions.setdefault(mk.element, set()).add(mk.action)
    uid = mesh.next_uid
    out = []
    for k, e in enumerate(mesh.elements):
        acts = actions.get(k, ())
        p = e.p + 1 if RAISE_P in acts else e.p
        if SPLIT_H in acts:
            mid = (0.5 * (e.a[0] + e.b[0]), 0.5 * (e.a[1] + e.b[1]))
            out.append(Element(e.a, mid, e.part, p, e.level + 1, uid, e.uid))
            out.append(Element(mid, e.b, e.part, p, e.level + 1, uid + 1, e.uid))
            uid += 2
        elif RAISE_P in acts:
            out.append(replace(e, p=p, uid=uid, parent=e.uid))
            uid += 1
        else:
            out.append(e)
    return Mesh(tuple(out), next_uid=uid, generation=mesh.generation + 1)


def element_frame(e):
    """Midpoint, unit tangent, outward unit normal and length of an element."""
    a = np.asarray(e.a, dtype=float)
    b = np.asarray(e.b, dtype=float)
    h = float(np.hypot(*(b - a)))
    tau = (b - a) / h
    return 0.5 * (a + b), tau, np.array([tau[1], -tau[0]]), h


def check_conforming(mesh, tol=1e-12):
    """Elements must form a closed loop of nonzero length."""
    els = mesh.elements
    for k, e in enumerate(els):
        nxt = els[(k + 1) % len(els)]
        if np.hypot(e.b[0] - nxt.a[0], e.b[1] - nxt.a[1]) > tol:
            raise ValueError(f"mesh not closed between elements {k} and {k + 1}")
        if e.h <= 0:
            raise ValueError(f"degenerate element {k}")
    return True
