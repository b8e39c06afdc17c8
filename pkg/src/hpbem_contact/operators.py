"""Galerkin assembly of the boundary integral operators and point evaluation of potentials.

Inner integrals near the target use singularity subtraction: the density value at the
foot point times the closed-form panel integral, plus a graded Gauss rule for the
bounded remainder.  Far targets use plain Gauss rules.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .kernels import PanelKernel
from .quadrature import composite_graded_rule, gauss01, graded_both_ends

NEAR_RATIO = 1.0
MID_RATIO, MID_N = 0.25, 24
FAR_EXTRA = 10
INNER_LEVELS, INNER_N = 10, 12
OUTER_LEVELS, OUTER_N = 8, 12
SNAP = 1e-13


def _graded01(levels, n):
    r = composite_graded_rule("left", levels, n, 0.15)
    return r.nodes, r.weights


def segment_distances(mesh):
    """Distance between every pair of elements (zero for neighbours), cached on the mesh."""
    if "segdist" in mesh._cache:
        return mesh._cache["segdist"]
    a, b, tau, nrm, h = mesh.arrays()

    def point_seg(P, A, B):
        AB = B - A
        t = np.clip(np.einsum("...k,...k", P - A, AB) / np.einsum("...k,...k", AB, AB), 0.0, 1.0)
        return np.hypot(*np.moveaxis(P - A - t[..., None] * AB, -1, 0))

    Ai, Bi = a[:, None, :], b[:, None, :]
    Aj, Bj = a[None, :, :], b[None, :, :]
    d = np.minimum.reduce([point_seg(Ai, Aj, Bj), point_seg(Bi, Aj, Bj),
                           point_seg(Aj, Ai, Bi), point_seg(Bj, Ai, Bi)])
    mesh._cache["segdist"] = d
    return d


def panel_apply(kern, mesh, j, space, pos, X, NX=None, deriv=False):
    """Integrals over element j of kernel(x, y) times each local basis function.

    Returns shape (len(X), nloc, 2, 2); entry [q, b] maps a constant vector c to the
    field at X[q] generated by phi_b * c.
    """
    a, _, tau_all, nrm_all, h_all = mesh.arrays()
    tau, nrm, h = tau_all[j], nrm_all[j], h_all[j]
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rel = X - a[j]
    al = rel @ tau
    be = rel @ nrm
    be = np.where(np.abs(be) <= SNAP * h, 0.0, be)
    dist = np.hypot(np.maximum.reduce([-al, al - h, np.zeros_like(al)]), be)
    near = dist < MID_RATIO * h
    mid = (dist < NEAR_RATIO * h) & ~near
    deg = space.degrees[pos]
    nloc = space.basis(pos, np.array([0.5])).shape[0]
    scale = 1.0 / h if deriv else 1.0
    out = np.empty((X.shape[0], nloc, 2, 2))
    NXa = None if NX is None else np.atleast_2d(np.asarray(NX, dtype=float))

    far = ~near & ~mid
    for sel, ng in ((far, deg + FAR_EXTRA), (mid, deg + MID_N)):
        if not sel.any():
            continue
        tg, wg = gauss01(ng)
        vals = space.basis(pos, tg, deriv) * scale
        u = tg[None, :] * h - al[sel, None]
        nx = None if NXa is None else NXa[sel][:, None, :]
        Kv = kern.values(u, be[sel, None], tau, nrm, nx)
        F = Kv.shape[0]
        out[sel] = ((vals * (wg * h)) @ Kv.reshape(F, -1, 4)).reshape(F, nloc, 2, 2)
    if near.any():
        aln, ben = al[near], be[near]
        c = np.clip(aln, 0.0, h)
        xr, wr = _graded01(INNER_LEVELS, INNER_N)
        right = h - c
        s = np.concatenate([c[:, None] + right[:, None] * xr, c[:, None] - c[:, None] * xr], axis=1)
        w = np.concatenate([right[:, None] * wr, c[:, None] * wr], axis=1)
        s = np.where(w > 0.0, s, 0.5 * h)
        u = s - aln[:, None]
        u = np.where((u == 0.0) & (ben[:, None] == 0.0), 0.5 * h, u)
        nx = None if NXa is None else NXa[near][:, None, :]
        Kv = kern.values(u, ben[:, None], tau, nrm, nx)
        vals = space.basis(pos, (s / h).ravel(), deriv).reshape(nloc, *s.shape) * scale
        vfoot = space.basis(pos, aln / h, deriv) * scale
        K0 = kern.constant_density_integral(-aln, h - aln, ben, tau, nrm,
                                            None if NXa is None else NXa[near])
        F = Kv.shape[0]
        wv = ((vals - vfoot[:, :, None]) * w).transpose(1, 0, 2)  # (F, nloc, g)
        out[near] = ((wv @ Kv.reshape(F, -1, 4)).reshape(F, nloc, 2, 2)
                     + vfoot.T[:, :, None, None] * K0[:, None])
    return out


def _outer_points(mesh, k, rule):
    a, b, tau, nrm, h = mesh.arrays()
    t, w = rule
    return a[k] + np.outer(t, b[k] - a[k]), w * h[k], t


def galerkin(kern, mesh, test, trial, test_deriv=False, trial_deriv=False, test_elems=None):
    """Dense Galerkin matrix <kernel * trial, test> over vector-valued spaces."""
    a, b, tau, nrm, h = mesh.arrays()
    dist = segment_distances(mesh)
    tel = list(test.elems if test_elems is None else [k for k in test.elems if k in set(test_elems)])
    pos_t = {k: test.local(k) for k in tel}
    maxdeg = max(test.degrees) if test.degrees else 0
    far_rule = gauss01(maxdeg + FAR_EXTRA)
    near_rule = graded_both_ends(OUTER_LEVELS, OUTER_N)
    A = np.zeros((test.ndof + 2, trial.ndof + 2))
    need_nx = kern.kind == "Kadj"
    for pj, j in enumerate(trial.elems):
        dmj = trial.dofmaps[pj]
        colidx = np.stack([2 * dmj, 2 * dmj + 1], axis=1)  # (nloc_j, 2)
        isnear = [k for k in tel if dist[k, j] < NEAR_RATIO * max(h[k], h[j])]
        nearset = set(isnear)
        groups = {}
        for k in tel:
            if k not in nearset:
                groups.setdefault(test.degrees[pos_t[k]], []).append(k)
        blocks = []
        for deg, ks in groups.items():
            ks = np.array(ks)
            t, w = far_rule
            X = a[ks][:, None, :] + t[None, :, None] * (b[ks] - a[ks])[:, None, :]
            blocks.append((ks, t, w[None, :] * h[ks][:, None], X))
        for k in isnear:
            t, w = near_rule
            X = a[k] + np.outer(t, b[k] - a[k])
            blocks.append((np.array([k]), t, (w * h[k])[None, :], X[None]))
        for ks, t, W, X in blocks:
            nq = t.size
            flat = X.reshape(-1, 2)
            NX = np.repeat(nrm[ks], nq, axis=0) if need_nx else None
            R = panel_apply(kern, mesh, j, trial, pj, flat, NX, trial_deriv)
            R = R.reshape(len(ks), nq, *R.shape[1:])
            phi = test.basis(pos_t[int(ks[0])], t, test_deriv)
            Wk = W / h[ks][:, None] if test_deriv else W
            blk = np.einsum("fq,aq,fqbij->faibj", Wk, phi, R)
            dmi = np.array([test.dofmaps[pos_t[int(k)]] for k in ks])
            rows = np.stack([2 * dmi, 2 * dmi + 1], axis=2)  # (f, nloc_i, 2)
            np.add.at(A, (rows[:, :, :, None, None], colidx[None, None, None, :, :]), blk)
    return A[:-2, :-2]


def potential_matrix(kern, mesh, trial, X, NX=None, deriv=False):
    """Field values at points X for every trial DOF: shape (len(X), 2, trial.ndof)."""
    X = np.atleast_2d(X)
    out = np.zeros((X.shape[0], 2, trial.ndof + 2))
    for pj, j in enumerate(trial.elems):
        R = panel_apply(kern, mesh, j, trial, pj, X, NX, deriv)
        for bb, d in enumerate(trial.dofmaps[pj]):
            out[:, :, 2 * d:2 * d + 2] += R[:, bb] if d >= 0 else 0.0
    return out[:, :, :-2]


def mass_matrix(mesh, rows, cols, restriction=None, weight=None, row_deriv=False):
    """<col function, row function> on common elements; weight is a per-element factor."""
    M = np.zeros((rows.ndof + 2, cols.ndof + 2))
    _, _, _, _, h = mesh.arrays()
    for pr, k in enumerate(rows.elems):
        pc = cols.local(k)
        if pc < 0:
            continue
        if restriction is not None and mesh.elements[k].part != restriction:
            continue
        t, w = gauss01((rows.degrees[pr] + cols.degrees[pc]) // 2 + 2)
        fr = rows.basis(pr, t, row_deriv) / (h[k] if row_deriv else 1.0)
        fc = cols.basis(pc, t)
        loc = (fr * w) @ fc.T * h[k] * (1.0 if weight is None else weight[k])
        dr, dc = rows.dofmaps[pr], cols.dofmaps[pc]
        for c in range(2):
            np.add.at(M, (2 * dr[:, None] + c, 2 * dc[None, :] + c), loc)
    return M[:-2, :-2]


@dataclass(frozen=True)
class OperatorSet:
    mesh: object
    spaces: object
    material: object
    V: np.ndarray
    K: np.ndarray
    W: np.ndarray
    M: np.ndarray  # density x primal mass


def assemble_V(mesh, spaces, material):
    return galerkin(PanelKernel("V", material), mesh, spaces.density, spaces.density)


def assemble_K(mesh, spaces, material):
    return galerkin(PanelKernel("K", material), mesh, spaces.density, spaces.primal)


def assemble_W(mesh, spaces, material):
    return galerkin(PanelKernel("Vstar", material), mesh, spaces.primal, spaces.primal, True, True)


def assemble_mass(mesh, row_space, col_space, restriction=None):
    return mass_matrix(mesh, row_space, col_space, restriction)


def assemble_operators(mesh, spaces, material):
    return OperatorSet(mesh, spaces, material, assemble_V(mesh, spaces, material),
                       assemble_K(mesh, spaces, material), assemble_W(mesh, spaces, material),
                       assemble_mass(mesh, spaces.density, spaces.primal))


def dump_matrices(path, matrices):
    """Write named matrices as a JSON header followed by row-major little-endian doubles."""
    header, offset = [], 0
    for name, m in matrices.items():
        m = np.ascontiguousarray(m, dtype="<f8")
        header.append({"name": name, "shape": list(m.shape), "offset": offset})
        offset += m.nbytes
    head = json.dumps(header).encode()
    with open(path, "wb") as f:
        f.write(struct.pack("<Q", len(head)))
        f.write(head)
        for m in matrices.values():
            f.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def load_matrices(path):
    with open(path, "rb") as f:
        (n,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(n))
        data = f.read()
    out = {}
    for item in header:
        count = int(np.prod(item["shape"]))
        out[item["name"]] = np.frombuffer(data, "<f8", count, item["offset"]).reshape(item["shape"])
    return out
