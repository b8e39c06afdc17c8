"""Stabilized mixed contact problem: assembly, semi-smooth Newton, Coulomb fixed point
and a brute-force active-set oracle.

Multiplier coefficients are kept in the contact frame: entry 2i is the normal and
2i+1 the tangential component of coefficient i.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import CONTACT, DIRICHLET, NEUMANN, build_square_boundary
from .kernels import Material
from .operators import assemble_operators, mass_matrix
from .quadrature import gauss01, gll_points01
from .spaces import BERNSTEIN, control_points, frame_matrix, primal_space
from .steklov import (APPROXIMATE, FULL, OFF, build_coupling_Stilde, build_gamma, build_Shat_approx,
                      build_Shat_full, build_steklov)

TRESCA = "tresca"
COULOMB = "coulomb"
# pure Neumann bodies: rigid motions fixed by the active contact rows ("contact") or
# pinned by L2 functionals with auxiliary multipliers ("forced")
RIGID_CONTACT = "contact"
RIGID_FORCED = "forced"


# ---------------------------------------------------------------- problem data

def _tresca_traction(x, n):
    x1, x2 = x
    if n[0] < -0.5:  # left edge
        return np.array([-(0.5 - x2) * (-0.5 - x2), 0.0])
    if n[1] > 0.5 and x1 <= -0.25:  # top, left quarter
        return np.array([0.0, 20.0 * (-0.5 - x1) * (-0.25 - x1)])
    return np.zeros(2)


def _coulomb_traction(x, n):
    x1, x2 = x
    if abs(n[0]) > 0.5:  # sides
        bump = (0.5 + x2) * (0.5 - x2)
        return np.array([-10.0 * np.sign(x1) * bump * np.exp(-10.0 * (x2 + 0.4) ** 2), 0.875 * bump])
    if n[1] > 0.5:  # top
        return np.array([0.0, -12.5 * (0.5 - x1) ** 2 * (0.5 + x1) ** 2])
    return np.zeros(2)


def _tresca_gap(x):
    return 1.0 - np.sqrt(1.0 - x[0] ** 2 / 100.0)


def _tresca_bound(x):
    return 0.211 + 0.412 * x[0]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    boundary_preset: str
    material: Material
    friction: str                     # TRESCA or COULOMB
    traction: Callable                # (x, outward normal) -> vector on the Neumann part
    gap: Callable                     # x -> scalar on the contact part
    friction_bound: Callable = None   # Tresca: x -> F(x) > 0
    friction_coefficient: float = 0.0  # Coulomb
    gamma0: float = 1e-3
    basis: str = BERNSTEIN
    load_scale: float = 1.0
    tol: float = 1e-10
    max_iter: int = 50

    def __post_init__(self):
        if self.friction not in (TRESCA, COULOMB):
            raise ValueError(f"unknown friction law {self.friction!r}")
        if self.friction == TRESCA and self.friction_bound is None:
            raise ValueError("Tresca friction needs a bound function")
        if self.friction_coefficient < 0:
            raise ValueError("Coulomb coefficient must be nonnegative")

    def boundary(self):
        return build_square_boundary(1.0, self.boundary_preset)


def tresca_preset(**kw):
    base = dict(name="tresca_square", boundary_preset="tresca_mixed", material=Material(500.0, 0.3),
                friction=TRESCA, traction=_tresca_traction, gap=_tresca_gap, friction_bound=_tresca_bound)
    base.update(kw)
    return ProblemSpec(**base)


def coulomb_preset(**kw):
    base = dict(name="coulomb_square", boundary_preset="coulomb_neumann", material=Material(5.0, 0.45),
                friction=COULOMB, traction=_coulomb_traction, gap=lambda x: 0.0, friction_coefficient=0.3)
    base.update(kw)
    return ProblemSpec(**base)


PRESETS = {"tresca_square": tresca_preset, "coulomb_square": coulomb_preset}


# ---------------------------------------------------------------- assembly

@dataclass
class SaddleSystem:
    mesh: object
    spaces: object
    ops: object
    steklov: object
    gamma: object
    A: np.ndarray        # S - Shat
    C: np.ndarray        # B - Stilde (multiplier rows, contact frame)
    Mg: np.ndarray       # gamma mass of the multipliers (contact frame)
    f: np.ndarray        # Neumann load
    G: np.ndarray        # gap pairing, normal rows only
    R: np.ndarray        # rigid body functionals (primal x 3) or empty
    rigid: np.ndarray    # rigid body motions interpolated in the primal space (primal x 3) or empty
    Shat: np.ndarray
    Stilde: np.ndarray
    B: np.ndarray
    ctrl_x: np.ndarray   # physical control point of every multiplier coefficient
    stab_mode: str
    rigid_mode: str = RIGID_CONTACT
    row_mass: np.ndarray = None  # lumped multiplier mass per constraint row

    def __post_init__(self):
        if self.row_mass is None:
            lumped = np.abs(mass_matrix(self.mesh, self.spaces.multiplier, self.spaces.multiplier)).sum(axis=1)
            self.row_mass = lumped

    @property
    def n_u(self):
        return self.A.shape[0]

    @property
    def n_lam(self):
        return self.C.shape[0]

    def border(self, free):
        """Functionals pinning the rigid motions a pattern leaves undetermined."""
        if self.R.shape[1] == 0 or self.rigid_mode == RIGID_FORCED:
            return self.R
        M = self.C[free] @ self.rigid
        if M.size == 0:
            return self.R
        _, sv, vt = np.linalg.svd(M)
        rank = int((sv > 1e-10 * max(sv.max(), 1e-300)).sum())
        return self.R @ vt[rank:].T


def neumann_load(spec, mesh, primal, n_gauss=20):
    a, b, tau, nrm, h = mesh.arrays()
    f = np.zeros(primal.ndof)
    for pos, k in enumerate(primal.elems):
        if mesh.elements[k].part != NEUMANN:
            continue
        t, w = gauss01(max(n_gauss, primal.degrees[pos] + 8))
        X = a[k] + np.outer(t, b[k] - a[k])
        T = np.array([spec.traction(x, nrm[k]) for x in X]) * spec.load_scale
        phi = primal.basis(pos, t)
        loc = (phi * (w * h[k])) @ T  # (nloc, 2)
        for bb, d in enumerate(primal.dofmaps[pos]):
            if d >= 0:
                f[2 * d:2 * d + 2] += loc[bb]
    return f


def gap_vector(spec, mesh, mult, n_gauss=12):
    a, b, tau, nrm, h = mesh.arrays()
    G = np.zeros(mult.ndof)
    for pos, k in enumerate(mult.elems):
        t, w = gauss01(n_gauss + mult.degrees[pos])
        X = a[k] + np.outer(t, b[k] - a[k])
        g = np.array([spec.gap(x) for x in X])
        G[2 * np.asarray(mult.dofmaps[pos])] += mult.basis(pos, t) @ (w * h[k] * g)
    return G


def multiplier_control_x(mesh, mult):
    a, b, tau, nrm, h = mesh.arrays()
    pts = np.zeros((mult.n, 2))
    for pos, (k, tt) in enumerate(zip(mult.elems, control_points(mult, mesh))):
        pts[np.asarray(mult.dofmaps[pos])] = a[k] + np.outer(tt, b[k] - a[k])
    return pts


def rigid_body_constraints(mesh, primal=None):
    """L2(Gamma) pairings of the primal basis with the translations and the infinitesimal rotation."""
    primal = primal_space(mesh) if primal is None else primal
    a, b, tau, nrm, h = mesh.arrays()
    R = np.zeros((primal.ndof, 3))
    for pos, k in enumerate(primal.elems):
        t, w = gauss01(primal.degrees[pos] + 2)
        X = a[k] + np.outer(t, b[k] - a[k])
        phi = primal.basis(pos, t) * (w * h[k])
        for bb, d in enumerate(primal.dofmaps[pos]):
            if d < 0:
                continue
            R[2 * d, 0] += phi[bb].sum()
            R[2 * d + 1, 1] += phi[bb].sum()
            R[2 * d, 2] += -(phi[bb] @ X[:, 1])
            R[2 * d + 1, 2] += phi[bb] @ X[:, 0]
    return R


def rigid_body_motions(mesh, primal=None):
    """Nodal interpolants of (1, 0), (0, 1) and (-x2, x1); exact for every p >= 1."""
    primal = primal_space(mesh) if primal is None else primal
    a, b, tau, nrm, h = mesh.arrays()
    Z = np.zeros((primal.ndof, 3))
    for pos, (k, tt) in enumerate(zip(primal.elems, _primal_nodes(primal))):
        X = a[k] + np.outer(tt, b[k] - a[k])
        for d, x in zip(primal.dofmaps[pos], X):
            if d >= 0:
                Z[2 * d:2 * d + 2] = [[1.0, 0.0, -x[1]], [0.0, 1.0, x[0]]]
    return Z


def _primal_nodes(primal):
    return [gll_points01(q) for q in primal.degrees]


def assemble_system(spec, mesh, spaces, stab_mode=FULL, ops=None, rigid_mode=RIGID_CONTACT):
    if stab_mode not in (FULL, APPROXIMATE, OFF):
        raise ValueError(f"unknown stabilization mode {stab_mode!r}")
    if rigid_mode not in (RIGID_CONTACT, RIGID_FORCED):
        raise ValueError(f"unknown rigid body mode {rigid_mode!r}")
    ops = assemble_operators(mesh, spaces, spec.material) if ops is None else ops
    stek = build_steklov(ops)
    gamma0 = 0.0 if stab_mode == OFF else spec.gamma0
    gamma = build_gamma(mesh, gamma0)
    mult = spaces.multiplier
    Rf = frame_matrix(mult, mesh)
    B = Rf.T @ mass_matrix(mesh, mult, spaces.primal, restriction=CONTACT)
    n_u = spaces.primal.ndof
    if gamma0 == 0.0:
        Shat = np.zeros((n_u, n_u))
        Stilde = np.zeros((mult.ndof, n_u))
    else:
        Shat = (build_Shat_full if stab_mode == FULL else build_Shat_approx)(ops, stek, gamma)
        Stilde = Rf.T @ build_coupling_Stilde(ops, stek, gamma, mult)
    Mg = Rf.T @ mass_matrix(mesh, mult, mult, weight=gamma.values) @ Rf
    f = neumann_load(spec, mesh, spaces.primal)
    G = gap_vector(spec, mesh, mult)
    has_dirichlet = any(e.part == DIRICHLET for e in mesh.elements)
    R = np.zeros((n_u, 0)) if has_dirichlet else rigid_body_constraints(mesh, spaces.primal)
    Z = np.zeros((n_u, 0)) if has_dirichlet else rigid_body_motions(mesh, spaces.primal)
    if B.shape[0] != Stilde.shape[0] or Shat.shape != stek.S.shape:
        raise ValueError("inconsistent block dimensions")
    return SaddleSystem(mesh, spaces, ops, stek, gamma, stek.S - Shat, B - Stilde, Mg, f, G, R, Z,
                        Shat, Stilde, B, multiplier_control_x(mesh, mult), stab_mode, rigid_mode)


# ---------------------------------------------------------------- solution

@dataclass
class DiscreteSolution:
    u: np.ndarray
    lam: np.ndarray          # contact frame
    psi: np.ndarray
    kappa: np.ndarray        # reaction on the pinned rigid motions (empty with a Dirichlet part)
    bounds: np.ndarray       # tangential bound per multiplier coefficient at the end
    newton_iterations: int
    residual: float
    converged: bool
    partition: dict
    history: list = field(default_factory=list)
    border: np.ndarray = None  # functionals of the pinned rigid motions; kappa are their multipliers

    @property
    def lam_n(self):
        return self.lam[0::2]

    @property
    def lam_t(self):
        return self.lam[1::2]


def tresca_bounds(spec, system):
    return np.array([spec.friction_bound(x) for x in system.ctrl_x])


C_AUG_FACTOR = 1.0


def default_c_aug(spec, mesh=None):
    """Augmentation constant (stress per unit displacement); rows are scaled by the lumped multiplier mass."""
    return C_AUG_FACTOR * spec.material.youngs_modulus


def constraint_residual(system, u, lam):
    """r = (B - S~) u - M_gamma lam - G; lam solves the inequality iff lam = P(lam + c r)."""
    return system.C @ u - system.Mg @ lam - system.G


def _box(bounds):
    m = bounds.size
    lo = np.empty(2 * m)
    hi = np.empty(2 * m)
    lo[0::2], hi[0::2] = 0.0, np.inf
    lo[1::2], hi[1::2] = -bounds, bounds
    return lo, hi


def projection_reformulation(system, c_aug):
    """Residual map F(u, lam, kappa; bounds, border) and the projection arguments.

    kappa multiplies the columns of border (the pinned rigid motions)."""
    if c_aug <= 0:
        raise ValueError("c_aug must be positive")

    def F(u, lam, kappa, bounds, border=None):
        border = system.R if border is None else border
        eq = system.A @ u + system.C.T @ lam + border @ kappa - system.f
        r = constraint_residual(system, u, lam)
        v = lam + c_aug * r / system.row_mass
        lo, hi = _box(bounds)
        cons = lam - np.clip(v, lo, hi)
        rig = border.T @ u
        return np.concatenate([eq, cons, rig]), v

    return F


def _pattern(v, bounds):
    """Per multiplier component: True where the projection is inactive (strictly inside).

    Ties on the interval boundary count as clamped (slip / separation)."""
    lo, hi = _box(bounds)
    return (v > lo) & (v < hi)


def _pattern_solve(system, free, clamp, border=None):
    """Linear system of one active-set pattern: r_k = 0 on free components, lam_k = clamp_k elsewhere."""
    border = system.border(free) if border is None else border
    n_u, n_l, n_r = system.n_u, system.n_lam, border.shape[1]
    N = n_u + n_l + n_r
    J = np.zeros((N, N))
    rhs = np.zeros(N)
    J[:n_u, :n_u] = system.A
    J[:n_u, n_u:n_u + n_l] = system.C.T
    J[:n_u, n_u + n_l:] = border
    rhs[:n_u] = system.f
    rows = n_u + np.arange(n_l)
    J[rows[free], :n_u] = system.C[free]
    J[rows[free], n_u:n_u + n_l] = -system.Mg[free]
    rhs[rows[free]] = system.G[free]
    J[rows[~free], n_u + np.flatnonzero(~free)] = 1.0
    rhs[rows[~free]] = clamp[~free]
    J[n_u + n_l:, :n_u] = border.T
    return J, rhs


def _partition(lam, v, bounds, free):
    n_free, t_free = free[0::2], free[1::2]
    return {"n_active_n": int(n_free.sum()), "n_slip": int((~t_free & (bounds > 0)).sum()),
            "n_stick": int(t_free.sum())}


def semismooth_newton(system, bounds, c_aug, tol=1e-10, max_iter=50, u0=None, lam0=None,
                      log=None, single_step=False):
    """Primal-dual active set form of semi-smooth Newton on the projection equations."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    F = projection_reformulation(system, c_aug)
    n_u, n_l = system.n_u, system.n_lam
    u = np.zeros(n_u) if u0 is None else u0.copy()
    lam = np.zeros(n_l) if lam0 is None else lam0.copy()
    border = system.R if system.rigid_mode == RIGID_FORCED else system.R[:, :0]
    kappa = np.zeros(border.shape[1])
    scale = 1.0 + np.linalg.norm(system.f)
    history = []
    prev = None
    it = 0
    res_vec, v = F(u, lam, kappa, bounds, border)
    res = float(np.linalg.norm(res_vec))
    for it in range(1, max_iter + 1):
        free = _pattern(v, bounds)
        lo, hi = _box(bounds)
        new_border = system.border(free)
        if new_border.shape != border.shape or not np.array_equal(new_border, border):
            # carry the current reaction over to the new set of pinned motions
            kappa = (np.linalg.lstsq(new_border, border @ kappa, rcond=None)[0] if new_border.shape[1]
                     else np.zeros(0))
            border = new_border
            res_vec, v = F(u, lam, kappa, bounds, border)
            res = float(np.linalg.norm(res_vec))
        J, rhs = _pattern_solve(system, free, np.clip(v, lo, hi), border)
        try:
            z = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("singular Newton matrix") from exc
        z0 = np.concatenate([u, lam, kappa])
        d = z - z0
        # Armijo backtracking on |F|; the full step is the exact solution of the current pattern
        step = 1.0
        while True:
            zt = z0 + step * d
            ut, lt, kt = zt[:n_u], zt[n_u:n_u + n_l], zt[n_u + n_l:]
            rt, vt = F(ut, lt, kt, bounds, border)
            rnorm = float(np.linalg.norm(rt))
            if rnorm <= (1.0 - 1e-4 * step) * res or step < 1e-10:
                break
            step *= 0.5
        u, lam, kappa, res_vec, v, res = ut, lt, kt, rt, vt, rnorm
        rec = {"iter": it, "residual": res, "step": step, "n_pinned": int(border.shape[1]),
               **_partition(lam, v, bounds, free)}
        history.append(rec)
        if log is not None:
            log.write(json.dumps(rec) + "\n")
        same = prev is not None and np.array_equal(prev, free)
        prev = free
        if single_step:
            break
        if res <= tol * scale and np.array_equal(_pattern(v, bounds), free):
            break
        if same and res <= tol * scale:
            break
    else:
        raise RuntimeError(f"semi-smooth Newton did not converge in {max_iter} iterations (residual {res:.3e})")
    res = float(np.linalg.norm(res_vec))
    psi = system.steklov.H @ u
    return DiscreteSolution(u, lam, psi, kappa, bounds, it, res, res <= tol * scale,
                            _partition(lam, v, bounds, _pattern(v, bounds)), history, border)


def initial_guess(system):
    """Unconstrained solve with a Dirichlet part, otherwise the bonded (fully stuck) solution."""
    if system.R.shape[1] == 0 or system.rigid_mode == RIGID_FORCED:
        return unconstrained_solve(system), np.zeros(system.n_lam)
    free = np.ones(system.n_lam, dtype=bool)
    J, rhs = _pattern_solve(system, free, np.zeros(system.n_lam))
    z = np.linalg.solve(J, rhs)
    return z[:system.n_u], z[system.n_u:system.n_u + system.n_lam]


def unconstrained_solve(system):
    n_u, n_r = system.n_u, system.R.shape[1]
    J = np.zeros((n_u + n_r, n_u + n_r))
    J[:n_u, :n_u] = system.A
    J[:n_u, n_u:] = system.R
    J[n_u:, :n_u] = system.R.T
    rhs = np.concatenate([system.f, np.zeros(n_r)])
    return np.linalg.solve(J, rhs)[:n_u]


def solve_tresca(spec, system, c_aug=None, log=None):
    if spec.friction != TRESCA:
        raise ValueError("solve_tresca needs Tresca friction")
    c_aug = default_c_aug(spec, system.mesh) if c_aug is None else c_aug
    bounds = tresca_bounds(spec, system)
    u0, lam0 = initial_guess(system)
    return semismooth_newton(system, bounds, c_aug, spec.tol, spec.max_iter, u0=u0, lam0=lam0, log=log)


def coulomb_bounds(spec, lam):
    return spec.friction_coefficient * np.maximum(lam[0::2], 0.0)


STALL_WINDOW = 30


def _coulomb_polish(spec, system, c_aug, u, lam, kappa, border):
    """Solve the linear system the fixed point satisfies for the current active pattern.

    Free rows as in _pattern_solve; slipping tangential rows become lam_t = s mu lam_n
    with s the slip direction.  Returns (u, lam, kappa, border, residual, pattern kept)."""
    F = projection_reformulation(system, c_aug)
    bounds = coulomb_bounds(spec, lam)
    _, v = F(u, lam, kappa, bounds, border)
    free = _pattern(v, bounds)
    lo, hi = _box(bounds)
    border = system.border(free)
    J, rhs = _pattern_solve(system, free, np.clip(v, lo, hi), border)
    n_u = system.n_u
    for k in np.flatnonzero(~free[1::2]):
        row = n_u + 2 * k + 1
        J[row, :] = 0.0
        J[row, n_u + 2 * k + 1] = 1.0
        J[row, n_u + 2 * k] = -np.sign(v[2 * k + 1]) * spec.friction_coefficient
        rhs[row] = 0.0
    z = np.linalg.solve(J, rhs)
    n_l = system.n_lam
    u2, lam2, kappa2 = z[:n_u], z[n_u:n_u + n_l], z[n_u + n_l:]
    bounds2 = coulomb_bounds(spec, lam2)
    res_vec, v2 = F(u2, lam2, kappa2, bounds2, border)
    return u2, lam2, kappa2, border, float(np.linalg.norm(res_vec)), np.array_equal(_pattern(v2, bounds2), free)


def solve_coulomb(spec, system, c_aug=None, outer_tol=1e-10, max_outer=300, log=None):
    """Fixed point on the Coulomb bound with one semi-smooth Newton step per outer iteration.

    The loop stops when the relative change of (u, lam) drops below outer_tol, or when it
    has stopped decreasing for STALL_WINDOW iterations: with tiny gamma0 the multiplier
    modes unseen by B are fixed only through the gamma mass and roundoff puts a floor under
    the change.  The iterate is then replaced by the solution of the linear system of its
    active pattern (slip rows lam_t = s mu lam_n) when that keeps the pattern and lowers
    the projection residual; converged means that residual is below tol.
    """
    if spec.friction != COULOMB:
        raise ValueError("solve_coulomb needs Coulomb friction")
    c_aug = default_c_aug(spec, system.mesh) if c_aug is None else c_aug
    u, lam = initial_guess(system)
    scale = 1.0 + np.linalg.norm(system.f)
    F = projection_reformulation(system, c_aug)
    history = []
    best, since_best = np.inf, 0
    for outer in range(1, max_outer + 1):
        bounds = coulomb_bounds(spec, lam)
        sol = semismooth_newton(system, bounds, c_aug, spec.tol, 1, u0=u, lam0=lam, single_step=True)
        change = np.linalg.norm(np.concatenate([sol.u - u, sol.lam - lam]))
        size = max(1.0, np.linalg.norm(np.concatenate([sol.u, sol.lam])))
        u, lam = sol.u, sol.lam
        rel = float(change / size)
        rec = {"iter": outer, "residual": sol.residual, "change": rel, **sol.partition}
        history.append(rec)
        if log is not None:
            log.write(json.dumps(rec) + "\n")
        if rel < 0.5 * best or sol.residual > spec.tol * scale:
            best, since_best = min(best, rel), 0
        else:
            since_best += 1
        if rel <= outer_tol or since_best >= STALL_WINDOW:
            break
    else:
        raise RuntimeError(f"Coulomb fixed point did not converge in {max_outer} iterations")
    kappa, border = sol.kappa, sol.border
    res_vec, v = F(u, lam, kappa, coulomb_bounds(spec, lam), border)
    res = float(np.linalg.norm(res_vec))
    try:
        u2, lam2, kappa2, border2, res2, kept = _coulomb_polish(spec, system, c_aug, u, lam, kappa, border)
    except np.linalg.LinAlgError:
        kept = False
    polished = kept and res2 < res
    if polished:
        u, lam, kappa, border, res = u2, lam2, kappa2, border2, res2
        res_vec, v = F(u, lam, kappa, coulomb_bounds(spec, lam), border)
    bounds = coulomb_bounds(spec, lam)
    partition = {**_partition(lam, v, bounds, _pattern(v, bounds)), "change_floor": min(best, rel),
                 "polished": bool(polished)}
    return DiscreteSolution(u, lam, system.steklov.H @ u, kappa, bounds, outer, res, res <= spec.tol * scale,
                            partition, history, border)


def solve(spec, system, log=None):
    return solve_tresca(spec, system, log=log) if spec.friction == TRESCA else solve_coulomb(spec, system, log=log)


# ---------------------------------------------------------------- oracle

def _schur(system):
    """r = d - Q lam after eliminating u (and rigid multipliers)."""
    if system.R.shape[1] and system.rigid_mode != RIGID_FORCED:
        raise ValueError("the brute-force oracle needs a Dirichlet part or pinned rigid motions")
    n_u, n_r = system.n_u, system.R.shape[1]
    J = np.zeros((n_u + n_r, n_u + n_r))
    J[:n_u, :n_u] = system.A
    J[:n_u, n_u:] = system.R
    J[n_u:, :n_u] = system.R.T
    rhs = np.zeros((n_u + n_r, 1 + system.n_lam))
    rhs[:n_u, 0] = system.f
    rhs[:n_u, 1:] = -system.C.T
    sol = np.linalg.solve(J, rhs)
    U0, U1 = sol[:n_u, 0], sol[:n_u, 1:]  # u = U0 + U1 lam
    d = system.C @ U0 - system.G
    Q = -(system.C @ U1) + system.Mg
    return d, Q, U0, U1, sol[n_u:, 0], sol[n_u:, 1:]


def brute_force_solve(system, bounds, feas_tol=1e-9):
    """Enumerate every normal (separated/contact) and tangential (stick/slip+/slip-)
    pattern, solve the reduced linear system and keep the feasible ones."""
    m = bounds.size
    if m > 12:
        raise ValueError("brute force limited to 12 multiplier coefficients")
    d, Q, U0, U1, K0, K1 = _schur(system)
    n = 2 * m
    scale = max(1.0, np.abs(d).max())
    found = []
    # free set F: normal components in contact, tangential components sticking
    for mask in range(1 << n):
        free = np.array([(mask >> k) & 1 for k in range(n)], dtype=bool)
        fixed_t = [k for k in range(1, n, 2) if not free[k]]
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=len(fixed_t))), dtype=float).reshape(1 << len(fixed_t), len(fixed_t))
        lamX = np.zeros((signs.shape[0], n))
        for c, k in enumerate(fixed_t):
            lamX[:, k] = signs[:, c] * bounds[k // 2]
        Fi = np.flatnonzero(free)
        if Fi.size:
            Qff = Q[np.ix_(Fi, Fi)]
            rhs = d[Fi][None, :] - lamX @ Q[Fi].T
            try:
                lamF = np.linalg.solve(Qff, rhs.T).T
            except np.linalg.LinAlgError:
                continue
            lamX[:, Fi] = lamF
        lam = lamX
        r = d[None, :] - lam @ Q.T
        ok = np.ones(lam.shape[0], dtype=bool)
        tol = feas_tol * scale
        for k in range(n):
            if k % 2 == 0:
                if free[k]:
                    ok &= lam[:, k] >= -feas_tol * max(1.0, np.abs(lam).max())
                else:
                    ok &= r[:, k] <= tol
            else:
                b = bounds[k // 2]
                if free[k]:
                    ok &= np.abs(lam[:, k]) <= b * (1 + 1e-12) + feas_tol
                else:
                    ok &= r[:, k] * np.sign(lam[:, k]) >= -tol if b > 0 else np.ones_like(ok)
        for row in np.flatnonzero(ok):
            found.append((free.copy(), lam[row].copy()))
    if not found:
        raise RuntimeError("no feasible active-set pattern")
    lam = found[0][1]
    u = U0 + U1 @ lam
    kappa = K0 + K1 @ lam
    distinct = {tuple(np.round(f[1] / max(1.0, np.abs(f[1]).max()), 9)) for f in found}
    psi = system.steklov.H @ u
    return DiscreteSolution(u, lam, psi, kappa, bounds, 0, 0.0, True,
                            {"n_patterns": len(found), "n_distinct": len(distinct)}, [], system.R)
