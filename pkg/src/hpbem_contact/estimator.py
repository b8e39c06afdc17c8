"""Residual a posteriori error indicator, Dorfler marking, h/p decision and the adaptive loop.

The indicator is evaluated elementwise.  Fractional norms on the contact part are
replaced by hp-weighted L2 surrogates: ||v||^2_{-1/2} ~ sum (h/p)||v||^2_0 and
||v||^2_{1/2} ~ sum (p/h)||v||^2_0.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .contact import COULOMB, TRESCA, assemble_system, solve
from .geometry import CONTACT, NEUMANN, RAISE_P, SPLIT_H, RefinementMark, apply_marks
from .kernels import PanelKernel
from .operators import potential_matrix
from .quadrature import gauss01
from .spaces import build_spaces, evaluate
from .steklov import FD_STEP, FULL, pointwise_steklov

N_GAUSS = 16
RESIDUAL_TERMS = ("neumann", "contact_residual", "density")
CONSTRAINT_TERMS = ("compl_normal", "penetration", "sign_normal", "friction_excess", "stick_slip")
TERMS = RESIDUAL_TERMS + CONSTRAINT_TERMS
UNIFORM_H, ADAPTIVE_H, ADAPTIVE_HP = "uniform_h", "adaptive_h", "adaptive_hp"


@dataclass(frozen=True)
class ErrorBreakdown:
    """Per-element values of every indicator term (length = number of elements).

    The residual terms are stored unweighted; residual_factor (1/10 by default) is
    applied when forming the element indicators.
    """
    neumann: np.ndarray
    contact_residual: np.ndarray
    density: np.ndarray
    compl_normal: np.ndarray
    penetration: np.ndarray
    sign_normal: np.ndarray
    friction_excess: np.ndarray
    stick_slip: np.ndarray
    residual_factor: float = 0.1

    def term(self, name):
        v = getattr(self, name)
        return self.residual_factor * v if name in RESIDUAL_TERMS else v

    def element_eta2(self):
        return sum(self.term(n) for n in TERMS)

    @property
    def eta2(self):
        return float(self.element_eta2().sum())

    @property
    def eta(self):
        return float(np.sqrt(max(self.eta2, 0.0)))

    def totals(self):
        return {n: float(self.term(n).sum()) for n in TERMS}


def surrogate_half_norm(l2_squared, h, p, sign):
    """hp-weighted surrogate of ||v||^2_{+-1/2} from elementwise ||v||^2_0."""
    l2_squared, h, p = (np.asarray(v, dtype=float) for v in (l2_squared, h, p))
    if sign < 0:
        return h / p * l2_squared
    if sign > 0:
        return p / h * l2_squared
    raise ValueError("sign must be +1 or -1")


def _points(mesh, ids, n):
    a, b, tau, nrm, h = mesh.arrays()
    t, w = gauss01(n)
    ids = np.asarray(ids, dtype=int)
    X = (a[ids][:, None, :] + t[None, :, None] * (b[ids] - a[ids])[:, None, :]).reshape(-1, 2)
    return t, w, X


def _steklov_values(system, u, ids, n, fd_step):
    mesh = system.mesh
    a, b, tau, nrm, h = mesh.arrays()
    t, w, X = _points(mesh, ids, n)
    rep = lambda arr: np.repeat(arr[ids], n, axis=0)
    A = pointwise_steklov(system.ops, system.steklov, X, rep(nrm), rep(tau), rep(h), fd_step)
    return (A @ u).reshape(len(ids), n, 2), X.reshape(len(ids), n, 2), w


def _density_term(system, u, psi, n, fd_step):
    """h ||d/ds (V psi - (K + 1/2) u)||^2 per element, by central differences of the potentials."""
    mesh, ops = system.mesh, system.ops
    sp = ops.spaces
    a, b, tau, nrm, h = mesh.arrays()
    ids = np.arange(len(mesh))
    t, w, X = _points(mesh, ids, n)
    hs = np.repeat(h, n)
    step = (fd_step * hs)[:, None] * np.repeat(tau, n, axis=0)

    def field(P):
        Vp = potential_matrix(PanelKernel("V", ops.material), mesh, sp.density, P) @ psi
        Kp = potential_matrix(PanelKernel("K", ops.material), mesh, sp.primal, P) @ u
        return Vp - Kp

    d = (field(X + step) - field(X - step)) / (2.0 * fd_step * hs)[:, None]
    du = np.concatenate([evaluate(sp.primal, mesh, u, k, t, deriv=True) for k in ids])
    d = (d - 0.5 * du).reshape(len(ids), n, 2)
    return h * h * (np.einsum("knc,knc->kn", d, d) @ w)


def estimate(system, solution, spec, residual_factor=0.1, n_gauss=N_GAUSS, fd_step=FD_STEP):
    """Indicator for either friction law; the friction bound is F(x) (Tresca) or
    mu (lam_n)^+ (Coulomb).  The stabilization weight does not enter."""
    mesh = system.mesh
    a, b, tau, nrm, h = mesh.arrays()
    p = mesh.degrees.astype(float)
    sp = system.spaces
    u, lam, psi = solution.u, solution.lam, solution.psi
    m = len(mesh)
    terms = {name: np.zeros(m) for name in TERMS}

    neu = mesh.ids(NEUMANN)
    con = mesh.ids(CONTACT)
    both = neu + con
    if both:
        Su, X, w = _steklov_values(system, u, both, n_gauss, fd_step)
    for i, k in enumerate(both):
        if mesh.elements[k].part != NEUMANN:
            continue
        T = np.array([spec.traction(x, nrm[k]) for x in X[i]]) * spec.load_scale
        r = T - Su[i]
        terms["neumann"][k] = h[k] / p[k] * h[k] * (np.einsum("qc,qc->q", r, r) @ w)

    t, w = gauss01(n_gauss)
    for i, k in enumerate(both):
        if mesh.elements[k].part != CONTACT:
            continue
        hw = h[k] * w
        ln, lt = evaluate(sp.multiplier, mesh, lam, k, t).T
        lam_xy = np.outer(ln, nrm[k]) + np.outer(lt, tau[k])
        r = -lam_xy - Su[i]
        terms["contact_residual"][k] = (h[k] / p[k] + h[k] / p[k] ** 2) * (np.einsum("qc,qc->q", r, r) @ hw)
        uk = evaluate(sp.primal, mesh, u, k, t)
        un, ut = uk @ nrm[k], uk @ tau[k]
        xq = X[i]
        g = np.array([spec.gap(x) for x in xq])
        if spec.friction == TRESCA:
            F = np.array([spec.friction_bound(x) for x in xq])
        else:
            F = spec.friction_coefficient * np.maximum(ln, 0.0)
        gap = g - un
        excess = np.abs(lt) - F
        terms["compl_normal"][k] = np.maximum(ln, 0.0) * np.maximum(gap, 0.0) @ hw
        terms["penetration"][k] = surrogate_half_norm(np.minimum(gap, 0.0) ** 2 @ hw, h[k], p[k], +1)
        terms["sign_normal"][k] = surrogate_half_norm(np.minimum(ln, 0.0) ** 2 @ hw, h[k], p[k], -1)
        terms["friction_excess"][k] = surrogate_half_norm(np.maximum(excess, 0.0) ** 2 @ hw, h[k], p[k], -1)
        terms["stick_slip"][k] = (-np.minimum(excess, 0.0) * np.abs(ut) + np.abs(lt) * np.abs(ut)
                                  - lt * ut) @ hw

    terms["density"] = _density_term(system, u, psi, n_gauss, fd_step)
    return ErrorBreakdown(residual_factor=residual_factor, **terms)


def estimate_tresca(system, solution, spec, **kw):
    if spec.friction != TRESCA:
        raise ValueError("estimate_tresca needs Tresca friction")
    return estimate(system, solution, spec, **kw)


def estimate_coulomb(system, solution, spec, **kw):
    if spec.friction != COULOMB:
        raise ValueError("estimate_coulomb needs Coulomb friction")
    return estimate(system, solution, spec, **kw)


def dorfler_mark(eta2, theta):
    """Smallest set (greedy on sorted indicators, ties by element id) carrying theta of the total."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    eta2 = np.asarray(eta2 if not isinstance(eta2, ErrorBreakdown) else eta2.element_eta2(), dtype=float)
    order = np.lexsort((np.arange(eta2.size), -eta2))
    target = theta * eta2.sum()
    marked, acc = [], 0.0
    for k in order:
        if acc >= target and marked:
            break
        marked.append(int(k))
        acc += eta2[k]
    return sorted(marked)


@dataclass
class AdaptiveState:
    theta: float = 0.3
    delta: float = 0.5
    meshes: list = field(default_factory=list)
    history: dict = field(default_factory=dict)  # element uid -> eta_E at the step it was computed
    levels: dict = field(default_factory=dict)   # element uid -> refinement level

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")

    def record(self, mesh, eta2):
        self.meshes.append(mesh)
        for e, v in zip(mesh.elements, eta2):
            self.history[e.uid] = float(np.sqrt(max(v, 0.0)))
            self.levels[e.uid] = e.level


# reference decay of a child's indicator relative to its share of the parent's indicator:
# near a singularity the share is not reduced at all (ratio about 1)
H_FACTOR = 1.0


def hp_decide(marked, mesh, eta2, state, delta=None):
    """split_h or raise_p for each marked element from the decay of its indicator.

    The indicator of a child is compared with the parent's share (parent / sqrt(2) after a
    split).  A decay faster than delta * H_FACTOR signals a locally smooth solution."""
    delta = state.delta if delta is None else delta
    out = []
    for k in marked:
        e = mesh.elements[k]
        parent = state.history.get(e.parent)
        if parent is None or parent <= 0.0:
            out.append(RefinementMark(k, SPLIT_H))
            continue
        split = e.level > state.levels.get(e.parent, e.level)
        share = parent / np.sqrt(2.0) if split else parent
        ratio = np.sqrt(max(eta2[k], 0.0)) / share
        out.append(RefinementMark(k, RAISE_P if ratio <= delta * H_FACTOR else SPLIT_H))
    return out


@dataclass
class StepResult:
    step: int
    mesh: object
    solution: object
    breakdown: ErrorBreakdown
    n_dof: int
    system: object = None


def n_dofs(spaces):
    return spaces.primal.ndof + spaces.multiplier.ndof


def adaptive_loop(spec, mesh, strategy=UNIFORM_H, n_steps=1, theta=0.3, delta=0.5, stab_mode=FULL,
                  residual_factor=0.1, on_step=None):
    """Solve, estimate, mark, refine.  Returns the list of StepResult."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if strategy not in (UNIFORM_H, ADAPTIVE_H, ADAPTIVE_HP):
        raise ValueError(f"unknown strategy {strategy!r}")
    state = AdaptiveState(theta, delta)
    out = []
    for step in range(n_steps):
        spaces = build_spaces(mesh, spec.basis)
        system = assemble_system(spec, mesh, spaces, stab_mode)
        sol = solve(spec, system)
        br = estimate(system, sol, spec, residual_factor=residual_factor)
        res = StepResult(step, mesh, sol, br, n_dofs(spaces), system)
        out.append(res)
        if on_step is not None:
            on_step(res)
        if step == n_steps - 1:
            break
        eta2 = br.element_eta2()
        if strategy == UNIFORM_H:
            marks = [RefinementMark(k, SPLIT_H) for k in range(len(mesh))]
        else:
            marked = dorfler_mark(eta2, theta)
            marks = (hp_decide(marked, mesh, eta2, state) if strategy == ADAPTIVE_HP
                     else [RefinementMark(k, SPLIT_H) for k in marked])
        state.record(mesh, eta2)
        mesh = apply_marks(mesh, marks)
    return out


def csv_rows(results):
    """Rows of step, n_dof, eta_total and one column per (weighted) term."""
    header = ["step", "n_dof", "n_elements", "eta_total"] + [f"eta_{n}" for n in TERMS]
    rows = []
    for r in results:
        tot = r.breakdown.totals()
        rows.append([r.step, r.n_dof, len(r.mesh), repr(r.breakdown.eta)] + [repr(tot[n]) for n in TERMS])
    return header, rows


def write_csv(results, fh=None):
    fh = io.StringIO() if fh is None else fh
    header, rows = csv_rows(results)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return fh
