"""Configuration-driven experiment runs: adaptive loops, gamma0 sweeps, stabilization
comparison and solution profiles, with CSV/JSON output."""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh

from .contact import PRESETS, assemble_system, solve
from .estimator import ADAPTIVE_H, ADAPTIVE_HP, UNIFORM_H, adaptive_loop, csv_rows, estimate
from .geometry import CONTACT, initial_mesh
from .spaces import BERNSTEIN, GLL, build_spaces, evaluate
from .steklov import APPROXIMATE, FULL, OFF

STRATEGIES = (UNIFORM_H, ADAPTIVE_H, ADAPTIVE_HP)
STAB_MODES = (FULL, APPROXIMATE, OFF)
BASES = (BERNSTEIN, GLL)


class ConfigError(ValueError):
    pass


# section -> field names, in file order
_LAYOUT = {
    "problem": ("preset", "load_scale"),
    "discretization": ("n_per_unit", "p0", "basis", "gamma0", "stab_mode"),
    "adaptivity": ("strategy", "n_steps", "theta", "delta", "residual_div10"),
    "output": ("out_dir",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "tresca_square"
    load_scale: float = 1.0
    n_per_unit: int = 4
    p0: int = 1
    basis: str = BERNSTEIN
    gamma0: float = 1e-3
    stab_mode: str = FULL
    strategy: str = UNIFORM_H
    n_steps: int = 4
    theta: float = 0.3
    delta: float = 0.5
    residual_div10: bool = True
    out_dir: str = "results"

    def __post_init__(self):
        checks = [
            ("preset", self.preset in PRESETS, f"one of {sorted(PRESETS)}"),
            ("basis", self.basis in BASES, f"one of {BASES}"),
            ("stab_mode", self.stab_mode in STAB_MODES, f"one of {STAB_MODES}"),
            ("strategy", self.strategy in STRATEGIES, f"one of {STRATEGIES}"),
            ("n_steps", self.n_steps >= 1, "at least 1"),
            ("n_per_unit", self.n_per_unit >= 1, "at least 1"),
            ("p0", self.p0 >= 1, "at least 1"),
            ("gamma0", self.gamma0 >= 0, "nonnegative"),
            ("theta", 0 < self.theta < 1, "in (0, 1)"),
            ("delta", 0 < self.delta < 1, "in (0, 1)"),
        ]
        for name, ok, what in checks:
            if not ok:
                raise ConfigError(f"field {name!r}: {getattr(self, name)!r} must be {what}")
        if self.stab_mode == OFF and self.gamma0 > 0:
            raise ConfigError("field 'stab_mode': 'off' contradicts gamma0 > 0")

    def to_text(self):
        cp = configparser.ConfigParser()
        for sec, names in _LAYOUT.items():
            cp[sec] = {n: _fmt(getattr(self, n)) for n in names}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text):
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        known = {n: sec for sec, names in _LAYOUT.items() for n in names}
        values = {}
        for sec in cp.sections():
            if sec not in _LAYOUT:
                raise ConfigError(f"unknown section [{sec}]")
            for key, raw in cp[sec].items():
                if known.get(key) != sec:
                    raise ConfigError(f"[{sec}] unknown field {key!r}")
                try:
                    values[key] = _parse(types[key], raw)
                except ValueError as exc:
                    raise ConfigError(f"[{sec}] field {key!r}: cannot parse {raw!r}") from exc
        return cls(**values)

    def digest(self):
        """Hash of everything that affects the numbers (the output location does not)."""
        key = {n: _fmt(getattr(self, n)) for sec, names in _LAYOUT.items() if sec != "output" for n in names}
        return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:16]

    def problem(self):
        return PRESETS[self.preset](gamma0=self.gamma0, basis=self.basis, load_scale=self.load_scale)

    def initial_mesh(self):
        return initial_mesh(self.problem().boundary(), self.n_per_unit, self.p0)


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _parse(typ, raw):
    typ = typ if isinstance(typ, str) else typ.__name__
    if typ == "bool":
        low = raw.strip().lower()
        if low not in ("true", "false"):
            raise ValueError(raw)
        return low == "true"
    return {"int": int, "float": float, "str": str}[typ](raw.strip())


def load_config(path):
    return ExperimentConfig.from_text(Path(path).read_text())


@dataclass
class RunRecord:
    config_hash: str
    header: list
    rows: list
    diagnostics: list
    wall_time: float
    ok: bool
    error: str = ""

    def csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def run(config, write=True):
    """Adaptive loop of the config; writes steps.csv, one mesh JSON per step and run.json."""
    spec = config.problem()
    out = Path(config.out_dir)
    t0 = time.perf_counter()
    results, diagnostics, error = [], [], ""

    def on_step(res):
        results.append(res)
        sol = res.solution
        diagnostics.append({"step": res.step, "newton_iterations": sol.newton_iterations,
                            "residual": sol.residual, "converged": bool(sol.converged), **sol.partition})

    try:
        adaptive_loop(spec, config.initial_mesh(), config.strategy, config.n_steps, config.theta,
                      config.delta, config.stab_mode, 0.1 if config.residual_div10 else 1.0, on_step)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        error = str(exc)
    header, rows = csv_rows(results)
    ok = not error and all(d["converged"] for d in diagnostics)
    rec = RunRecord(config.digest(), header, rows, diagnostics, time.perf_counter() - t0, ok, error)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        (out / "steps.csv").write_text(rec.csv_text())
        for r in results:
            (out / f"mesh_step{r.step}.json").write_text(r.mesh.to_json())
        (out / "config.ini").write_text(config.to_text())
        (out / "run.json").write_text(json.dumps(dataclasses.asdict(rec), indent=1))
    rec.results = results
    return rec


def stabilized_min_eig(system):
    """Smallest eigenvalue of S - Shat on the complement of the rigid motions (if any)."""
    A = system.A
    if system.rigid.shape[1]:
        Q, _ = np.linalg.qr(system.rigid, mode="complete")
        P = Q[:, system.rigid.shape[1]:]
        A = P.T @ A @ P
    return float(eigh(0.5 * (A + A.T), eigvals_only=True, subset_by_index=[0, 0])[0])


def gamma0_sweep(config, gammas):
    """One solve per gamma0 on the config's initial mesh: (gamma0, eta, lambda_min, error)."""
    if len(gammas) == 0:
        raise ValueError("gamma0 list is empty")
    mesh = config.initial_mesh()
    spaces = build_spaces(mesh, config.basis)
    ops = None
    rows = []
    for g0 in gammas:
        cfg = dataclasses.replace(config, gamma0=float(g0), stab_mode=config.stab_mode if g0 > 0 else OFF)
        spec = cfg.problem()
        system = assemble_system(spec, mesh, spaces, cfg.stab_mode, ops=ops)
        ops = system.ops
        row = {"gamma0": float(g0), "eta": float("nan"), "lambda_min": stabilized_min_eig(system), "error": ""}
        try:
            sol = solve(spec, system)
            row["eta"] = estimate(system, sol, spec, 0.1 if cfg.residual_div10 else 1.0).eta
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows


def stabilization_comparison(config):
    """Full and approximate Shat on identical meshes (the meshes of the full run)."""
    full = run(dataclasses.replace(config, stab_mode=FULL), write=False)
    spec = dataclasses.replace(config, stab_mode=APPROXIMATE).problem()
    rows = []
    for res in full.results:
        spaces = build_spaces(res.mesh, config.basis)
        system = assemble_system(spec, res.mesh, spaces, APPROXIMATE)
        sol = solve(spec, system)
        eta_a = estimate(system, sol, spec, 0.1 if config.residual_div10 else 1.0).eta
        eta_f = res.breakdown.eta
        rows.append({"step": res.step, "n_dof": res.n_dof, "eta_full": eta_f, "eta_approximate": eta_a,
                     "relative_deviation": (eta_a - eta_f) / eta_f})
    return rows


def solution_profile(system, solution, n_samples=200):
    """(x1, u_n, u_t, lam_n, lam_t) at uniformly spaced points of the contact part."""
    mesh = system.mesh
    a, b, tau, nrm, h = mesh.arrays()
    ids = mesh.ids(CONTACT)
    total = h[ids].sum()
    s = (np.arange(n_samples) + 0.5) / n_samples * total
    starts = np.concatenate([[0.0], np.cumsum(h[ids])[:-1]])
    out = np.zeros((n_samples, 5))
    for q, sq in enumerate(s):
        i = min(int(np.searchsorted(starts, sq, side="right")) - 1, len(ids) - 1)
        k = ids[i]
        t = np.array([(sq - starts[i]) / h[k]])
        x = a[k] + t[0] * (b[k] - a[k])
        uk = evaluate(system.spaces.primal, mesh, solution.u, k, t)[0]
        lk = evaluate(system.spaces.multiplier, mesh, solution.lam, k, t)[0]
        out[q] = [x[0], uk @ nrm[k], uk @ tau[k], lk[0], lk[1]]
    return out


def dump_solution_profile(system, solution, fh, n_samples=200):
    prof = solution_profile(system, solution, n_samples)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x1", "u_n", "u_t", "lam_n", "lam_t"])
    w.writerows([[repr(float(v)) for v in row] for row in prof])
    return prof


def write_table(rows, fh):
    if not rows:
        return
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)

