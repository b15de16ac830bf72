"""Thickness-ladder orchestration: 3D minimizers against the 1D limit model.

run_ladder solves the limit model once, minimizes the rescaled 3D energy at
every thickness on the ladder, and measures discrete W^{1,2} norms of the
observable differences on the common coarse axial grid; estimate_rates fits
log-log slopes with standard errors; emit_report writes csv/json/svg
artifacts with byte-deterministic content.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, plotsvg
from .beam import (
    BeamConfig,
    BeamMesh,
    DeformationField,
    build_mesh,
    extract_observables,
    fit_rotations,
    make_ansatz,
    minimize,
    strain_stress_moments,
)
from .cell import ReducedStiffness, q1_matrix
from .errors import ConvergenceError, InputError, InsufficientDataError, NumericalError
from .material import ElasticTensor, IsotropicModuli, make_energy
from .rod import RodLoads, RodState, el_residuals, solve_equilibrium

# columns whose ladder sequence gets a fitted rate
RATE_COLUMNS = (
    "err_u",
    "err_v2",
    "err_v3",
    "err_w",
    "rot_dist_l2",
    "mean_stress_l2",
    "y_dist_w12",
)

_CSV_COLUMNS = (
    "h",
    "n_axial",
    "status",
    "err_u",
    "err_v2",
    "err_v3",
    "err_w",
    "int_w_scaled",
    "rot_dist_l2",
    "rot_deriv_l2",
    "rot_dist_id_max",
    "mean_stress_l2",
    "y_dist_w12",
    "energy",
    "grad_norm",
    "iterations",
    "config_hash",
)

_REFERENCE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LadderSpec:
    """Shared setup plus per-rung resolution for one thickness ladder.

    The default length keeps the axial step well below the thickness at the
    default resolutions (ha/h ~ 0.16), so the model error, not the axial
    interpolation floor of the prism element, dominates every rung.
    """

    section: object
    moduli: IsotropicModuli
    loads: RodLoads = RodLoads()
    alpha: float = 3.0
    length: float = 0.5
    h_values: tuple = (0.2, 0.1, 0.05)
    n_axial: tuple = (16, 32, 64)
    energy_family: str = "svk_logdet"
    rod_elements: int = 64
    tol: float = 1e-9
    max_iter: int = 500

    def __post_init__(self):
        hs = tuple(float(v) for v in self.h_values)
        nas = tuple(int(v) for v in self.n_axial)
        if any(not np.isfinite(v) or v <= 0.0 for v in hs):
            raise InputError("ladder thicknesses must be positive")
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise InputError("ladder thicknesses must be strictly decreasing")
        if len(nas) != len(hs):
            raise InputError("need one axial resolution per thickness")
        if any(n < 1 for n in nas):
            raise InputError("axial resolutions must be at least 1")
        if not (np.isfinite(self.alpha) and self.alpha > 2.0):
            raise InputError(f"load exponent must exceed 2, got {self.alpha}")
        if not (np.isfinite(self.length) and self.length > 0.0):
            raise InputError(f"length must be positive, got {self.length}")
        if self.rod_elements < 2:
            raise InputError("reference rod needs at least 2 elements")
        object.__setattr__(self, "h_values", hs)
        object.__setattr__(self, "n_axial", nas)

    @property
    def n_rungs(self) -> int:
        return len(self.h_values)

    def rung_config(self, i: int) -> BeamConfig:
        return BeamConfig(
            energy=make_energy(self.energy_family, self.moduli),
            section=self.section,
            h=self.h_values[i],
            alpha=self.alpha,
            length=self.length,
            n_axial=self.n_axial[i],
            loads=self.loads,
            tol=self.tol,
            max_iter=self.max_iter,
        )


@dataclass
class RungRecord:
    h: float
    n_axial: int
    config_hash: str
    status: str = "ok"
    message: str = ""
    warm_started: bool = False
    errors: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    observables: dict | None = None
    field3d: DeformationField | None = None


@dataclass
class ConvergenceReport:
    spec: LadderSpec
    reference: RodState | None
    reference_residuals: dict
    stiffness: ReducedStiffness | None
    coarse_x: np.ndarray
    rungs: list

    def ok_rungs(self) -> list:
        return [r for r in self.rungs if r.status == "ok"]


# ---------------------------------------------------------------------------
# canonical configuration hashing


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def sha256_of(text: str) -> str:
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def section_digest(section) -> str:
    hsh = hashlib.sha256()
    hsh.update(np.ascontiguousarray(section.vertices, dtype=float).tobytes())
    hsh.update(np.ascontiguousarray(section.triangles, dtype=np.int64).tobytes())
    return hsh.hexdigest()


def describe_load(spec_obj) -> object:
    if isinstance(spec_obj, bool):
        raise InputError("booleans are not valid load values")
    if isinstance(spec_obj, (int, float)):
        return float(spec_obj)
    if isinstance(spec_obj, str):
        return spec_obj
    # opaque callables cannot be serialized; hash them as a fixed token
    return "callable"


def rung_config_dict(spec: LadderSpec, i: int) -> dict:
    return {
        "schema_version": 1,
        "alpha": spec.alpha,
        "length": spec.length,
        "h": spec.h_values[i],
        "n_axial": spec.n_axial[i],
        "energy_family": spec.energy_family,
        "moduli": {"mu": spec.moduli.mu, "lam": spec.moduli.lam},
        "loads": {"f2": describe_load(spec.loads.f2),
                  "f3": describe_load(spec.loads.f3)},
        "section_sha256": section_digest(spec.section),
        "tol": spec.tol,
        "max_iter": spec.max_iter,
    }


# ---------------------------------------------------------------------------
# discrete norms


def _restrict(vals: np.ndarray, x_fine: np.ndarray, x_coarse: np.ndarray):
    """Nodal values on the common coarse grid (exact on nested grids)."""
    n_fine = len(x_fine) - 1
    n_coarse = len(x_coarse) - 1
    if n_fine % n_coarse == 0:
        return np.asarray(vals)[:: n_fine // n_coarse]
    return np.interp(x_coarse, x_fine, vals)


def w12_discrete(xc: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Discrete W^{1,2} distance of two nodal fields on one grid: trapezoid
    rule on values plus the P1 difference-quotient derivative term."""
    dx = np.diff(xc)
    dq = (np.diff(a) - np.diff(b)) / dx
    return float(np.sqrt(np.trapezoid((a - b) ** 2, xc) + np.sum(dq**2 * dx)))


def distance_to_line(fieldd: DeformationField, mesh: BeamMesh | None = None) -> float:
    """W^{1,2}(Omega) distance of y to the straight segment x1 e1, with the
    gradient taken in the fixed-domain variables (unscaled)."""
    mesh = mesh or build_mesh(fieldd.config)
    cfg = fieldd.config
    dev = fieldd.displacement.copy()
    dev[:, :, 1] += cfg.h * cfg.section.vertices[:, 0]
    dev[:, :, 2] += cfg.h * cfg.section.vertices[:, 1]
    vals = mesh.interp(dev)
    g = mesh.disp_grad(dev).copy()
    g[..., 1] *= cfg.h
    g[..., 2] *= cfg.h
    val2 = np.einsum("etqi,etqi,t->", vals, vals, mesh.qw)
    grad2 = np.einsum("etqij,etqij,t->", g, g, mesh.qw)
    return float(np.sqrt(val2 + grad2))


def transport_state(observables: dict, length: float, alpha: float) -> RodState:
    """Rod-variable view of extracted observables, for ansatz warm starts.

    Slopes are recovered by second-order difference quotients; the result is
    only used as an initial guess.
    """
    x = np.asarray(observables["x"], dtype=float)
    v2 = np.asarray(observables["v2"], dtype=float)
    v3 = np.asarray(observables["v3"], dtype=float)
    return RodState(
        length=length,
        v2=v2,
        v2p=np.gradient(v2, x),
        v3=v3,
        v3p=np.gradient(v3, x),
        w=np.asarray(observables["w"], dtype=float),
        u=np.asarray(observables["u"], dtype=float),
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# the ladder itself


def run_ladder(spec: LadderSpec, keep_fields: bool = True,
               progress=None) -> ConvergenceReport:
    """Solve the limit model once, then every rung of the ladder.

    A rung whose 3D minimization fails to converge is marked failed and the
    remaining rungs still run.  The smallest thickness warm-starts from the
    previous rung's solution transported through the recovery ansatz.
    """
    tensor = ElasticTensor(spec.moduli.mu, spec.moduli.lam)
    stiffness = q1_matrix(spec.section, tensor)
    reference = solve_equilibrium(stiffness, spec.loads, spec.alpha,
                                  spec.length, spec.rod_elements)
    res1d = el_residuals(reference, stiffness, spec.loads, spec.alpha)
    worst = max(res1d.values())
    if worst > _REFERENCE_RESIDUAL_TOL:
        raise NumericalError(
            f"limit-model reference residual {worst:.3e} exceeds "
            f"{_REFERENCE_RESIDUAL_TOL:.0e}")

    if spec.n_rungs:
        coarse_x = spec.rung_config(0).axial_nodes()
    else:
        coarse_x = np.linspace(0.0, spec.length, 2)
    ref_coarse = {
        "u": reference.eval_u(coarse_x),
        "v2": reference.eval_v2(coarse_x),
        "v3": reference.eval_v3(coarse_x),
        "w": reference.eval_w(coarse_x),
    }

    rungs = []
    prev_obs = None
    for i in range(spec.n_rungs):
        config = spec.rung_config(i)
        record = RungRecord(
            h=spec.h_values[i],
            n_axial=spec.n_axial[i],
            config_hash=sha256_of(canonical_json(rung_config_dict(spec, i))),
        )
        init = None
        if i == spec.n_rungs - 1 and prev_obs is not None:
            init = make_ansatz(config, transport_state(
                prev_obs, spec.length, spec.alpha))
            record.warm_started = True
        if progress is not None:
            progress(f"rung {i}: h={config.h:g} n_axial={config.n_axial}")
        mesh = build_mesh(config)
        try:
            result = minimize(config, init=init, mesh=mesh)
        except ConvergenceError as exc:
            record.status = "failed"
            record.message = str(exc)
            rungs.append(record)
            continue

        obs = extract_observables(result.field)
        x = config.axial_nodes()
        errors = {}
        for name in ("u", "v2", "v3", "w"):
            restricted = _restrict(obs[name], x, coarse_x)
            errors["err_" + name] = w12_discrete(
                coarse_x, restricted, ref_coarse[name])
        rot = fit_rotations(result.field, mesh)
        mom = strain_stress_moments(result.field, mesh, rot["R"])
        ha = config.length / config.n_axial
        mean_l2 = float(np.sqrt(ha * np.sum(mom["mean"] ** 2)))
        scale = config.h ** (2.0 * config.alpha - 2.0)
        record.errors = errors
        record.diagnostics = {
            "int_w_scaled": result.internal_energy / scale,
            "rot_dist_l2": rot["dist_l2"],
            "rot_deriv_l2": rot["deriv_l2"],
            "rot_dist_id_max": rot["dist_id_max"],
            "mean_stress_l2": mean_l2,
            "y_dist_w12": distance_to_line(result.field, mesh),
            "energy": result.energy,
            "internal_energy": result.internal_energy,
            "grad_norm": result.grad_norm,
            "iterations": result.iterations,
        }
        record.observables = obs
        if keep_fields:
            record.field3d = result.field
        rungs.append(record)
        prev_obs = obs

    return ConvergenceReport(
        spec=spec,
        reference=reference,
        reference_residuals=res1d,
        stiffness=stiffness,
        coarse_x=coarse_x,
        rungs=rungs,
    )


# ---------------------------------------------------------------------------
# rate estimation


def fit_rate(h_values, errors) -> dict:
    """Least-squares log-log slope of errors vs h, with standard error.

    The monotone flag records whether the sequence decreases along the
    ladder (h given largest first).  A sequence with nonpositive entries has
    no log-log fit and is reported as degenerate.
    """
    hs = np.asarray(h_values, dtype=float)
    es = np.asarray(errors, dtype=float)
    if hs.shape != es.shape or hs.ndim != 1 or len(hs) < 3:
        raise InsufficientDataError(
            f"need at least 3 rungs to fit a rate, got {len(hs)}")
    monotone = bool(np.all(np.diff(es) < 0.0))
    if np.any(es <= 0.0) or not np.all(np.isfinite(es)):
        return {"slope": None, "stderr": None, "monotone": monotone,
                "degenerate": True}
    X = np.stack([np.log(hs), np.ones_like(hs)], axis=1)
    y = np.log(es)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = len(hs) - 2
    cov00 = float(np.linalg.inv(X.T @ X)[0, 0])
    stderr = float(np.sqrt(max(resid @ resid, 0.0) / dof * cov00)) if dof else None
    return {"slope": float(beta[0]), "stderr": stderr, "monotone": monotone,
            "degenerate": False}


def estimate_rates(report: ConvergenceReport) -> dict:
    """Fitted log-log exponents for every error and diagnostic sequence."""
    ok = report.ok_rungs()
    if len(ok) < 3:
        raise InsufficientDataError(
            f"need at least 3 successful rungs, got {len(ok)}")
    hs = [r.h for r in ok]
    out = {}
    for name in RATE_COLUMNS:
        values = [r.errors.get(name, r.diagnostics.get(name)) for r in ok]
        out[name] = fit_rate(hs, values)
    return out


# ---------------------------------------------------------------------------
# report artifacts


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _rung_row(record: RungRecord) -> str:
    merged = dict(record.errors)
    merged.update(record.diagnostics)
    cells = [_cell(record.h), _cell(record.n_axial), record.status]
    for name in _CSV_COLUMNS[3:-1]:
        value = merged.get(name, float("nan"))
        cells.append(_cell(value))
    cells.append(record.config_hash)
    return ",".join(cells)


def emit_report(report: ConvergenceReport, out_dir) -> list:
    """Write ladder.csv, rates.json and the log-log SVG plots.

    Output bytes depend only on the report contents.  An empty ladder writes
    a header-only csv, no plots, and a warning to stderr.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    lines = [",".join(_CSV_COLUMNS)]
    lines.extend(_rung_row(r) for r in report.rungs)
    csv_path = out / "ladder.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    written.append(csv_path)

    try:
        rates = estimate_rates(report)
        rates_doc = {"schema_version": 1, "tool_version": __version__,
                     "n_ok_rungs": len(report.ok_rungs()), "rates": rates}
    except InsufficientDataError as exc:
        rates_doc = {"schema_version": 1, "tool_version": __version__,
                     "n_ok_rungs": len(report.ok_rungs()), "rates": None,
                     "reason": str(exc)}
    rates_path = out / "rates.json"
    rates_path.write_text(
        json.dumps(rates_doc, sort_keys=True, indent=2) + "\n", encoding="ascii")
    written.append(rates_path)

    ok = report.ok_rungs()
    if not report.rungs:
        print("warning: empty ladder, nothing to plot", file=sys.stderr)
        return written
    if ok:
        hs = [r.h for r in ok]
        for name in RATE_COLUMNS:
            values = [r.errors.get(name, r.diagnostics.get(name)) for r in ok]
            path = out / f"{name}.svg"
            plotsvg.write_loglog(path, f"{name} vs h", "h", name,
                                 [(name, hs, values)])
            written.append(path)
    return written
