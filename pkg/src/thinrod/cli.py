"""Command-line entry point: configuration, runs, artifact persistence.

Subcommands mirror the pipeline stages: material check, section info,
cell solve, rod solve, beam3d minimize, converge run, report plot.  Every
file-producing run writes a manifest (tool version plus config hash) and a
config snapshot next to its outputs.  Reruns of the same configuration
produce byte-identical artifacts; --threads above 1 falls back to the same
sequential deterministic path (element loops are vectorized, not threaded).

Exit codes: 0 success, 1 validation or input problem, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, plotsvg
from .beam import (
    BeamConfig,
    DeformationField,
    build_mesh,
    extract_observables,
    fit_rotations,
    minimize,
    outer_variations,
    save_deformation,
    strain_stress_moments,
    total_energy,
)
from .cell import ReducedStiffness, q1_matrix
from .errors import ConfigError, InputError, NumericalError
from .ladder import (
    RATE_COLUMNS,
    LadderSpec,
    canonical_json,
    emit_report,
    run_ladder,
    sha256_of,
)
from .material import ElasticTensor, IsotropicModuli, make_energy, probe_hypotheses
from .rod import RodLoads, el_residuals, solve_equilibrium
from .section import CrossSection, disc, moments, normalize, rectangle, square

_PROBE_TOL = 1e-8

_TOP_KEYS = {"schema_version", "seed", "material", "section", "loads", "run"}
_BLOCK_KEYS = {
    "material": {"family", "mu", "lambda"},
    "section": {"kind", "rings", "n", "width", "height", "nx", "ny", "path",
                "normalize"},
    "loads": {"f2", "f3"},
}
_RUN_KEYS = {"alpha", "h", "length", "n_axial", "tol", "max_iter"}
_LADDER_RUN_KEYS = {"alpha", "h_values", "length", "n_axial", "tol",
                    "max_iter", "rod_elements"}


# ---------------------------------------------------------------------------
# configuration files


def read_config(path) -> dict:
    path = Path(path)
    if path.suffix == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    if path.suffix == ".json":
        with open(path) as fh:
            return json.load(fh)
    raise ConfigError(f"config must be .toml or .json, got {path.name!r}")


def validate_config(doc: dict, run_keys: set, label: str) -> None:
    """Schema gate: version pin and rejection of unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{label}: top level must be a table")
    version = doc.get("schema_version")
    if version != 1:
        raise ConfigError(
            f"{label}: unsupported schema_version {version!r}; expected 1")
    unknown = sorted(set(doc) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"{label}: unknown keys {unknown}")
    blocks = dict(_BLOCK_KEYS)
    blocks["run"] = run_keys
    for name, allowed in blocks.items():
        block = doc.get(name, {})
        if not isinstance(block, dict):
            raise ConfigError(f"{label}: [{name}] must be a table")
        bad = sorted(set(block) - allowed)
        if bad:
            raise ConfigError(f"{label}: unknown keys in [{name}]: {bad}")


def build_section(block: dict) -> CrossSection:
    kind = block.get("kind")
    if kind == "disc":
        return disc(int(block.get("rings", 3)))
    if kind == "square":
        return square(int(block.get("n", 8)))
    if kind == "rectangle":
        return rectangle(float(block["width"]), float(block["height"]),
                         int(block.get("nx", 8)), int(block.get("ny", 8)))
    if kind == "mesh":
        if "path" not in block:
            raise ConfigError("[section] kind 'mesh' requires a 'path'")
        section = CrossSection.from_json(block["path"])
        if block.get("normalize", False):
            section, _ = normalize(section)
        return section
    raise ConfigError(f"unknown [section] kind {kind!r}")


def build_moduli(block: dict) -> IsotropicModuli:
    try:
        return IsotropicModuli(float(block["mu"]), float(block["lambda"]))
    except KeyError as exc:
        raise ConfigError(f"[material] missing key {exc}") from None


def build_loads(block: dict) -> RodLoads:
    return RodLoads(f2=block.get("f2", 0.0), f3=block.get("f3", 0.0))


def build_beam_config(doc: dict) -> BeamConfig:
    run = doc.get("run", {})
    material = doc.get("material", {})
    try:
        return BeamConfig(
            energy=make_energy(material.get("family", "svk_logdet"),
                               build_moduli(material)),
            section=build_section(doc.get("section", {})),
            h=float(run["h"]),
            alpha=float(run["alpha"]),
            length=float(run["length"]),
            n_axial=int(run["n_axial"]),
            loads=build_loads(doc.get("loads", {})),
            tol=float(run.get("tol", 1e-9)),
            max_iter=int(run.get("max_iter", 500)),
        )
    except KeyError as exc:
        raise ConfigError(f"[run] missing key {exc}") from None


def build_ladder_spec(doc: dict) -> LadderSpec:
    run = doc.get("run", {})
    material = doc.get("material", {})
    try:
        return LadderSpec(
            section=build_section(doc.get("section", {})),
            moduli=build_moduli(material),
            loads=build_loads(doc.get("loads", {})),
            alpha=float(run["alpha"]),
            length=float(run["length"]),
            h_values=tuple(float(v) for v in run["h_values"]),
            n_axial=tuple(int(v) for v in run["n_axial"]),
            energy_family=material.get("family", "svk_logdet"),
            rod_elements=int(run.get("rod_elements", 64)),
            tol=float(run.get("tol", 1e-9)),
            max_iter=int(run.get("max_iter", 500)),
        )
    except KeyError as exc:
        raise ConfigError(f"[run] missing key {exc}") from None


# ---------------------------------------------------------------------------
# artifact helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="ascii")


def _write_manifest(out: Path, command: str, config_doc: dict,
                    threads: int) -> None:
    _write_json(out / "manifest.json", {
        "schema_version": 1,
        "tool_version": __version__,
        "command": command,
        "config_sha256": sha256_of(canonical_json(_jsonable(config_doc))),
        "threads": threads,
    })


def _snapshot_config(out: Path, source, doc: dict) -> None:
    """Byte-copy the config file when one exists, else freeze the args."""
    if source is not None:
        src = Path(source)
        shutil.copyfile(src, out / ("config_snapshot" + src.suffix))
    else:
        _write_json(out / "config_snapshot.json", doc)


def _prepare_out(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _csv_row(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def write_beam_artifacts(fieldd: DeformationField, out: Path,
                         stationarity_extras: dict | None = None) -> None:
    """deformation.bin, observables.csv and diagnostics.json for one field."""
    cfg = fieldd.config
    mesh = build_mesh(cfg)
    save_deformation(fieldd, str(out / "deformation.bin"))

    obs = extract_observables(fieldd)
    lines = ["x1,u_h,v2_h,v3_h,w_h"]
    lines.extend(
        _csv_row((obs["x"][k], obs["u"][k], obs["v2"][k], obs["v3"][k],
                  obs["w"][k]))
        for k in range(len(obs["x"])))
    (out / "observables.csv").write_text("\n".join(lines) + "\n",
                                         encoding="ascii")

    value, grad, parts = total_energy(mesh, fieldd.displacement)
    rot = fit_rotations(fieldd, mesh)
    mom = strain_stress_moments(fieldd, mesh, rot["R"])
    ha = cfg.length / cfg.n_axial
    scale = cfg.h ** (2.0 * cfg.alpha - 2.0)
    stationarity = {
        "grad_norm": float(np.linalg.norm(grad)),
        "outer_variations": outer_variations(fieldd, mesh),
    }
    stationarity.update(stationarity_extras or {})
    _write_json(out / "diagnostics.json", {
        "schema_version": 1,
        "energy": {"total": value, "internal": parts["internal"],
                   "load": parts["load"]},
        "scaling_ratio": parts["internal"] / scale,
        "rotation": {"dist_l2": rot["dist_l2"], "deriv_l2": rot["deriv_l2"],
                     "dist_id_max": rot["dist_id_max"]},
        "moments": {
            "mean_l2": float(np.sqrt(ha * np.sum(mom["mean"] ** 2))),
            "tilde_l2": float(np.sqrt(ha * np.sum(mom["tilde"] ** 2))),
            "hat_l2": float(np.sqrt(ha * np.sum(mom["hat"] ** 2))),
            "symmetry_max": mom["symmetry_max"],
        },
        "stationarity": stationarity,
    })


# ---------------------------------------------------------------------------
# subcommands


def cmd_material_check(args) -> int:
    moduli = IsotropicModuli(args.mu, args.lam)
    energy = make_energy(args.family, moduli)
    records = probe_hypotheses(energy, samples=args.samples, seed=args.seed)
    for record in records:
        print(json.dumps(_jsonable(record), sort_keys=True))
    out = _prepare_out(args)
    doc = {"schema_version": 1,
           "material": {"family": args.family, "mu": args.mu,
                        "lambda": args.lam},
           "seed": args.seed}
    if out is not None:
        _write_json(out / "probes.json", {"schema_version": 1,
                                          "records": records})
        _snapshot_config(out, None, doc)
        _write_manifest(out, "material check", doc, args.threads)
    worst = max(r["max_violation"] for r in records)
    if worst > _PROBE_TOL:
        print(f"numerical failure: hypothesis violation {worst:.3e}",
              file=sys.stderr)
        return 2
    return 0


def cmd_section_info(args) -> int:
    section = CrossSection.from_json(args.mesh)
    m = moments(section)
    header = "area,I2,I3,I23,muS"
    row = _csv_row((m.area, m.I2, m.I3, m.I23, m.muS))
    print(header)
    print(row)
    out = _prepare_out(args)
    if out is not None:
        (out / "section_info.csv").write_text(header + "\n" + row + "\n",
                                              encoding="ascii")
        doc = {"schema_version": 1, "section": {"kind": "mesh",
                                                "path": str(args.mesh)}}
        _snapshot_config(out, None, doc)
        _write_manifest(out, "section info", doc, args.threads)
    return 0


def cmd_cell_solve(args) -> int:
    section = CrossSection.from_json(args.mesh)
    stiffness = q1_matrix(section, ElasticTensor(args.mu, args.lam))
    out = _prepare_out(args) or Path(".")
    stiffness.to_json(str(out / "reduced_stiffness.json"))
    doc = {"schema_version": 1,
           "material": {"mu": args.mu, "lambda": args.lam},
           "section": {"kind": "mesh", "path": str(args.mesh)}}
    _snapshot_config(out, None, doc)
    _write_manifest(out, "cell solve", doc, args.threads)
    return 0


def cmd_rod_solve(args) -> int:
    stiffness = ReducedStiffness.from_json(args.stiffness)
    loads = RodLoads(f2=args.f2, f3=args.f3)
    state = solve_equilibrium(stiffness, loads, args.alpha, args.length,
                              args.nodes - 1)
    out = _prepare_out(args) or Path(".")
    x = state.nodes
    lines = ["x1,u,v2,v2p,v3,v3p,w"]
    lines.extend(
        _csv_row((x[k], state.u[k], state.v2[k], state.v2p[k], state.v3[k],
                  state.v3p[k], state.w[k]))
        for k in range(len(x)))
    (out / "rod_state.csv").write_text("\n".join(lines) + "\n",
                                       encoding="ascii")
    _write_json(out / "residuals.json", {
        "schema_version": 1,
        "solver": state.residuals,
        "equilibrium": el_residuals(state, stiffness, loads, args.alpha),
    })
    doc = {"schema_version": 1,
           "run": {"alpha": args.alpha, "length": args.length,
                   "nodes": args.nodes, "stiffness": str(args.stiffness)},
           "loads": {"f2": args.f2, "f3": args.f3}}
    _snapshot_config(out, None, doc)
    _write_manifest(out, "rod solve", doc, args.threads)
    return 0


def cmd_beam_minimize(args) -> int:
    doc = read_config(args.config)
    validate_config(doc, _RUN_KEYS, args.config)
    config = build_beam_config(doc)
    result = minimize(config)
    out = _prepare_out(args) or Path(".")
    write_beam_artifacts(result.field, out, {
        "iterations": result.iterations,
        "n_evaluations": result.n_evaluations,
        "converged": result.converged,
    })
    _snapshot_config(out, args.config, doc)
    _write_manifest(out, "beam3d minimize", doc, args.threads)
    return 0


def cmd_converge_run(args) -> int:
    doc = read_config(args.spec)
    validate_config(doc, _LADDER_RUN_KEYS, args.spec)
    spec = build_ladder_spec(doc)
    report = run_ladder(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, record in enumerate(report.rungs):
        rung_dir = out / f"rung-{i:02d}"
        rung_dir.mkdir(parents=True, exist_ok=True)
        if record.status == "ok":
            write_beam_artifacts(record.field3d, rung_dir, {
                "iterations": record.diagnostics["iterations"],
                "converged": True,
            })
        else:
            _write_json(rung_dir / "failure.json",
                        {"status": record.status, "message": record.message})
        _write_json(rung_dir / "manifest.json", {
            "schema_version": 1,
            "tool_version": __version__,
            "command": "converge run",
            "config_sha256": record.config_hash,
            "threads": args.threads,
        })
    emit_report(report, out)
    _snapshot_config(out, args.spec, doc)
    _write_manifest(out, "converge run", doc, args.threads)
    failed = [r for r in report.rungs if r.status != "ok"]
    if failed:
        print(f"warning: {len(failed)} rung(s) failed to converge",
              file=sys.stderr)
    return 0


def _read_ladder_csv(path: Path) -> tuple[list, dict]:
    lines = path.read_text(encoding="ascii").strip().splitlines()
    if not lines:
        raise InputError(f"{path}: empty ladder file")
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    ok = [r for r in rows if r.get("status") == "ok"]
    hs = [float(r["h"]) for r in ok]
    series = {}
    for name in RATE_COLUMNS:
        if ok and name in ok[0]:
            series[name] = [float(r[name]) for r in ok]
    return hs, series


def cmd_report_plot(args) -> int:
    path = Path(args.ladder)
    hs, series = _read_ladder_csv(path)
    out = _prepare_out(args) or Path(".")
    if not hs:
        print("warning: no successful rungs, nothing to plot", file=sys.stderr)
        return 0
    for name, values in series.items():
        plotsvg.write_loglog(out / f"{name}.svg", f"{name} vs h", "h", name,
                             [(name, hs, values)])
    doc = {"schema_version": 1, "run": {"ladder": str(args.ladder)}}
    _snapshot_config(out, None, doc)
    _write_manifest(out, "report plot", doc, args.threads)
    return 0


# ---------------------------------------------------------------------------
# parser


def _load_arg(text: str):
    """Plain numbers become floats; preset strings pass through."""
    try:
        return float(text)
    except ValueError:
        return text


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"error: {message}\n")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="element-loop parallelism (default 1; values "
                             "above 1 run the same sequential path)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thinrod", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    groups = parser.add_subparsers(dest="group", required=True,
                                   parser_class=_Parser)
    common = [_common()]

    material = groups.add_parser("material")
    msub = material.add_subparsers(dest="action", required=True,
                                   parser_class=_Parser)
    check = msub.add_parser("check", parents=common)
    check.add_argument("--family", default="svk_logdet")
    check.add_argument("--mu", type=float, required=True)
    check.add_argument("--lambda", dest="lam", type=float, required=True)
    check.add_argument("--samples", type=int, default=1000)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=cmd_material_check)

    section = groups.add_parser("section")
    ssub = section.add_subparsers(dest="action", required=True,
                                  parser_class=_Parser)
    info = ssub.add_parser("info", parents=common)
    info.add_argument("mesh", help="section mesh .json file")
    info.set_defaults(func=cmd_section_info)

    cell = groups.add_parser("cell")
    csub = cell.add_subparsers(dest="action", required=True,
                               parser_class=_Parser)
    solve = csub.add_parser("solve", parents=common)
    solve.add_argument("--mesh", required=True)
    solve.add_argument("--mu", type=float, required=True)
    solve.add_argument("--lambda", dest="lam", type=float, required=True)
    solve.set_defaults(func=cmd_cell_solve)

    rod = groups.add_parser("rod")
    rsub = rod.add_subparsers(dest="action", required=True,
                              parser_class=_Parser)
    rsolve = rsub.add_parser("solve", parents=common)
    rsolve.add_argument("--stiffness", required=True)
    rsolve.add_argument("--alpha", type=float, required=True)
    rsolve.add_argument("--f2", type=_load_arg, default=0.0)
    rsolve.add_argument("--f3", type=_load_arg, default=0.0)
    rsolve.add_argument("--length", type=float, required=True)
    rsolve.add_argument("--nodes", type=int, required=True)
    rsolve.set_defaults(func=cmd_rod_solve)

    beam = groups.add_parser("beam3d")
    bsub = beam.add_subparsers(dest="action", required=True,
                               parser_class=_Parser)
    bmin = bsub.add_parser("minimize", parents=common)
    bmin.add_argument("--config", required=True)
    bmin.set_defaults(func=cmd_beam_minimize)

    conv = groups.add_parser("converge")
    vsub = conv.add_subparsers(dest="action", required=True,
                               parser_class=_Parser)
    crun = vsub.add_parser("run", parents=common)
    crun.add_argument("--spec", required=True)
    crun.set_defaults(func=cmd_converge_run)

    rep = groups.add_parser("report")
    psub = rep.add_subparsers(dest="action", required=True,
                              parser_class=_Parser)
    plot = psub.add_parser("plot", parents=common)
    plot.add_argument("--ladder", required=True)
    plot.set_defaults(func=cmd_report_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is cmd_converge_run and args.out is None:
        print("error: converge run requires --out", file=sys.stderr)
        return 1
    if getattr(args, "threads", 1) > 1:
        print("note: --threads above 1 falls back to the sequential "
              "deterministic path", file=sys.stderr)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
