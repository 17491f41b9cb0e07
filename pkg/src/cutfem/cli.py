"""Command-line front end: one subcommand per scenario, CSV/VTK/JSON artifacts.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 geometry or coverage error, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import OPTIONS, ConfigError, RunConfig, load_config, parse_list, parse_number, validate
from .forms import l2_error
from .geometry import GeometryError, rectangle, rep_from_config, ring
from .io import nodal_von_mises, write_csv, write_field_vtk, write_json, write_vtk
from .linalg import SolverError, backend_name, generalized_eigs, rigid_body_basis, solve_free, solve_spd
from .mesh import CoverageError, Family
from .quadrature import TENSOR, TOTAL, cut_cell_rule
from .scenarios import common, compound, conditioning, dynamics, manufactured, reinforcement, thin

log = logging.getLogger("cutfem")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_SOLVER, EXIT_GEOMETRY = 0, 1, 2, 3, 4


class RunFailed(Exception):
    """A run failed after some rows were produced."""

    def __init__(self, exc, rows):
        super().__init__(str(exc))
        self.exc = exc
        self.rows = rows


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _rep(cfg: RunConfig, default):
    return rep_from_config(cfg.geometry) if cfg.geometry else default


def _load(cfg: RunConfig, default="gravity"):
    spec = cfg.options.get("load", default)
    mat = cfg.material_params
    if spec == "gravity":
        return common.gravity(mat)
    if spec in (None, "none"):
        return None
    v = [parse_number(x) for x in spec]
    if len(v) != 2:
        raise ConfigError("load must be 'gravity', 'none' or a 2-vector")
    return np.array(v)


def _vtk_name(*parts):
    return "_".join(str(p).replace(".", "p").replace("/", "-") for p in parts) + ".vtk"


# ---------------------------------------------------------------- runners
# Each runner returns (rows, extra_meta) and raises on failure.


def _static_one(args):
    cfg, rep, h, p, theta, out = args
    mat = cfg.material_params
    pr = common.build_problem(rep, cfg.family, h, p, mat, cfg.stab_params(p), theta=theta, f=_load(cfg))
    s = pr.system
    if s.free:
        u = solve_free(s.A, s.M_stab, rigid_body_basis(pr.space, s.M_stab), s.L)
    else:
        u = solve_spd(s.A, s.L)
    vm = nodal_von_mises(pr.space, u, mat)
    if cfg.vtk:
        write_field_vtk(out / _vtk_name("static", f"h{h:.6g}", f"p{p}", f"t{theta:.6g}"), pr.space, u, mat)
    return {"h": pr.space.h, "p": p, "family": cfg.family, "theta": theta, "n_dofs": pr.space.n_dofs,
            "compliance": float(s.L @ u), "energy": float(u @ (s.a @ u)), "max_von_mises": float(vm.max())}


def run_static(cfg: RunConfig, out: Path):
    rep = _rep(cfg, rectangle(0, 0, 1, 1, dirichlet=("bottom",)))
    items = [(cfg, rep, h, p, t, out) for h in (cfg.h or [0.1]) for p in (cfg.p or [2]) for t in cfg.theta]
    return _map(_static_one, items, cfg.jobs), {}


def run_freq(cfg: RunConfig, out: Path):
    from .geometry import beam_with_holes

    rep = _rep(cfg, beam_with_holes())
    h, p = (cfg.h or [0.05])[0], (cfg.p or [2])[0]
    mat = cfg.material_params
    pr = common.build_problem(rep, cfg.family, h, p, mat, cfg.stab_params(p), theta=cfg.theta[0], f=_load(cfg))
    meta = {}
    if "omegas" in cfg.options:
        omegas = parse_list(cfg.options["omegas"])
    else:
        wmax = cfg.options.get("omega_max")
        if wmax is None:
            w3 = dynamics.clamped_eigenfrequencies(pr, 3)
            meta["eigenfrequencies"] = w3.tolist()
            wmax = 1.2 * w3[-1]
        omegas = np.linspace(0.0, parse_number(wmax), int(cfg.options.get("n_omega", 200)))
    recs = dynamics.frequency_sweep(omegas, pr)
    rows = [r.row() for r in recs]
    meta["peaks"] = dynamics.sweep_peaks(recs).tolist()
    if any(r.status != "ok" for r in recs):
        raise RunFailed(SolverError("sweep contains near-resonant points"), rows)
    return rows, meta


def run_eig(cfg: RunConfig, out: Path):
    rep = _rep(cfg, rectangle(0, 0, 3, 0.3, dirichlet=()))
    k = int(cfg.options.get("k", 6))
    mat = cfg.material_params
    rows, meta = [], {}
    for h in cfg.h or [0.3 / 8]:
        for p in cfg.p or [2]:
            pr = common.build_problem(rep, cfg.family, h, p, mat, cfg.stab_params(p), theta=cfg.theta[0])
            s = pr.system
            R = rigid_body_basis(pr.space, s.M_stab) if s.free else None
            res = generalized_eigs(s.A, s.M_stab, k=k, deflation=R)
            if R is not None:
                rq = np.einsum("ij,ij->j", R, s.A @ R) / np.einsum("ij,ij->j", R, s.M_stab @ R)
                for i, v in enumerate(rq):
                    rows.append({"h": pr.space.h, "p": p, "kind": "rigid", "index": i + 1, "eigenvalue": v,
                                 "residual": float("nan")})
            for i, (v, r) in enumerate(zip(res.values, res.residuals)):
                rows.append({"h": pr.space.h, "p": p, "kind": "flexible" if R is not None else "mode",
                             "index": i + 1, "eigenvalue": v, "residual": r})
                if cfg.vtk:
                    write_field_vtk(out / _vtk_name("mode", i + 1, f"h{h:.6g}", f"p{p}"), pr.space,
                                    res.vectors[:, i], mat, title=f"mode {i + 1} lambda={v:.10g}")
            if "index" in cfg.options and R is not None:
                idx = int(cfg.options["index"])
                ref = parse_number(cfg.options.get("lam_ref", dynamics.LAMBDA_REF_FREE_BEAM))
                a = res.values[idx - 4] if 3 < idx <= k + 3 else float("nan")
                b = res.values[idx - 1] if idx <= k else float("nan")
                meta[f"h={h:.6g},p={p}"] = {"counting_rigid": a, "flexible_only": b,
                                            "rel_err_counting_rigid": abs(a - ref) / ref,
                                            "rel_err_flexible_only": abs(b - ref) / ref}
    return rows, meta


def run_two_grid(cfg: RunConfig, out: Path):
    rep = _rep(cfg, ring(0.8, 1.0, segments=100))
    H = parse_number(cfg.options.get("H", 0.1))
    rows = []
    for h in cfg.h or [H / 3]:
        for p in cfg.p or [2]:
            r = dynamics.two_grid_eigen(rep, H, h, int(cfg.options.get("mode", 7)), p, cfg.family,
                                        cfg.material_params, cfg.theta[0], bool(cfg.options.get("direct", True)),
                                        bool(cfg.options.get("literal_ratio", False)), cfg.stab_params(p))
            rows.append(r.row())
    return rows, {}


def _cond_one(args):
    cfg, p, h, variant, delta, theta = args
    rep = _rep(cfg, conditioning.unit_square())
    return conditioning.condition_row(p, h, variant, delta, theta, cfg.family, cfg.material_params, rep).row()


def run_cond_table(cfg: RunConfig, out: Path):
    variant = conditioning.MeshVariant(cfg.options.get("variant", "fitted"))
    delta = parse_number(cfg.options.get("delta", 1e-3))
    theta = cfg.theta[0] if variant is not conditioning.MeshVariant.ROTATED or cfg.theta != [0.0] else math.pi / 9
    if cfg.options.get("scaling"):
        variant = conditioning.MeshVariant.ROTATED
        theta = cfg.theta[0] if cfg.theta != [0.0] else math.pi / 9
    hs = cfg.h or ([0.2, 0.1, 0.05, 0.025] if cfg.options.get("scaling") else [0.1])
    ps = cfg.p or [1, 2, 3, 4, 5]
    items = [(cfg, p, h, variant.value, delta, theta) for p in ps for h in hs]
    rows = _map(_cond_one, items, cfg.jobs)
    meta = {}
    if len(hs) >= 2:
        for p in ps:
            sub = [r for r in rows if r["p"] == p]
            meta[f"p={p}"] = {k: common.loglog_fit([r["h"] for r in sub], [r[k] for r in sub])
                              for k in ("A_stab_precond", "M_stab_precond")}
    return rows, meta


def _converge_one(args):
    cfg, p, theta, out = args
    recs, fit = manufactured.converge(cfg.h or [1 / 8, 1 / 16, 1 / 32], p, cfg.family, theta,
                                      cfg.options.get("variant", "uniform"), cfg.material_params)
    rows = []
    for r in recs:
        d = r.row()
        d["fit_rate"], d["fit_residual"] = fit
        rows.append(d)
    return rows


def run_converge(cfg: RunConfig, out: Path):
    if cfg.options.get("scenario", "manufactured") != "manufactured":
        raise ConfigError(f"unknown convergence scenario {cfg.options['scenario']!r}")
    manufactured.check_body_force()
    items = [(cfg, p, t, out) for p in (cfg.p or [1, 2]) for t in cfg.theta]
    rows = [r for group in _map(_converge_one, items, cfg.jobs) for r in group]
    return rows, {}


def _thin_one(args):
    cfg, kind, p, h, out = args
    kw = {"family": cfg.family, "material": cfg.material_params}
    if kind == "ring_centrifugal" and "omega" in cfg.options:
        kw["omega"] = parse_number(cfg.options["omega"])
    pr, u, res = thin.thin_geometry_demo(kind, p, h, **kw)
    if cfg.vtk:
        write_field_vtk(out / _vtk_name(kind, f"p{p}"), pr.space, u, cfg.material_params)
    return res.row()


def run_thin(cfg: RunConfig, out: Path):
    kind = cfg.options.get("kind", "cantilever")
    items = [(cfg, kind, p, h, out) for p in (cfg.p or [1, 2, 3]) for h in (cfg.h or [None])]
    return _map(_thin_one, items, cfg.jobs), {}


def run_fibre(cfg: RunConfig, out: Path):
    h, p = (cfg.h or [1 / 16])[0], (cfg.p or [2])[0]
    names = parse_list(cfg.options.get("configs", "bulk,trusses,beam"), str)
    pr = reinforcement.bulk_problem(h, p, cfg.family, cfg.theta[0])
    rows = []
    for name in names:
        if name not in reinforcement.CONFIGS:
            raise ConfigError(f"unknown fibre configuration {name!r}")
        fibres = reinforcement.CONFIGS[name]()
        rec, u, _, _ = reinforcement.solve_config(pr, fibres, fibre_load=bool(cfg.options.get("fibre_load")),
                                                  name=name)
        rows.append(rec.row())
        if cfg.vtk:
            write_field_vtk(out / _vtk_name("fibre", name.replace("+", "_")), pr.space, u, reinforcement.BULK,
                            polylines=[np.array([f.a, f.b]) for f in fibres])
    meta = {}
    if "betas" in cfg.options:
        meta["beta_sensitivity"] = reinforcement.beta_sensitivity(parse_list(cfg.options["betas"]), h, p)
    return rows, meta


def run_compound(cfg: RunConfig, out: Path):
    kind = cfg.options.get("kind", "drilled-lshape")
    weighted = bool(cfg.options.get("weighted", True))
    p = (cfg.p or [2])[0]
    gamma = cfg.options.get("gamma_d")
    if kind == "halves":
        h = (cfg.h or [1 / 16])[0]
        th = (cfg.theta + [0.0])[:2]
        r = compound.manufactured_halves(h, p, tuple(th), cfg.family, cfg.material_params, weighted,
                                         None if gamma is None else parse_number(gamma))
        return [{"h": h, "p": p, **r}], {}
    if kind != "drilled-lshape":
        raise ConfigError(f"unknown compound demo {kind!r}")
    h = (cfg.h or [0.1])[0]
    bodies, res, vm = compound.drilled_lshape_demo(h, p, parse_number(cfg.options.get("ratio", 10.0)),
                                                   int(cfg.options.get("ring_refine", 2)),
                                                   material=cfg.material_params, weighted=weighted)
    rows = []
    names = ["lower", "upper", "ring"]
    for k, ((i, j), jump, (vj, vp)) in enumerate(zip(res.interfaces, res.jumps, vm)):
        rows.append({"interface": f"{names[i]}-{names[j]}", "jump_l2": jump, "jump_rel": jump / res.total_norm,
                     "von_mises_jump": vj, "von_mises_peak": vp})
    if cfg.vtk:
        for name, b, pr, u in zip(names, bodies, res.problems, res.u):
            write_field_vtk(out / _vtk_name("compound", name), pr.space, u, b.material)
    return rows, {"body_norms": res.norms}


def run_dump_quadrature(cfg: RunConfig, out: Path):
    rep = _rep(cfg, ring(0.8, 1.0, segments=50))
    h, p = (cfg.h or [0.1])[0], (cfg.p or [2])[0]
    pr = common.build_space(rep, cfg.family, h, p, cfg.theta[0])
    mode = TENSOR if Family(cfg.family) is Family.QUAD else TOTAL
    wanted = set(parse_list(cfg.options["elements"], int)) if "elements" in cfg.options else None
    pts, rows = [], []
    for e, reg in sorted(pr.mesh.regions.items()):
        if wanted is not None and e not in wanted:
            continue
        li = pr.mesh.local_index[e]
        if not pr.mesh.is_cut[li]:
            continue
        rule = cut_cell_rule(reg, 2 * p, mode)
        for (x, y), w in zip(rule.points, rule.weights):
            pts.append({"element": e, "x": x, "y": y, "weight": w, "sign": "+" if w >= 0 else "-"})
        rows.append({"element": e, "n_points": len(rule.weights), "weight_sum": float(rule.weights.sum()),
                     "area": reg.area, "abs_error": abs(float(rule.weights.sum()) - reg.area)})
    write_csv(out / "quadrature.csv", pts, ["element", "x", "y", "weight", "sign"])
    return rows, {}


RUNNERS = {
    "run-static": run_static,
    "run-freq": run_freq,
    "run-eig": run_eig,
    "two-grid": run_two_grid,
    "cond-table": run_cond_table,
    "converge": run_converge,
    "thin-demo": run_thin,
    "fibre-demo": run_fibre,
    "compound-demo": run_compound,
    "dump-quadrature": run_dump_quadrature,
}


# ---------------------------------------------------------------- argument parsing

_FLAG_OPTIONS = {
    # option key: (flag, kwargs)
    "load": ("--load", {}),
    "omega_max": ("--omega-max", {}),
    "n_omega": ("--n-omega", {"type": int}),
    "omegas": ("--omegas", {}),
    "k": ("--k", {"type": int}),
    "index": ("--index", {"type": int}),
    "lam_ref": ("--lam-ref", {}),
    "H": ("--H", {}),
    "mode": ("--mode", {"type": int}),
    "literal_ratio": ("--literal-ratio", {"action": "store_true", "default": None}),
    "direct": ("--no-direct", {"action": "store_false", "default": None}),
    "variant": ("--variant", {}),
    "delta": ("--delta", {}),
    "scaling": ("--scaling", {"action": "store_true", "default": None}),
    "scenario": ("--scenario", {}),
    "kind": ("--kind", {}),
    "omega": ("--omega", {}),
    "configs": ("--configs", {}),
    "fibre_load": ("--fibre-load", {"action": "store_true", "default": None}),
    "betas": ("--betas", {}),
    "ratio": ("--ratio", {}),
    "ring_refine": ("--ring-refine", {"type": int}),
    "weighted": ("--plain-penalty", {"action": "store_false", "default": None}),
    "gamma_d": ("--gamma-d", {}),
    "elements": ("--elements", {}),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cutfem", description="CutFEM linear elasticity scenarios")
    ap.add_argument("--version", action="version", version=f"cutfem {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a JSON configuration file")
    r.add_argument("config")
    r.add_argument("-o", "--output")
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="JSON configuration; flags override its values")
        sp.add_argument("-o", "--output")
        sp.add_argument("--family", choices=["quad", "tri"])
        sp.add_argument("--h", help="mesh sizes, e.g. 1/8,1/16")
        sp.add_argument("--p", help="orders, e.g. 1,2 or 1..5")
        sp.add_argument("--theta", help="grid rotations, e.g. 0,pi/7")
        sp.add_argument("--E")
        sp.add_argument("--nu")
        sp.add_argument("--rho")
        sp.add_argument("--geometry", help="geometry as JSON, e.g. '{\"kind\": \"ring\"}'")
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--no-vtk", dest="vtk", action="store_false", default=None)
        for key in sorted(opts):
            flag, kw = _FLAG_OPTIONS[key]
            sp.add_argument(flag, dest=f"opt_{key}", **kw)
    return ap


def config_from_args(ns) -> RunConfig:
    if ns.command == "run":
        cfg = load_config(ns.config)
        if ns.output:
            cfg.output = ns.output
        return cfg
    raw, text, source = {}, None, None
    if ns.config:
        text = Path(ns.config).read_text()
        source = ns.config
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc.msg}", exc.lineno, source) from None
        if raw.get("command", ns.command) != ns.command:
            raise ConfigError(f"config is for {raw.get('command')!r}, not {ns.command!r}", None, source)
    raw["command"] = ns.command
    for k in ("output", "family", "h", "p", "theta", "jobs", "vtk"):
        v = getattr(ns, k)
        if v is not None:
            raw[k] = v
    mat = dict(raw.get("material", {}))
    for k in ("E", "nu", "rho"):
        if getattr(ns, k) is not None:
            mat[k] = getattr(ns, k)
    if mat:
        raw["material"] = mat
    if ns.geometry:
        try:
            raw["geometry"] = json.loads(ns.geometry)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--geometry is not valid JSON: {exc.msg}") from None
    for key in OPTIONS[ns.command]:
        v = getattr(ns, f"opt_{key}", None)
        if v is not None:
            raw[key] = v
    return validate(raw, text, source)


def execute(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"version": __version__, "backend": backend_name(), "config": cfg.echo(), "status": "running"}
    write_json(out / "meta.json", meta)
    t0 = time.perf_counter()
    code, rows, extra = EXIT_OK, [], {}
    try:
        rows, extra = RUNNERS[cfg.command](cfg, out)
        meta["status"] = "ok"
    except RunFailed as exc:
        rows = exc.rows
        code, meta["status"], meta["error"] = _classify(exc.exc), "failed", str(exc.exc)
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        code, meta["status"], meta["error"] = _classify(exc), "failed", f"{type(exc).__name__}: {exc}"
        if code == EXIT_OTHER:
            log.exception("run failed")
    if rows:
        write_csv(out / "summary.csv", rows)
    meta["results"] = extra
    meta["elapsed_s"] = time.perf_counter() - t0
    write_json(out / "meta.json", meta)
    if code:
        print(f"cutfem {cfg.command}: {meta['error']}", file=sys.stderr)
    return code


def _classify(exc) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, (GeometryError, CoverageError)):
        return EXIT_GEOMETRY
    return EXIT_OTHER


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
    except ConfigError as exc:
        print(f"cutfem: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cutfem: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
