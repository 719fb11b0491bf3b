"""Command-line experiment runner.

    varicontact <subcommand> --config path.json [--out dir] [--seed N]

Subcommands: ``lemmas``, ``verify-angle``, ``monotonicity``, ``find-constant``,
``density`` and ``fixture dump``.  Exit codes: 0 when every check passes,
2 when checks ran and found violations, 1 on configuration or runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import contact, fixtures, geom, mono, varifold
from .exact import ArcSet, SphereBands

EXIT_OK, EXIT_ERROR, EXIT_VIOLATIONS = 0, 1, 2

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 2, "maxItems": 3}

_fixture_block = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name"],
    "properties": {
        "name": {"enum": ["chord", "diameter", "cap"]},
        "d": _num,
        "theta": _num,
        "level": {"type": "integer", "minimum": 1},
        "discretization": {"enum": ["parametric", "mesh"]},
        "mirror": {"type": "boolean"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["ball", "ellipse"]},
                "center": _vec,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "radii": _vec,
                "kappa_hint": {"type": "number", "exclusiveMinimum": 0},
                "s0_hint": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "fixture": _fixture_block,
        "family": {"type": "array", "items": _fixture_block, "minItems": 1},
        "mesh": {
            "type": "object",
            "additionalProperties": False,
            "required": ["path"],
            "properties": {"path": {"type": "string"},
                           "format": {"enum": ["obj", "polyline"]},
                           "closed": {"type": "boolean"}},
        },
        "contact": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theta": {"type": "number", "minimum": 0, "maximum": math.pi},
                "sigma_override": {"type": "number"},
                "patch": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type", "intervals"],
                    "properties": {
                        "type": {"enum": ["arc", "bands"]},
                        "intervals": {"type": "array", "items": {
                            "type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                        "resolution": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "mono": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p": {"type": "number"},
                "C": {"type": "number", "minimum": 0},
                "rho_grid": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"count": {"type": "integer", "minimum": 2},
                                   "lo_frac": {"type": "number", "exclusiveMinimum": 0},
                                   "values": {"type": "array", "items": _num}},
                },
                "tol": {"type": "number", "minimum": 0},
                "centers": {"type": "array", "items": _vec},
                "random_centers": {"type": "integer", "minimum": 0},
                "density_points": {"type": "integer", "minimum": 4},
                "density_tol": {"type": "number", "exclusiveMinimum": 0},
                "C_max": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "lemmas": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 1},
                           "fd_tol": {"type": "number", "exclusiveMinimum": 0},
                           "max_depth": {"type": "number", "exclusiveMinimum": 0,
                                         "maximum": 1}},
        },
        "residual": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"levels": {"type": "array", "items": {"type": "integer",
                                                                  "minimum": 1},
                                      "minItems": 2},
                           "n_proof": {"type": "integer", "minimum": 0},
                           "min_order": _num,
                           "schedule_factor": {"type": "number", "exclusiveMinimum": 0}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"directory": {"type": "string"},
                           "formats": {"type": "array",
                                       "items": {"enum": ["csv", "json", "svg"]}}},
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


class ConfigError(ValueError):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {loc}: {exc.message}") from exc
    dom = cfg.get("domain", {})
    if "kappa_hint" in dom and "s0_hint" in dom and dom["s0_hint"] > 1.0 / dom["kappa_hint"]:
        raise ConfigError("s0_hint must not exceed 1/kappa_hint")
    if dom.get("type") == "ball" and "radius" not in dom:
        raise ConfigError("ball domain needs a radius")
    if dom.get("type") == "ellipse" and "radii" not in dom:
        raise ConfigError("ellipse domain needs radii")
    if "fixture" in cfg and "family" in cfg:
        raise ConfigError("give either a fixture or a family, not both")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_domain(block: dict) -> geom.Domain:
    if block["type"] == "ball":
        d = len(block.get("center", [0.0, 0.0]))
        return geom.make_ball_domain(block.get("center", [0.0] * d), block["radius"])
    radii = block["radii"]
    return geom.make_ellipse_domain(block.get("center", [0.0] * len(radii)), radii,
                                    block.get("kappa_hint"), block.get("s0_hint"))


def _fixtures(cfg: dict) -> list[fixtures.Fixture]:
    if "family" in cfg:
        return [fixtures.build_fixture(b) for b in cfg["family"]]
    if "fixture" in cfg:
        return [fixtures.build_fixture(cfg["fixture"])]
    if "mesh" in cfg:
        return [_mesh_fixture(cfg)]
    raise ConfigError("config needs a fixture, a family or a mesh")


def _mesh_fixture(cfg: dict) -> fixtures.Fixture:
    """Fixture-like bundle from an external mesh; mean curvature is taken as zero."""
    if "domain" not in cfg:
        raise ConfigError("an external mesh needs a domain block")
    dom = build_domain(cfg["domain"])
    m = cfg["mesh"]
    fmt = m.get("format", "obj" if m["path"].endswith(".obj") else "polyline")
    zero_h = lambda X: np.zeros_like(np.asarray(X, float))
    if fmt == "obj":
        verts, tris = varifold.read_obj(m["path"])
        V = varifold.from_triangulation(verts, tris, h_field=zero_h)
    else:
        pts = varifold.read_polyline_csv(m["path"])
        V = varifold.from_segments(pts, h_field=zero_h, closed=m.get("closed", False))
    ct = cfg.get("contact", {})
    theta = ct.get("theta", math.pi / 2)
    patch = ct.get("patch")
    if patch is None:
        B = varifold.empty_patch(dom.dim)
    else:
        ivs = tuple(tuple(iv) for iv in patch["intervals"])
        if dom.kind != "ball":
            raise ConfigError("analytic patches need a ball domain")
        if patch["type"] == "arc":
            desc = ArcSet(dom.center, dom.radius, ivs)
            B = varifold.BoundaryPatch.from_exact(desc, patch.get("resolution", 256), dom)
        else:
            desc = SphereBands(dom.center, dom.radius, ivs)
            B = varifold.BoundaryPatch.from_exact(desc, int(patch.get("resolution", 32)), dom)
    c = contact.ContactConfig(theta)
    c, eff = contact.apply_mirror_rule(c, B) if patch is not None else (c, B)
    centers = np.asarray(cfg.get("mono", {}).get("centers", []), float).reshape(-1, dom.dim)
    z = np.empty((0, dom.dim))
    return fixtures.Fixture(
        name=Path(m["path"]).stem, dom=dom, V=V, Bplus=eff, cfg=c, contact_points=centers,
        expected_density_limit=np.full(len(centers), np.nan), conormal_points=z,
        conormal_n_V=z, Bplus_raw=B, spacing=float("nan"), level=0,
        params={"kind": "mesh", "path": m["path"]})


def _seed(cfg, args) -> int:
    return args.seed if args.seed is not None else int(cfg.get("seed", 0))


def _out_dir(cfg, args) -> Path:
    d = Path(args.out if args.out is not None else cfg.get("output", {}).get("directory", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _formats(cfg) -> set:
    return set(cfg.get("output", {}).get("formats", ["csv", "json", "svg"]))


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _p_default(n: int) -> float:
    return float(n + 1)


def _grid(cfg, dom) -> np.ndarray:
    g = cfg.get("mono", {}).get("rho_grid", {})
    if "values" in g:
        return np.asarray(g["values"], float)
    return mono.rho_grid(dom.s0, g.get("count", 64), g.get("lo_frac", 1.0 / 600))


def _centers(cfg, f: fixtures.Fixture, rng) -> list[tuple[str, np.ndarray]]:
    mb = cfg.get("mono", {})
    out = [(f"contact{i}", p) for i, p in enumerate(np.asarray(f.contact_points))]
    if "centers" in mb and f.params.get("kind") != "mesh":
        out += [(f"center{i}", np.asarray(p, float)) for i, p in enumerate(mb["centers"])]
    k = mb.get("random_centers", 0)
    if k:
        for i, p in enumerate(contact.random_collar_centers(f.dom, k, rng)):
            out.append((f"random{i}", p))
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def run_lemmas(cfg, args) -> int:
    if "domain" not in cfg:
        raise ConfigError("lemmas needs a domain block")
    dom = build_domain(cfg["domain"])
    lb = cfg.get("lemmas", {})
    rng = np.random.default_rng(_seed(cfg, args))
    n = lb.get("samples", 10_000)
    kw = {"fd_tol": lb["fd_tol"]} if "fd_tol" in lb else {}
    if "max_depth" in lb:
        kw["max_depth"] = lb["max_depth"]
    rpd = geom.check_projection_derivative(dom, n, rng, **kw)
    rrb = geom.check_reflected_ball(dom, n, rng)
    report = {"domain": dom.describe(), "projection_derivative": rpd, "reflected_ball": rrb,
              "seed": _seed(cfg, args)}
    nviol = sum(rpd["violations"].values()) + sum(rrb["violations"].values())
    report["total_violations"] = nviol
    _write(_out_dir(cfg, args) / "lemmas.json", mono.dumps(report))
    print(f"lemmas: {n} samples, {nviol} violations")
    return EXIT_OK if nviol == 0 else EXIT_VIOLATIONS


def run_residual(cfg, args) -> int:
    fs = _fixtures(cfg)
    rb = cfg.get("residual", {})
    levels = rb.get("levels", [512, 1024, 2048])
    min_order = rb.get("min_order", 1.8)
    factor = rb.get("schedule_factor", 10.0)
    override = cfg.get("contact", {}).get("sigma_override")
    out = _out_dir(cfg, args)
    seed = _seed(cfg, args)
    status = EXIT_OK
    summary = []
    for spec in (cfg.get("family") or [cfg.get("fixture")]):
        if spec is None:
            raise ConfigError("verify-angle needs a fixture or family")
        rng = np.random.default_rng(seed)
        base = fixtures.build_fixture({**spec, "level": levels[0]})
        fam = contact.default_family(base.dom, rng, rb.get("n_proof", 5))
        ns = contact.sample_domain(base.dom, 2000, np.random.default_rng(seed + 1))
        norms = {g.field_id: g.c1_norm(ns) for g in fam}
        recs, hs, errs = [], [], []
        for L in levels:
            f = fixtures.build_fixture({**spec, "level": L})
            rep = contact.residual_sweep(f.V, f.dom, f.Bplus, f.cfg, fam, level=L, norms=norms)
            recs += rep.to_list()
            hs.append(f.spacing)
            errs.append(rep.max_normalized)
        orders = contact.observed_orders(hs, errs)
        sched = contact.tolerance_schedule(hs, errs, factor)
        entry = {"fixture": base.name, "levels": levels, "spacing": hs,
                 "max_normalized": errs, "orders": orders.tolist(), "schedule": sched,
                 "passed": bool(errs[-1] < sched and np.all(orders >= min_order))}
        if override is not None:
            f = fixtures.build_fixture({**spec, "level": levels[-1]})
            rep = contact.residual_sweep(f.V, f.dom, f.Bplus, f.cfg, fam, level=levels[-1],
                                         norms=norms, sigma=override)
            recs += [{**r, "sigma_override": override} for r in rep.to_list()]
            entry["override"] = {"sigma": override, "max_normalized": rep.max_normalized,
                                 "ratio_to_schedule": rep.max_normalized / sched}
            entry["passed"] = bool(rep.max_normalized < sched)
        if not entry["passed"]:
            status = EXIT_VIOLATIONS
        summary.append(entry)
        print(f"verify-angle {base.name}: max normalized {errs[-1]:.3e} "
              f"(schedule {sched:.3e}), orders {np.round(orders, 3).tolist()}"
              + (f", sigma={override}: {entry['override']['max_normalized']:.3e}"
                 if override is not None else ""))
    _write(out / "residuals.json", mono.dumps({"records": recs, "summary": summary}))
    return status


def _profiles(cfg, args, fs):
    rng = np.random.default_rng(_seed(cfg, args))
    mb = cfg.get("mono", {})
    items = []
    for f in fs:
        p = mb.get("p", _p_default(f.n))
        gamma = mono.compute_gamma(f.V, f.dom, p) if f.V.curvature is not None else 0.0
        params = mono.MonotoneParams(p, f.n, f.dom.kappa, f.dom.s0, gamma,
                                     mb.get("C", 0.0), f.sigma)
        grid = _grid(cfg, f.dom)
        for tag, a in _centers(cfg, f, rng):
            try:
                pr = mono.profile_I(f.V, f.dom, f.Bplus, f.sigma, a, grid,
                                    label=f"{f.name}_{tag}")
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            items.append((f, tag, pr, params))
    return items


def run_monotonicity(cfg, args) -> int:
    fs = _fixtures(cfg)
    tol = cfg.get("mono", {}).get("tol", 1e-6)
    out = _out_dir(cfg, args)
    fmts = _formats(cfg)
    report = []
    total = 0
    for f, tag, pr, params in _profiles(cfg, args, fs):
        corr = mono.corrected_quantity(pr, params)
        viol = mono.check_monotone(corr, tol)
        total += len(viol)
        stem = pr.label
        if "csv" in fmts:
            mono.write_profile_csv(out / f"{stem}.csv", pr, corr)
        if "svg" in fmts:
            _write(out / f"{stem}.svg", mono.profile_svg(pr, corr, f"{stem} (C = {params.C:g})"))
        report.append({"profile": stem, "center": pr.a, "C": params.C, "p": params.p,
                       "Gamma": params.Gamma, "sigma": params.sigma, "violations": viol})
    if "json" in fmts:
        _write(out / "monotonicity.json", mono.dumps({"profiles": report, "tol": tol,
                                                      "total_violations": total}))
    print(f"monotonicity: {len(report)} profiles, {total} violations")
    return EXIT_OK if total == 0 else EXIT_VIOLATIONS


def run_find_constant(cfg, args) -> int:
    fs = _fixtures(cfg)
    mb = cfg.get("mono", {})
    items = _profiles(cfg, args, fs)
    fit = mono.find_constant([it[2] for it in items], [it[3] for it in items],
                             mb.get("tol", 1e-6), mb.get("C_max", mono.C_MAX))
    res = {**fit.to_dict(), "profiles": len(items)}
    _write(_out_dir(cfg, args) / "constant.json", mono.dumps(res))
    if fit.ok:
        print(f"find-constant: C = {fit.C:.6g} (binding profile {fit.binding or 'none'})")
        return EXIT_OK
    print(f"find-constant: no C <= {mb.get('C_max', mono.C_MAX):g} makes {fit.binding} monotone")
    return EXIT_VIOLATIONS


def run_density(cfg, args) -> int:
    fs = _fixtures(cfg)
    mb = cfg.get("mono", {})
    tol = mb.get("density_tol", 1e-3)
    rows = []
    status = EXIT_OK
    for f, tag, pr, _ in _profiles(cfg, args, fs):
        est = mono.density_limit(pr, mb.get("density_points", 8))
        row = {"profile": pr.label, "center": pr.a, **est.to_dict()}
        if tag.startswith("contact") and f.params.get("kind") != "mesh":
            exp = float(f.expected_density_limit[int(tag[len("contact"):])])
            row["expected"] = exp
            row["passed"] = bool(abs(est.estimate - exp) <= tol and est.converged)
            if not row["passed"]:
                status = EXIT_VIOLATIONS
        rows.append(row)
        print(f"density {pr.label}: {est.estimate:.6f} +- {est.uncertainty:.1e}")
    _write(_out_dir(cfg, args) / "density.json", mono.dumps({"estimates": rows, "tol": tol}))
    return status


def run_fixture_dump(cfg, args) -> int:
    out = _out_dir(cfg, args)
    for f in _fixtures(cfg):
        stem = f.name
        if f.V.n == 1 and f.V.exact is not None:
            seg = f.V.exact
            varifold.write_polyline_csv(out / f"{stem}_polyline.csv", np.stack([seg.p0, seg.p1]))
        elif f.mesh is not None:
            varifold.write_obj(out / f"{stem}.obj", *f.mesh)
        elif f.params.get("kind") == "cap":
            verts, tris = fixtures.cap_mesh(f.cfg.theta, max(4, f.level))
            varifold.write_obj(out / f"{stem}.obj", verts, tris)
        varifold.write_varifold_csv(out / f"{stem}_varifold.csv", f.V)
        desc = {**f.describe(), "contact_points": f.contact_points,
                "expected_density_limit": f.expected_density_limit,
                "domain": f.dom.describe(), "effective_sigma": f.sigma}
        _write(out / f"{stem}.json", mono.dumps(desc))
        print(f"fixture dump: {stem}")
    return EXIT_OK


COMMANDS = {
    "lemmas": run_lemmas,
    "verify-angle": run_residual,
    "monotonicity": run_monotonicity,
    "find-constant": run_find_constant,
    "density": run_density,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="varicontact",
                                 description="Boundary monotonicity experiments for "
                                             "varifolds with a contact angle.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="sampling seed (overrides config seed)")

    for name in COMMANDS:
        common(sub.add_parser(name))
    fx = sub.add_parser("fixture", help="fixture utilities")
    fsub = fx.add_subparsers(dest="action", required=True)
    common(fsub.add_parser("dump", help="write fixture geometry files"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "fixture":
            return run_fixture_dump(cfg, args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, geom.DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
