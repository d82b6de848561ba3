"""Scenario runner and command line entry point.

A scenario is one JSON document that names catalog entries; it never carries code.
Numeric results go to ``report.json`` (byte-stable for a fixed scenario and seed),
wall-clock timings to ``timing.json`` and tabular data to CSV files.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import IsoperimetricData, constants_report, thick_thin_constants
from .errors import GeometryError, ScenarioError
from .geodesic import GeometricBounds, second_fundamental_norm
from .reflect import (
    LAGRANGIANS,
    ReflectionMetric,
    blend_curvature_report,
    build_tube,
    interpolate_metrics,
    partition_report,
    tameness_check,
    verify_th_can,
)
from .tensor import MANIFOLDS, riemann_curvature, sectional_curvature
from .thickthin import (
    CURVES,
    EnergyField,
    check_cylinder_inequality,
    check_gradient_inequality,
    check_isoperimetric,
    circle_loop,
    ellipse_loop,
    exponential_cylinder,
    fermi_collar,
    flat_cylinder,
    point_loop,
)

SUITES = ("constants", "reflection", "tameness", "gradient", "cylinder", "isoperimetric")
NEEDS_LAGRANGIAN = {"reflection", "tameness"}
# dependency order: bounds -> tube -> reflection -> checks
ORDER = {name: k for k, name in enumerate(SUITES)}

DEFAULT_PARAMS = {
    "sample_count": 20,
    "d_samples": 4,
    "fd_step": None,
    "tube_radius": 0.5,
    "delta": 0.1,
    "blend_samples": 8,
    "tameness_samples": 16,
    "tameness_radius": None,
    "c1": 2.0 / math.pi,
    "delta1": 0.1,
    "case": 3,
    "iso_c": 1.0 / (4.0 * math.pi),
    "iso_delta": 1.0,
    "n_t": 25,
    "fit_margin": 1.0,
    "disk_count": 20,
    "disk_scale": 0.1,
    "loop_radii": [0.01, 0.05, 0.1, 0.2],
}

DOMAINS = {
    "flat": "rho_range [a, b]; boundary_type closed|half|strip",
    "exponential": "rho_range [a, b]",
    "fermi_collar": "ell > 0, T > 0",
}


# ---------------------------------------------------------------------------
# scenario parsing

@dataclass
class Scenario:
    name: str
    manifold: dict | None
    lagrangian: dict | None
    bounds: dict | None
    curve: dict | None
    suites: list
    params: dict
    seed: int = 0
    raw: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return self.raw


def _field_error(path: str, msg: str) -> ScenarioError:
    return ScenarioError(f"field '{path}': {msg}")


def _entry(doc: dict, key: str, catalog: dict) -> dict | None:
    entry = doc.get(key)
    if entry is None:
        return None
    if not isinstance(entry, dict):
        raise _field_error(key, "expected an object with 'name' and optional 'params'")
    name = entry.get("name")
    if not isinstance(name, str):
        raise _field_error(f"{key}.name", "missing or not a string")
    if name not in catalog:
        raise _field_error(f"{key}.name", f"unknown catalog entry {name!r}")
    params = entry.get("params", {})
    if not isinstance(params, dict):
        raise _field_error(f"{key}.params", "expected an object")
    return {**entry, "name": name, "params": params}


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    known = {"name", "manifold", "lagrangian", "bounds", "curve", "suites", "params", "seed"}
    extra = sorted(set(doc) - known)
    if extra:
        raise _field_error(extra[0], "unknown field")
    manifold = _entry(doc, "manifold", MANIFOLDS)
    lagrangian = _entry(doc, "lagrangian", LAGRANGIANS)
    curve = _entry(doc, "curve", CURVES)
    suites = doc.get("suites")
    if not isinstance(suites, list) or not suites:
        raise _field_error("suites", "expected a non-empty list")
    for k, s in enumerate(suites):
        if s not in SUITES:
            raise _field_error(f"suites[{k}]", f"unknown suite {s!r}; choose from {', '.join(SUITES)}")
    bounds = doc.get("bounds")
    if bounds is not None:
        if not isinstance(bounds, dict):
            raise _field_error("bounds", "expected an object")
        for key in ("K", "H", "i0"):
            if not isinstance(bounds.get(key), (int, float)):
                raise _field_error(f"bounds.{key}", "missing or not a number")
        try:
            _bounds_from(bounds)
        except GeometryError as exc:
            raise _field_error("bounds", str(exc)) from None
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise _field_error("params", "expected an object")
    for k in params:
        if k not in DEFAULT_PARAMS:
            raise _field_error(f"params.{k}", "unknown parameter")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise _field_error("seed", "expected an integer")
    return Scenario(name=str(doc.get("name", Path(source).stem)), manifold=manifold, lagrangian=lagrangian,
                    bounds=bounds, curve=curve, suites=list(suites), params={**DEFAULT_PARAMS, **params},
                    seed=seed, raw=doc)


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc.strerror}") from None
    return parse_scenario(text, str(p))


def _bounds_from(d: dict) -> GeometricBounds:
    return GeometricBounds(K=float(d["K"]), H=float(d["H"]), i0=float(d["i0"]), eps=float(d.get("eps", 1.0)),
                           higher_bounds=dict(d.get("higher_bounds", {})))


# ---------------------------------------------------------------------------
# JSON hygiene

def plain(v):
    """Convert numpy values and non-finite floats to JSON-safe Python objects."""
    if isinstance(v, dict):
        return {str(k): plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return plain(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def dumps(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# suite context

class Context:
    """Lazily built shared objects, so each suite only pays for what it uses."""

    def __init__(self, sc: Scenario, out_dir: Path):
        self.sc = sc
        self.p = sc.params
        self.out = out_dir
        self._lag = None
        self._tube = None
        self._refl = None
        self.csv_files: list[str] = []

    @property
    def manifold(self):
        if self.sc.manifold is None:
            return self.lagrangian.ambient if self.sc.lagrangian else None
        factory, _ = MANIFOLDS[self.sc.manifold["name"]]
        kw = dict(self.sc.manifold["params"])
        if self.p["fd_step"] is not None:
            kw["fd_step"] = self.p["fd_step"]
        return factory(**kw)

    @property
    def lagrangian(self):
        if self.sc.lagrangian is None:
            raise ScenarioError("suite needs a Lagrangian but the scenario has none")
        if self._lag is None:
            self._lag = LAGRANGIANS[self.sc.lagrangian["name"]]["factory"](**self.sc.lagrangian["params"])
        return self._lag

    @property
    def tube(self):
        if self._tube is None:
            self._tube = build_tube(self.lagrangian, float(self.sc.lagrangian.get("radius", self.p["tube_radius"])),
                                    fd_step=self.p["fd_step"])
        return self._tube

    @property
    def reflection(self):
        if self._refl is None:
            self._refl = ReflectionMetric(self.tube)
        return self._refl

    def bounds(self) -> tuple[GeometricBounds, str]:
        if self.sc.bounds is not None:
            return _bounds_from(self.sc.bounds), "given"
        return measured_bounds(self.manifold, self._lag if self.sc.lagrangian else None), "measured"

    def write_csv(self, name: str, header, rows) -> None:
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
        self.csv_files.append(name)


def measured_bounds(manifold, lag=None, n: int = 16) -> GeometricBounds:
    """Sampled curvature and second fundamental form bounds.

    The injectivity radius is a surrogate: pi / sqrt(K) capped by half the chart width.
    """
    if manifold is None:
        raise ScenarioError("bounds are neither given nor measurable without a manifold")
    pts = manifold.sample_points(n, margin=0.05 * min(a.width for a in manifold.box))
    d = manifold.dim
    K = 0.0
    for p in pts:
        R = riemann_curvature(manifold, p)
        for a in range(d):
            for b in range(a + 1, d):
                e = np.eye(d)
                K = max(K, abs(sectional_curvature(manifold, p, e[a], e[b], R)))
    K = max(K, 1e-8)
    H = 0.0
    if lag is not None:
        H = max(second_fundamental_norm(lag, lp) for lp in lag.sample_params(n))
    half = 0.5 * min(a.width for a in manifold.box)
    i0 = min(math.pi / math.sqrt(K), half)
    return GeometricBounds(K=float(K), H=float(H), i0=float(i0))


# ---------------------------------------------------------------------------
# suites

def suite_constants(ctx: Context) -> dict:
    b, origin = ctx.bounds()
    p = ctx.p
    rep = constants_report(b, iso_c=p["iso_c"], c1=p["c1"], delta1=p["delta1"], case=p["case"])
    rep["bounds_origin"] = origin
    rows = []
    for key in ("delta", "angle", "tube_width", "injectivity_radius_L"):
        rows.append((key, rep[key]["value"]))
    if "thick_thin" in rep:
        for key in ("c1", "c2", "c3", "delta1", "delta2"):
            rows.append((key, rep["thick_thin"][key]))
    ctx.write_csv("constants.csv", ["constant", "value"], rows)
    rep["passed"] = all(math.isfinite(v) and v > 0 for _, v in rows)
    return rep


def suite_reflection(ctx: Context) -> dict:
    p = ctx.p
    refl = ctx.reflection
    rep = verify_th_can(refl, sample_count=p["sample_count"], d_samples=p["d_samples"])
    tube = ctx.tube
    Y = tube.sample(p["sample_count"])
    h = refl.h(Y)
    d = tube.dim
    header = [f"l{k}" for k in range(tube.l_dim)] + [f"x{k}" for k in range(tube.codim)]
    header += [f"h{i}{j}" for i in range(d) for j in range(i, d)]
    rows = [list(y) + [h[n, i, j] for i in range(d) for j in range(i, d)] for n, y in enumerate(Y)]
    ctx.write_csv("reflection_metric.csv", header, rows)
    blend = None
    if 2 * p["delta"] < tube.radius:
        bm = interpolate_metrics(refl, p["delta"])
        blend = {"delta": p["delta"], "partition": partition_report(bm, p["blend_samples"]),
                 "curvature": blend_curvature_report(bm, p["blend_samples"])}
        crv = blend["curvature"]
        dist = np.linalg.norm(np.asarray(crv["points"])[:, tube.l_dim:], axis=1)
        ctx.write_csv("blend_curvature.csv", ["distance", "curvature", "curvature_half_step"],
                      zip(dist, crv["curvature"], crv["curvature_half_step"]))
        del crv["points"]
    else:
        blend = {"skipped": f"2 delta = {2 * p['delta']} not below tube radius {tube.radius}"}
    rep["blend"] = blend
    rep["lagrangian"] = tube.lagrangian.name
    ok = all(rep["passed"].values())
    if "curvature" in blend:
        ok &= blend["curvature"]["stable"] and blend["curvature"]["finite"]
    rep["flat_identity_defect"] = rep["layers_on_zero_section"]["h_minus_2g0"]
    rep["passed_all"] = bool(ok)
    return rep


def suite_tameness(ctx: Context) -> dict:
    p = ctx.p
    b = GeometricBounds(**{k: ctx.sc.bounds[k] for k in ("K", "H", "i0")}) if ctx.sc.bounds else None
    rep = tameness_check(ctx.tube, b, radius=p["tameness_radius"], n=p["tameness_samples"],
                         d_samples=p["d_samples"])
    ctx.write_csv("tameness.csv", ["item", "K_min", "ok"],
                  [(k, v["K_min"], v["ok"]) for k, v in rep["items"].items()])
    return rep


def suite_gradient(ctx: Context) -> dict:
    p = ctx.p
    from .thickthin import flat_disk_family
    pairs = flat_disk_family(p["disk_count"], p["disk_scale"], seed=ctx.sc.seed)
    rep = check_gradient_inequality(pairs, c1=p["c1"], delta1=p["delta1"])
    ctx.write_csv("gradient.csv", ["curve", "mu", "density", "r_conf", "rhs"],
                  [(r["curve"], r["mu"], r["density"], r["r_conf"], r["rhs"]) for r in rep["rows"]])
    rep["mean_value_bound"] = 1.0 / math.pi
    rep["below_mean_value_bound"] = rep["measured_c1"] <= 1.0 / math.pi + 1e-6
    return rep


def _cylinder_domain(entry: dict):
    kind = entry.get("kind", "flat")
    if kind == "flat":
        a, b = entry.get("rho_range", [-10.0, 10.0])
        return flat_cylinder(a, b, entry.get("boundary_type", "closed"))
    if kind == "exponential":
        a, b = entry.get("rho_range", [0.0, 1.0])
        return exponential_cylinder(a, b)
    if kind == "fermi_collar":
        return fermi_collar(entry.get("ell", 1.0), entry.get("T", 10.0))
    raise _field_error("curve.domain.kind", f"unknown domain {kind!r}; choose from {', '.join(DOMAINS)}")


def suite_cylinder(ctx: Context) -> dict:
    sc, p = ctx.sc, ctx.p
    if sc.curve is None:
        raise ScenarioError("cylinder suite needs a curve")
    curve = CURVES[sc.curve["name"]]["factory"](**sc.curve["params"])
    dom = _cylinder_domain(sc.curve.get("domain", {}))
    fld = EnergyField.from_curve(curve, dom)
    b, origin = ctx.bounds()
    iso = IsoperimetricData(p["iso_c"], p["iso_delta"])
    consts = thick_thin_constants(b, iso, p["c1"], p["delta1"], p["case"])
    rep = check_cylinder_inequality(fld, consts, n_t=p["n_t"], fit_margin=p["fit_margin"], iso_c=p["iso_c"])
    ctx.write_csv("cylinder_decay.csv", ["t", "mu", "bound"], [(r["t"], r["mu"], r["bound"]) for r in rep["rows"]])
    rep["constants"] = consts.to_dict()
    rep["bounds_origin"] = origin
    return rep


def suite_isoperimetric(ctx: Context) -> dict:
    p = ctx.p
    loops = [circle_loop(r) for r in p["loop_radii"]]
    loops += [ellipse_loop(r, 0.5 * r) for r in p["loop_radii"]] + [point_loop()]
    rep = check_isoperimetric(loops, IsoperimetricData(p["iso_c"], p["iso_delta"]))
    ctx.write_csv("isoperimetric.csv", ["loop", "length", "abs_action", "bound"],
                  [(r["loop"], r["length"], r["abs_action"], r["bound"]) for r in rep["rows"]])
    return rep


SUITE_FNS = {
    "constants": suite_constants,
    "reflection": suite_reflection,
    "tameness": suite_tameness,
    "gradient": suite_gradient,
    "cylinder": suite_cylinder,
    "isoperimetric": suite_isoperimetric,
}


def _suite_passed(name: str, res: dict) -> bool:
    if name == "reflection":
        return bool(res.get("passed_all"))
    if name == "gradient":
        return bool(res.get("passed") and res.get("below_mean_value_bound"))
    if name == "cylinder":
        return bool(res.get("passed") and res.get("differential_passed", True))
    return bool(res.get("passed"))


def run_scenario(scenario, out_dir, seed: int | None = None) -> dict:
    """Run every requested suite; a failing suite is recorded and the rest still run."""
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if seed is not None:
        sc.seed = int(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(sc, out)
    results, timing, summary = {}, {}, {}
    for name in sorted(dict.fromkeys(sc.suites), key=ORDER.get):
        t0 = time.perf_counter()
        try:
            if name in NEEDS_LAGRANGIAN and sc.lagrangian is None:
                raise ScenarioError(f"suite '{name}' needs a Lagrangian")
            np.random.seed(sc.seed)
            res = SUITE_FNS[name](ctx)
            results[name] = {"status": "completed", "result": res}
            summary[name] = "pass" if _suite_passed(name, res) else "fail"
        except (GeometryError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            results[name] = {"status": "error", "error_type": type(exc).__name__, "message": str(exc)}
            summary[name] = "error"
        timing[name] = time.perf_counter() - t0
    report = {
        "artifact_version": __version__,
        "scenario": sc.echo(),
        "seed": sc.seed,
        "suites": results,
        "summary": summary,
        "passed": all(v == "pass" for v in summary.values()),
        "csv_files": sorted(ctx.csv_files),
        "timing_file": "timing.json",
    }
    report = plain(report)
    (out / "report.json").write_text(dumps(report))
    (out / "timing.json").write_text(dumps({"wall_clock_seconds": timing}))
    return report


# ---------------------------------------------------------------------------
# catalog listing

def list_catalog(filter_text: str = "") -> dict:
    f = (filter_text or "").lower()
    out = {"manifolds": {}, "lagrangians": {}, "curves": {}, "domains": {}}
    for name, (_, schema) in MANIFOLDS.items():
        out["manifolds"][name] = schema
    for name, entry in LAGRANGIANS.items():
        out["lagrangians"][name] = {"ambient": entry["ambient"], "params": entry["params"]}
    for name, entry in CURVES.items():
        out["curves"][name] = entry["params"]
    out["domains"] = dict(DOMAINS)
    if f:
        out = {k: {n: v for n, v in sect.items() if f in n.lower()} for k, sect in out.items()}
    return out


# ---------------------------------------------------------------------------
# entry point

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="artifact", description="Reflection-metric and thick-thin checks")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--seed", type=int, default=None)
    c = sub.add_parser("constants", help="derive constants from a bounds file")
    c.add_argument("bounds")
    k = sub.add_parser("catalog", help="list catalog entries")
    k.add_argument("filter", nargs="?", default="")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            rep = run_scenario(args.scenario, args.out, args.seed)
            for name, status in rep["summary"].items():
                print(f"{name}: {status}")
            print(f"report written to {Path(args.out) / 'report.json'}")
            return 0
        if args.command == "constants":
            try:
                doc = json.loads(Path(args.bounds).read_text())
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{args.bounds}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
            except OSError as exc:
                raise ScenarioError(f"cannot read {args.bounds}: {exc.strerror}") from None
            for key in ("K", "H", "i0"):
                if not isinstance(doc.get(key), (int, float)):
                    raise _field_error(key, "missing or not a number")
            b = _bounds_from(doc)
            opts = {k: doc[k] for k in ("injrad_L", "iso_c", "c1", "delta1", "case") if k in doc}
            sys.stdout.write(dumps(constants_report(b, **opts)))
            return 0
        sys.stdout.write(dumps(list_catalog(args.filter)))
        return 0
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
