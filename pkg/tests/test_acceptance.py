"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line to the terminal (outside pytest's
capture) before asserting.  Run alone with ``pytest tests/test_acceptance.py``
or ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

from artifact.bounds import (
    IsoperimetricData,
    c2_for_setting,
    cylinder_constants,
    thick_thin_constants,
    tube_width_bound,
)
from artifact.cli import run_scenario
from artifact.geodesic import (
    GeodesicState,
    GeometricBounds,
    JacobiState,
    comparison_solution,
    geodesic_loop_bound,
    integrate_geodesic,
    integrate_jacobi,
    vector_norm,
)
from artifact.reflect import (
    ReflectionMetric,
    blend_curvature_report,
    build_tube,
    circle_in_C,
    circle_times_line,
    flat_torus_circle,
    interpolate_metrics,
    jacobi_characterization_of_A,
    real_plane_in_Cn,
    sasaki_metric_g1,
    verify_th_can,
)
from artifact.tensor import (
    catalog_pairs,
    christoffel_batch,
    connection_difference_field,
    curvature_difference_batch,
    euclidean,
    hyperbolic_plane,
    riemann_batch,
    round_sphere,
)
from artifact.thickthin import (
    EnergyField,
    check_cylinder_inequality,
    check_gradient_inequality,
    check_isoperimetric,
    circle_loop,
    decaying_cylinder_curve,
    flat_cylinder,
    flat_disk_family,
)

SCEN = Path(__file__).resolve().parent.parent / "scenarios"
FLAT_C = 1 / (4 * math.pi)


@pytest.fixture
def verdict(capsys):
    def emit(number: int, title: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}  {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_01_flat_reflection_identity(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (1, 2):
        refl = ReflectionMetric(build_tube(real_plane_in_Cn(n), 1.0))
        Y = refl.tube.sample(20, 0.9)
        worst = max(worst, float(np.max(np.abs(refl.h(Y) - 2 * np.eye(2 * n)))))
    dt = time.perf_counter() - t0
    verdict(1, "flat h = 2 Euclidean", worst < 1e-10 and dt < 10, f"defect={worst:.2e} time={dt:.1f}s")


def test_02_circle_totally_geodesic(verdict, circle_refl):
    t0 = time.perf_counter()
    rep = verify_th_can(circle_refl, sample_count=20, d_samples=2)
    dt = time.perf_counter() - t0
    ok = rep["B_h"] < 1e-5 and abs(rep["B_gJ"] - 1) < 1e-6 and abs(rep["B_gJ_min"] - 1) < 1e-6 and dt < 60
    verdict(2, "circle totally geodesic for h", ok,
            f"B_h={rep['B_h']:.2e} B_gJ={rep['B_gJ']:.8f} time={dt:.1f}s")


def test_03_hermitian_and_orthogonal(verdict, circle_refl):
    out = []
    for refl in (circle_refl, ReflectionMetric(build_tube(circle_times_line(), 0.5))):
        rep = verify_th_can(refl, sample_count=12, d_samples=1)
        out.append((rep["hermitian_defect"], rep["orthogonality_defect"]))
    worst = max(max(p) for p in out)
    verdict(3, "Hermitian and J TL orthogonal", worst < 1e-8, f"worst={worst:.2e}")


def test_04_difference_tensor_oracles(verdict):
    hmax = smax = 0.0
    for pair in catalog_pairs().values():
        X = pair.g.sample_points(10, margin=0.1)
        H = connection_difference_field(pair)(X)
        Hor = christoffel_batch(pair.g, X) - christoffel_batch(pair.h, X)
        hmax = max(hmax, float(np.max(np.abs(H - Hor))))
        S = curvature_difference_batch(pair, X)
        Sor = riemann_batch(pair.g, X) - riemann_batch(pair.h, X)
        smax = max(smax, float(np.max(np.abs(S - Sor))))
    verdict(4, "connection/curvature difference formulas", hmax < 1e-6 and smax < 1e-5,
            f"H={hmax:.2e} S={smax:.2e}")


def test_05_sasaki_cross_check(verdict, circle_tube):
    worst = 0.0
    for tube in (circle_tube, build_tube(flat_torus_circle(), 0.5)):
        Y = tube.sample(12, 0.9)
        worst = max(worst, float(np.max(np.abs(sasaki_metric_g1(tube, Y) - tube.g1(Y)))))
    verdict(5, "linear metric vs Sasaki construction", worst < 1e-6, f"diff={worst:.2e}")


def test_06_jacobi_characterisation(verdict, circle_refl):
    Y = circle_refl.tube.sample(20, 0.8)
    worst = 0.0
    for y in Y:
        a = jacobi_characterization_of_A(circle_refl, y[:1], [1.0], y[1:])
        b = jacobi_characterization_of_A(circle_refl, y[:1], [1.0], y[1:], normal=True)
        worst = max(worst, a["max_diff"], b["max_diff"])
    verdict(6, "transport vs Jacobi field for A", worst < 1e-5, f"diff={worst:.2e} points={len(Y)}")


def _width_root_oracle(c, eps, K):
    def rhs(ell):
        s = math.sqrt(K)
        return s * (1 - ell * K) / (2 * math.sinh(s * ell))
    hi = min(1 / K, eps / 2)
    if rhs(hi) > c / eps:
        return hi
    return brentq(lambda ell: rhs(ell) - c / eps, 1e-300, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)


def test_07_constant_formulas(verdict):
    tight = 4 * np.finfo(float).eps
    errs = []
    for c, delta, c1, delta1 in [(FLAT_C, 1.0, 2 / math.pi, 0.1), (0.3, 0.2, 1.5, 0.01), (0.01, 0.5, 0.1, 2.0)]:
        c3, d2 = cylinder_constants(IsoperimetricData(c, delta), c1, delta1)
        errs.append(abs(d2.value - min(delta1, delta ** 2 / (16 * c1))))
        errs.append(abs(c3.steps[0].value - 1 / (4 * math.pi * c)))
    for eps in (0.05, 0.3, 1.0, 2.0):
        errs.append(abs(c2_for_setting(eps, 4).value - max(1 / (8 * eps), math.pi / (4 * eps ** 2), 2 * math.pi)))
    rel = []
    for K, H, i0 in [(1.0, 1.0, 1.0), (0.25, 0.5, 2.0), (4.0, 0.1, 0.3)]:
        F = math.sqrt(K) / math.tanh(math.sqrt(K) * i0 / 2)
        inj = min(math.pi / math.sqrt(K + 2 * H * H), 0.5 * min(i0 / 4, 1 / (F + H)))
        rel.append(abs(geodesic_loop_bound(GeometricBounds(K, H, i0)).value - inj) / inj)
        rec = tube_width_bound(GeometricBounds(K, H, i0))
        r = min(i0 / 3, math.pi / (6 * math.sqrt(K)))
        f = H + math.sqrt(K) / math.tanh(math.sqrt(K) * r)
        ell = _width_root_oracle(2 * math.pi * f, 1.0, K)
        rel.append(abs(rec.get("ell_star") - ell) / ell)
    ok = max(errs) <= tight and max(rel) < 1e-12
    verdict(7, "constant formulas re-derived", ok, f"abs={max(errs):.1e} rel={max(rel):.1e}")


def test_08_cylinder_decay(verdict, tmp_path):
    fld = EnergyField.from_curve(decaying_cylinder_curve(1e-6), flat_cylinder(-10, 10))
    consts = thick_thin_constants(GeometricBounds(1e-8, 0.0, 1e6), IsoperimetricData(FLAT_C, 1.0),
                                  2 / math.pi, 0.1, 3)
    rep = check_cylinder_inequality(fld, consts, iso_c=FLAT_C, csv_path=tmp_path / "decay.csv")
    ok = (consts.c3 == 1.0 and rep["checked"] and rep["passed"] and rep["differential_passed"]
          and abs(rep["fitted_exponent"] - 2.0) <= 0.01 and fld.total < consts.delta2)
    verdict(8, "cylinder decay", ok, f"exponent={rep['fitted_exponent']:.4f} E={fld.total:.2e}")


def test_09_isoperimetric_ratio(verdict):
    rep = check_isoperimetric([circle_loop(r) for r in (0.01, 0.1, 0.3)], IsoperimetricData(FLAT_C, 1.0))
    err = abs(rep["measured_c"] - FLAT_C)
    verdict(9, "isoperimetric ratio of circles", err < 1e-8, f"c={rep['measured_c']:.12f}")


def test_10_gradient_inequality(verdict):
    rep = check_gradient_inequality(flat_disk_family(20), c1=2 / math.pi, delta1=0.1)
    ok = rep["coverage"] == 20 and rep["passed"] and rep["measured_c1"] <= 1 / math.pi + 1e-6
    verdict(10, "gradient inequality on flat disks", ok, f"measured c1={rep['measured_c1']:.8f}")


def test_11_constant_curvature_jacobi(verdict):
    cases = [
        (round_sphere(1.0), np.array([math.pi / 2, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0]),
         math.pi / 2, np.sin, 1.0),
        (hyperbolic_plane(), np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([1.0, 0.0]), 1.0, np.sinh, 1.0),
        (euclidean(2), np.zeros(2), np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1.0, lambda t: t, 1e-8),
    ]
    closed = dom = 0.0
    for M, x0, u, v, T, form, k in cases:
        tr = integrate_geodesic(M, GeodesicState(x0, u), T)
        _, Zs, Ys = integrate_jacobi(M, tr, JacobiState(np.zeros(2), v), return_history=True)
        nz = np.array([vector_norm(M, x, z) for x, z in zip(tr.positions, Zs)])
        ny = np.array([vector_norm(M, x, y) for x, y in zip(tr.positions, Ys)])
        closed = max(closed, float(np.max(np.abs(nz - form(tr.t)))))
        t, xi, dxi = comparison_solution(k, lambda s: 0 * s, 0.0, 1.0, T, n=4001)
        xi, dxi = np.interp(tr.t, t, xi), np.interp(tr.t, t, dxi)
        dom = max(dom, float(np.max(nz - xi)), float(np.max(ny - dxi)))
    verdict(11, "Jacobi closed forms and comparison", closed < 1e-6 and dom <= 1e-6,
            f"closed={closed:.2e} excess={dom:.2e}")


def test_12_interpolation(verdict, circle_refl):
    blend = interpolate_metrics(circle_refl, 0.1)
    L = np.linspace(-3, 3, 9)
    inside = np.array([[a, s] for a in L for s in (0.0, 0.05, -0.09, 0.1)])
    outside = np.array([[a, s] for a in L for s in (0.2, -0.25, 0.4)])
    exact = (np.array_equal(blend.metric(inside), circle_refl.h(inside))
             and np.array_equal(blend.metric(outside), circle_refl.tube.g0(outside)))
    far = np.array([[0.0, 0.0], [1.5, 0.3], [0.1, -1.4]])
    exact = exact and np.array_equal(blend.ambient_metric(far), np.broadcast_to(np.eye(2), (3, 2, 2)))
    rep = blend_curvature_report(blend, n=8)
    ok = exact and rep["finite"] and rep["stable"]
    verdict(12, "metric interpolation", ok,
            f"exact={exact} change={rep['max_relative_change']:.2e}")


def test_13_determinism(verdict, tmp_path):
    same = True
    for name in ("circle.json", "cylinder.json"):
        a = run_scenario(SCEN / name, tmp_path / name / "a", seed=7)
        run_scenario(SCEN / name, tmp_path / name / "b", seed=7)
        for f in ["report.json"] + a["csv_files"]:
            same = same and (tmp_path / name / "a" / f).read_bytes() == (tmp_path / name / "b" / f).read_bytes()
    verdict(13, "byte-identical reports", same)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
