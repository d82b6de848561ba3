import itertools
import math

import pytest

from artifact.bounds import (
    IsoperimetricData,
    ThickThinConstants,
    angle_bound,
    c2_for_setting,
    classify_setting,
    constants_report,
    cylinder_constants,
    delta_threshold,
    thick_thin_constants,
    tube_width_bound,
)
from artifact.errors import ValidationError
from artifact.geodesic import GeometricBounds
from artifact.provenance import Record


def test_delta_threshold_examples():
    assert delta_threshold(GeometricBounds(1, 0, 2, 1.0), 2).value == 1.0
    assert delta_threshold(GeometricBounds(1, 0, 1, 0.5), 4).value == 0.25
    assert delta_threshold(GeometricBounds(1, 0, 1e300, 1.0), 1e300).value == 1.0
    with pytest.raises(ValidationError):
        delta_threshold(GeometricBounds(1, 0, 1), -1.0)


def test_cylinder_constants_examples():
    c3, d2 = cylinder_constants(IsoperimetricData(1 / (4 * math.pi), 1.0), 1.0, 1.0)
    assert c3.value == pytest.approx(1.0, rel=1e-15)
    assert d2.value == 1 / 16
    _, d2 = cylinder_constants(IsoperimetricData(1.0, 1.0), 1.0, 1 / 32)
    assert d2.value == 1 / 32


def test_c3_clamped_with_note():
    c3, _ = cylinder_constants(IsoperimetricData(0.01, 1.0), 1.0, 1.0)
    assert c3.value == 1.0
    assert c3.steps[-1].note


def test_c2_examples():
    assert c2_for_setting(0.3, 3).value == 2 * math.pi
    assert c2_for_setting(1.0, 4).value == 2 * math.pi
    assert c2_for_setting(0.1, 4).value == pytest.approx(25 * math.pi, rel=1e-14)
    with pytest.raises(ValidationError):
        c2_for_setting(0.1, 5)


def test_angle_bound_examples():
    rec = angle_bound(GeometricBounds(1.0, 0.0, math.pi / 2))
    assert rec.get("r") == pytest.approx(math.pi / 6, rel=1e-15)
    assert rec.get("f") == pytest.approx(1 / math.tanh(math.pi / 6), rel=1e-15)
    assert rec.value == pytest.approx(2 * math.pi / math.tanh(math.pi / 6), rel=1e-15)
    f0 = angle_bound(GeometricBounds(0.5, 1.0, 1.0)).get("f")
    f1 = angle_bound(GeometricBounds(0.5, 2.0, 1.0)).get("f")
    assert f1 - f0 == pytest.approx(1.0, abs=1e-14)


def test_angle_bound_flat_limit_continuous():
    i0 = 0.9
    f_small = angle_bound(GeometricBounds(1e-14, 0.0, i0)).get("f")
    assert f_small == pytest.approx(3 / i0, rel=1e-10)               # r = i0 / 3
    f_series = angle_bound(GeometricBounds(1e-13, 0.0, i0)).get("f")
    f_exact = angle_bound(GeometricBounds(1e-10, 0.0, i0)).get("f")
    assert abs(f_series - f_exact) < 1e-8


def test_tube_width_flat_limit():
    b = GeometricBounds(1e-8, 10.0, 1.0, 1.0)
    rec = tube_width_bound(b)
    c = angle_bound(b).value
    assert rec.get("ell_star") == pytest.approx(1.0 / (2 * c), rel=1e-6)


def test_tube_width_caps_and_positive():
    rec = tube_width_bound(GeometricBounds(1.0, 1.0, 1.0, 1.0))
    assert rec.get("ell_star") > 0
    big = tube_width_bound(GeometricBounds(1e-8, 1e-8, 1e6, 1.0))
    assert big.value <= 0.5


def test_tube_width_monotonicity_grid():
    Ks, Hs, i0s, epss = (0.5, 1.0, 2.0), (0.2, 1.0, 3.0), (0.5, 1.0, 2.0), (0.25, 0.5, 1.0)
    val = {}
    for K, H, i0, e in itertools.product(Ks, Hs, i0s, epss):
        val[K, H, i0, e] = tube_width_bound(GeometricBounds(K, H, i0, e)).value
    for (K, H, i0, e), v in val.items():
        for K2 in Ks:
            if K2 > K:
                assert val[K2, H, i0, e] <= v + 1e-12
        for H2 in Hs:
            if H2 > H:
                assert val[K, H2, i0, e] <= v + 1e-12
        for i2 in i0s:
            if i2 > i0:
                assert val[K, H, i2, e] >= v - 1e-12
        for e2 in epss:
            if e2 > e:
                assert val[K, H, i0, e2] >= v - 1e-12


def test_delta2_monotone_in_c1_and_c3_in_c():
    iso = IsoperimetricData(1.0, 1.0)
    d = [cylinder_constants(iso, c1, 1.0)[1].value for c1 in (0.5, 1, 2, 4)]
    assert all(a >= b for a, b in zip(d, d[1:]))
    c3 = [cylinder_constants(IsoperimetricData(c, 1.0), 1.0, 1.0)[0].value for c in (0.05, 0.1, 1, 10)]
    assert all(a >= b for a, b in zip(c3, c3[1:]))


def test_records_replay_exactly():
    rec = tube_width_bound(GeometricBounds(0.7, 0.4, 1.3, 0.6))
    assert rec.replay() == rec.value
    data = rec.to_dict()
    assert [s["formula"] for s in data["trace"]][-1] == "tube_width"
    assert isinstance(rec, Record)


def test_thick_thin_invariants():
    with pytest.raises(ValidationError):
        ThickThinConstants(1, 1, 1.5, 1, 0.1)
    with pytest.raises(ValidationError):
        ThickThinConstants(1, 1, 1, 1, 0.6)
    t = thick_thin_constants(GeometricBounds(1e-8, 0, 1e6), IsoperimetricData(1 / (4 * math.pi), 1.0),
                             2 / math.pi, 0.1, 3)
    assert t.c3 == pytest.approx(1.0) and t.delta2 < 0.05 and t.c2 == 2 * math.pi
    assert "delta2" in t.provenance


def test_classify_setting():
    finite = {"R": 1, "R_2": 1, "J_2": 1, "J_3": 1, "B_2": 1, "injrad_inv": 1}
    assert classify_setting(finite, False, False)["case"] == 2
    assert classify_setting(finite, False, True, lipschitz=True)["case"] == 3
    assert classify_setting(finite, True, True, components_lipschitz=True, boundary_metric=True)["case"] == 4
    out = classify_setting({}, False, True)
    assert out["case"] is None and out["failed"]
    assert classify_setting({}, False, False, compact=True)["case"] == 1


def test_constants_report_shape():
    rep = constants_report(GeometricBounds(1.0, 1.0, 1.0), iso_c=1 / (4 * math.pi))
    for key in ("delta", "angle", "tube_width", "injectivity_radius_L", "thick_thin"):
        assert key in rep
