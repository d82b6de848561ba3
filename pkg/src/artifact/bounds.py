"""Explicit constants derived from geometric bounds.

Each public function returns a :class:`Record` whose trace can be replayed to
reproduce the value bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError
from .geodesic import GeometricBounds, geodesic_loop_bound
from .provenance import Record, arccot, coth, formula

BISECTION_ITERATIONS = 100


def _positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise ValidationError(f"{k} must be positive, got {v!r}")


@dataclass
class IsoperimetricData:
    c: float
    delta: float

    def __post_init__(self):
        _positive(c=self.c, delta=self.delta)


@dataclass
class ThickThinConstants:
    c1: float
    c2: float
    c3: float
    delta1: float
    delta2: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        _positive(c1=self.c1, c2=self.c2, c3=self.c3, delta1=self.delta1, delta2=self.delta2)
        if self.c3 > 1:
            raise ValidationError(f"c3 = {self.c3} exceeds 1")
        if not self.delta2 < 0.5 * self.delta1:
            raise ValidationError(f"delta2 = {self.delta2} is not below delta1 / 2 = {0.5 * self.delta1}")

    def to_dict(self) -> dict:
        return {"c1": self.c1, "c2": self.c2, "c3": self.c3, "delta1": self.delta1,
                "delta2": self.delta2, "provenance": self.provenance}


# ---------------------------------------------------------------------------
# formulas

@formula("loop_threshold")
def _loop_threshold(eps, i0, injrad_L):
    return eps * min(1.0, 0.5 * i0, 0.5 * injrad_L)


@formula("energy_threshold")
def _energy_threshold(delta1, delta, c1):
    return min(delta1, delta * delta / (16.0 * c1))


@formula("decay_rate")
def _decay_rate(c):
    return 1.0 / (4.0 * math.pi * c)


@formula("clamp_to_one")
def _clamp(x):
    return min(x, 1.0)


@formula("quarter")
def _quarter(x):
    return 0.25 * x


@formula("modulus_threshold")
def _modulus_threshold(eps, case):
    if case in (1, 2, 3):
        return 2.0 * math.pi
    return max(1.0 / (8.0 * eps), math.pi / (4.0 * eps * eps), 2.0 * math.pi)


@formula("comparison_radius")
def _comparison_radius(i0, K):
    return min(i0 / 3.0, math.pi / (6.0 * math.sqrt(K)))


@formula("hessian_distance_bound")
def _hessian_distance(H, K, r):
    z = math.sqrt(K) * r
    if z < 1e-6:
        # sqrt(K) coth(sqrt(K) r) = 1/r + K r / 3 + O(K^2 r^3)
        return H + 1.0 / r + K * r / 3.0
    return H + math.sqrt(K) * coth(z)


@formula("angle_constant")
def _angle_constant(f):
    return 2.0 * math.pi * f


@formula("focal_distance_surrogate")
def _focal(K, H):
    return arccot(H / math.sqrt(K)) / math.sqrt(K)


def _sinhc(z):
    return 1.0 + z * z / 6.0 if z < 1e-4 else math.sinh(z) / z


def _width_rhs(ell, K):
    # sqrt(K) (1 - ell K) / (2 sinh(sqrt(K) ell)), written so that K -> 0 is stable
    return (1.0 - ell * K) / (2.0 * ell * _sinhc(math.sqrt(K) * ell))


@formula("tube_width_root")
def _tube_width_root(c, eps, K):
    """Smallest ell with c/eps >= rhs(ell), searched on (0, min(1/K, eps/2)).

    Returns the upper end of the bracket when the inequality fails on the whole range.
    """
    target = c / eps
    lo, hi = 0.0, min(1.0 / K, 0.5 * eps)
    if _width_rhs(hi, K) > target:
        return hi
    for _ in range(BISECTION_ITERATIONS):
        mid = 0.5 * (lo + hi)
        if _width_rhs(mid, K) > target:
            lo = mid
        else:
            hi = mid
    return hi


@formula("tube_width")
def _tube_width(ell_star, i0, eps, focal):
    return min(ell_star, 0.5 * i0, 0.5 * eps, focal)


# ---------------------------------------------------------------------------
# operations

def delta_threshold(bounds: GeometricBounds, injrad_L: float) -> Record:
    _positive(injrad_L=injrad_L)
    rec = Record("delta")
    rec.add("delta", "loop_threshold", eps=bounds.eps, i0=bounds.i0, injrad_L=injrad_L)
    return rec


def cylinder_constants(iso: IsoperimetricData, c1: float, delta1: float) -> tuple[Record, Record]:
    """Decay rate c3 and energy threshold delta2 for the cylinder inequality."""
    _positive(c1=c1, delta1=delta1)
    c3 = Record("c3")
    raw = c3.add("c3_raw", "decay_rate", c=iso.c)
    c3.add("c3", "clamp_to_one", note="clamped to 1" if raw > 1 else "", x=raw)
    d2 = Record("delta2")
    d2.add("delta2", "energy_threshold", delta1=delta1, delta=iso.delta, c1=c1)
    return c3, d2


def c2_for_setting(eps: float, case: int) -> Record:
    if case not in (1, 2, 3, 4):
        raise ValidationError(f"setting case must be 1, 2, 3 or 4, got {case!r}")
    _positive(eps=eps)
    rec = Record("c2")
    rec.add("c2", "modulus_threshold", eps=eps, case=case)
    return rec


def angle_bound(bounds: GeometricBounds) -> Record:
    """Records r, f and the angle constant c = 2 pi f (the last step)."""
    rec = Record("angle_constant")
    r = rec.add("r", "comparison_radius", i0=bounds.i0, K=bounds.K)
    f = rec.add("f", "hessian_distance_bound", H=bounds.H, K=bounds.K, r=r)
    rec.add("c", "angle_constant", f=f)
    return rec


def tube_width_bound(bounds: GeometricBounds) -> Record:
    rec = angle_bound(bounds)
    rec.name = "tube_width"
    c = rec.value
    focal = rec.add("focal", "focal_distance_surrogate", note="standard comparison surrogate",
                    K=bounds.K, H=bounds.H)
    ell = rec.add("ell_star", "tube_width_root", c=c, eps=bounds.eps, K=bounds.K)
    if not ell > 0:
        rec.steps[-1].note = "no positive solution; zero width"
    rec.add("tube_width", "tube_width", ell_star=ell, i0=bounds.i0, eps=bounds.eps, focal=focal)
    return rec


def thick_thin_constants(bounds: GeometricBounds, iso: IsoperimetricData, c1: float, delta1: float,
                         case: int) -> ThickThinConstants:
    """Assemble the full constant set.

    delta2 is reduced to delta1 / 4 when the threshold formula gives a value not
    below delta1 / 2; a smaller energy threshold keeps the decay statement valid.
    """
    c3, d2 = cylinder_constants(iso, c1, delta1)
    c2 = c2_for_setting(bounds.eps, case)
    delta2 = d2.value
    if not delta2 < 0.5 * delta1:
        d2.add("delta2", "quarter", note="reduced to delta1 / 4", x=delta1)
        delta2 = d2.value
    prov = {r.name: r.to_dict() for r in (c2, c3, d2)}
    return ThickThinConstants(c1=c1, c2=c2.value, c3=c3.value, delta1=delta1, delta2=delta2, provenance=prov)


# ---------------------------------------------------------------------------
# bounded-setting classifier

_CASE_NORMS = {
    2: ("R", "J_2", "injrad_inv"),
    3: ("R_2", "J_3", "B_2", "injrad_inv"),
    4: ("R_2", "J_3", "B_2", "injrad_inv"),
}


def _finite(norms, key):
    v = norms.get(key)
    return v is not None and math.isfinite(v)


def classify_setting(norms: dict, has_boundary: bool, lagrangian_present: bool, compact: bool = False,
                     lipschitz: bool = False, components_lipschitz: bool = False,
                     boundary_metric: bool = False) -> dict:
    """Return the lowest satisfied case (1 to 4) or ``None`` with the reasons each case failed.

    ``norms`` maps R, R_2, J_2, J_3, B_2 and injrad_inv (1 / injectivity radius) to
    numeric bounds; a missing or infinite entry counts as unbounded.
    """
    failed = {}
    if compact:
        return {"case": 1, "failed": failed}
    failed[1] = "compactness not asserted"

    missing = [k for k in _CASE_NORMS[2] if not _finite(norms, k)]
    if lagrangian_present:
        failed[2] = "Lagrangian present"
    elif has_boundary:
        failed[2] = "curves with boundary need a Lagrangian"
    elif missing:
        failed[2] = "unbounded: " + ", ".join(missing)
    else:
        return {"case": 2, "failed": failed}

    missing = [k for k in _CASE_NORMS[3] if not _finite(norms, k)]
    if missing:
        failed[3] = failed[4] = "unbounded: " + ", ".join(missing)
        return {"case": None, "failed": failed}
    if lagrangian_present and lipschitz:
        return {"case": 3, "failed": failed}
    failed[3] = "Lagrangian not Lipschitz" if lagrangian_present else "no Lagrangian"
    if not lagrangian_present:
        failed[4] = "no Lagrangian"
    elif not components_lipschitz:
        failed[4] = "components not Lipschitz"
    elif has_boundary and not boundary_metric:
        failed[4] = "no boundary-adapted conformal metric"
    else:
        return {"case": 4, "failed": failed}
    return {"case": None, "failed": failed}


def constants_report(bounds: GeometricBounds, injrad_L: float | None = None, iso_c: float | None = None,
                     c1: float = 2.0 / math.pi, delta1: float = 0.1, case: int = 3) -> dict:
    """Every constant derivable from ``bounds`` together with its trace."""
    out = {"bounds": bounds.to_dict()}
    inj = geodesic_loop_bound(bounds)
    out["injectivity_radius_L"] = inj.to_dict()
    if injrad_L is None:
        injrad_L = inj.value
    delta = delta_threshold(bounds, injrad_L)
    out["delta"] = delta.to_dict()
    out["angle"] = angle_bound(bounds).to_dict()
    out["tube_width"] = tube_width_bound(bounds).to_dict()
    if iso_c is not None:
        iso = IsoperimetricData(iso_c, delta.value)
        out["thick_thin"] = thick_thin_constants(bounds, iso, c1, delta1, case).to_dict()
    else:
        out["c2"] = c2_for_setting(bounds.eps, case).to_dict()
    return out
