"""Energy measures of holomorphic curves and the inequalities they satisfy.

Domains are axisymmetric cylinders ``(rho, theta)`` with metric
``d rho^2 + h_theta(rho)^2 d theta^2`` and round disks given as Möbius images of
the unit disk.  Curves are holomorphic in the conformal coordinate of the domain.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import QuadratureError, RangeError, ThresholdError, ValidationError
from .tensor import ChartManifold, fd_derivative

QUAD_RTOL = 1e-8
MAX_CELLS = 2 ** 24


# ---------------------------------------------------------------------------
# quadrature

def _simpson_nodes(a, b, n):
    x = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * (b - a) / (3.0 * n)


def _simpson_2d(fn, xr, yr, nx, ny):
    x, wx = _simpson_nodes(*xr, nx)
    y, wy = _simpson_nodes(*yr, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return float(wx @ fn(X, Y) @ wy)


def adaptive_simpson_2d(fn: Callable, xr, yr, rtol: float = QUAD_RTOL, n0: int = 16) -> float:
    """Tensor Simpson rule refined per axis until doubling changes the total by < rtol."""
    nx = ny = n0
    I0 = _simpson_2d(fn, xr, yr, nx, ny)
    while True:
        if 2 * nx * 2 * ny > MAX_CELLS:
            raise QuadratureError(f"no convergence within {MAX_CELLS} cells (last total {I0})")
        Ix = _simpson_2d(fn, xr, yr, 2 * nx, ny)
        Iy = _simpson_2d(fn, xr, yr, nx, 2 * ny)
        scale = max(abs(I0), abs(Ix), abs(Iy), 1e-300)
        okx = abs(Ix - I0) <= rtol * scale
        oky = abs(Iy - I0) <= rtol * scale
        if okx and oky:
            return Ix if abs(Ix - I0) >= abs(Iy - I0) else Iy
        if not okx:
            nx *= 2
        if not oky:
            ny *= 2
        I0 = _simpson_2d(fn, xr, yr, nx, ny)


def _simpson_1d(fn, a, b, rtol=QUAD_RTOL, n0=64):
    n = n0
    x, w = _simpson_nodes(a, b, n)
    I0 = float(w @ fn(x))
    while n <= MAX_CELLS:
        n *= 2
        x, w = _simpson_nodes(a, b, n)
        I1 = float(w @ fn(x))
        if abs(I1 - I0) <= rtol * max(abs(I1), 1e-300):
            return I1
        I0 = I1
    raise QuadratureError("one-dimensional quadrature did not converge")


# ---------------------------------------------------------------------------
# domains

THETA_RANGE = {"closed": (0.0, 2 * math.pi), "half": (0.0, 2 * math.pi), "strip": (0.0, math.pi)}


@dataclass
class CylinderDomain:
    """Axisymmetric cylinder ``[a, b] x S^1`` (or a strip ``[a, b] x [0, pi]``).

    ``conformal_fn`` maps rho to a conformal coordinate s with ds = d rho / h_theta
    (any antiderivative).  It is computed by quadrature when omitted.
    """
    rho_range: tuple
    h_theta_fn: Callable = None
    boundary_type: str = "closed"
    conformal_fn: Callable | None = None
    conformal_inverse: Callable | None = None
    name: str = "cylinder"

    def __post_init__(self):
        a, b = (float(v) for v in self.rho_range)
        if not a < b:
            raise ValidationError(f"empty rho range {self.rho_range}")
        self.rho_range = (a, b)
        if self.boundary_type not in THETA_RANGE:
            raise ValidationError(f"unknown boundary type {self.boundary_type!r}")
        if self.h_theta_fn is None:
            self.h_theta_fn = np.ones_like
            self.conformal_fn = self.conformal_fn or (lambda r: np.asarray(r, dtype=float))
            self.conformal_inverse = self.conformal_inverse or (lambda s: np.asarray(s, dtype=float))
        probe = self.h_theta_fn(np.linspace(a, b, 257))
        if np.any(~(probe > 0)):
            raise ValidationError("profile h_theta must be positive on the rho range")

    @property
    def theta_range(self):
        return THETA_RANGE[self.boundary_type]

    def conformal(self, rho) -> np.ndarray:
        if self.conformal_fn is not None:
            return self.conformal_fn(rho)
        a = self.rho_range[0]
        f = lambda r: integrate.quad(lambda x: 1.0 / float(self.h_theta_fn(np.array(x))), a, r,
                                     epsabs=0, epsrel=1e-13, limit=200)[0]
        return a + np.vectorize(f)(np.asarray(rho, dtype=float))

    def rho_at(self, s) -> float:
        """Inverse of :meth:`conformal`."""
        if self.conformal_inverse is not None:
            return float(self.conformal_inverse(s))
        from scipy.optimize import brentq
        a, b = self.rho_range
        return brentq(lambda r: float(self.conformal(r)) - s, a, b, xtol=1e-14, rtol=1e-15)


def modulus(domain: CylinderDomain) -> float:
    """Integral of 1 / h_theta over the rho range; ``inf`` when it diverges."""
    a, b = domain.rho_range
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(lambda r: 1.0 / float(domain.h_theta_fn(np.array(r))), a, b,
                                    epsabs=0.0, epsrel=1e-12, limit=500)
        except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError):
            return math.inf
    return val if math.isfinite(val) else math.inf


def flat_cylinder(a: float, b: float, boundary_type: str = "closed") -> CylinderDomain:
    return CylinderDomain((a, b), None, boundary_type, name=f"flat[{a},{b}]")


def exponential_cylinder(a: float, b: float) -> CylinderDomain:
    return CylinderDomain((a, b), np.exp, "closed",
                          conformal_fn=lambda r: a + np.exp(-a) - np.exp(-np.asarray(r, dtype=float)),
                          conformal_inverse=lambda s: -np.log(np.exp(-a) + a - s),
                          name="exponential")


def fermi_collar(ell: float, T: float) -> CylinderDomain:
    """Collar around a closed hyperbolic geodesic of length ell, truncated at |rho| = T."""
    k = 2 * math.pi / ell
    s0 = -k * 2 * math.atan(math.tanh(T / 2))

    def s(r):
        return -T + k * 2 * np.arctan(np.tanh(np.asarray(r, dtype=float) / 2)) - s0

    def r_of(sv):
        return 2 * np.arctanh(np.tan((sv + T + s0) / (2 * k)))

    return CylinderDomain((-T, T), lambda r: np.cosh(r) / k, "closed", conformal_fn=s,
                          conformal_inverse=r_of, name="fermi_collar")


def sub_cylinder(domain: CylinderDomain, a: float, b: float | None = None, kind: str = "C") -> CylinderDomain:
    """Sub-cylinder in modulus coordinates.

    ``kind="S"`` is the part between modulus coordinates a and b; ``kind="C"`` trims
    a from the start and b from the end (``b`` defaults to ``a``).
    """
    mod = modulus(domain)
    if b is None:
        b = a
    if kind == "C":
        lo, hi = a, mod - b
    elif kind == "S":
        lo, hi = a, b
    else:
        raise ValidationError(f"unknown sub-cylinder kind {kind!r}")
    if not (0 <= lo < hi <= mod * (1 + 1e-14)):
        raise RangeError(f"modulus coordinates [{lo}, {hi}] not inside [0, {mod}]")
    s0 = float(domain.conformal(domain.rho_range[0]))
    r_lo = domain.rho_at(s0 + lo)
    r_hi = domain.rho_at(s0 + min(hi, mod))
    return CylinderDomain((r_lo, r_hi), domain.h_theta_fn, domain.boundary_type,
                          conformal_fn=domain.conformal_fn, conformal_inverse=domain.conformal_inverse,
                          name=f"{domain.name}[{lo:g},{hi:g}]")


@dataclass(frozen=True)
class DiskDomain:
    """Image of the unit disk under the Möbius map w -> (a w + b) / (c w + d)."""
    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.0
    d: complex = 1.0

    @classmethod
    def round(cls, center: complex = 0.0, radius: float = 1.0) -> "DiskDomain":
        return cls(radius, center, 0.0, 1.0)

    def to_domain(self, w):
        return (self.a * w + self.b) / (self.c * w + self.d)

    def from_domain(self, z):
        return (self.d * z - self.b) / (-self.c * z + self.a)

    def to_domain_derivative(self, w):
        det = self.a * self.d - self.b * self.c
        return det / (self.c * w + self.d) ** 2

    def contains(self, z) -> bool:
        return bool(abs(self.from_domain(z)) < 1.0)


def conformal_radius(disk: DiskDomain, z: complex, conformal_factor: Callable | float = 1.0) -> float:
    """1 / |d phi(z)|_h for the biholomorphism phi onto the unit disk sending z to 0."""
    if not disk.contains(z):
        raise RangeError(f"point {z} is outside the disk")
    lam = conformal_factor(z) if callable(conformal_factor) else conformal_factor
    if not lam > 0:
        raise ValidationError("conformal factor must be positive")
    w = disk.from_domain(z)
    return float(lam * (1.0 - abs(w) ** 2) * abs(disk.to_domain_derivative(w)))


# ---------------------------------------------------------------------------
# curves and energy

@dataclass
class HolomorphicCurve:
    """Holomorphic map of a complex coordinate.

    With ``target=None`` the values are complex vectors in C^n with the standard
    symplectic form; otherwise real chart coordinates on ``target``.
    """
    map_fn: Callable
    derivative_fn: Callable | None = None
    target: ChartManifold | None = None
    name: str = "curve"
    params: dict = field(default_factory=dict)

    def __call__(self, w):
        return np.asarray(self.map_fn(np.asarray(w, dtype=complex)))

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        if self.derivative_fn is not None:
            return np.asarray(self.derivative_fn(w), dtype=complex)
        h = 1e-5
        return (self.map_fn(w - 2 * h) - 8 * self.map_fn(w - h) + 8 * self.map_fn(w + h)
                - self.map_fn(w + 2 * h)) / (12 * h)

    def cauchy_riemann_residual(self, w) -> float:
        """Max |u_y - i u_x| over the points, from finite differences of ``map_fn``."""
        w = np.asarray(w, dtype=complex).ravel()
        h = 1e-4
        ux = (self.map_fn(w + h) - self.map_fn(w - h)) / (2 * h)
        uy = (self.map_fn(w + 1j * h) - self.map_fn(w - 1j * h)) / (2 * h)
        return float(np.max(np.abs(uy - 1j * ux)))


def _partials_complex(curve: HolomorphicCurve, w):
    du = curve.derivative(w)
    if du.ndim == w.ndim:
        du = du[..., None]
    return du, 1j * du


def _densities(curve: HolomorphicCurve, W):
    """(half |du|^2, u^* omega) densities with respect to ds dtheta at conformal points W."""
    if curve.target is None:
        us, ut = _partials_complex(curve, W)
        half = 0.5 * np.sum(np.abs(us) ** 2 + np.abs(ut) ** 2, axis=-1)
        pull = np.sum(us.real * ut.imag - us.imag * ut.real, axis=-1)
        return half, pull
    M = curve.target
    flat = W.ravel()
    Y = np.stack([flat.real, flat.imag], -1)
    fn = lambda P: np.asarray(curve.map_fn(P[..., 0] + 1j * P[..., 1]), dtype=float)
    X = fn(Y)
    D = fd_derivative(fn, Y, 1e-4, order=4)
    us, ut = D[..., 0], D[..., 1]
    g = M.metric(X)
    om = M.omega(X)
    half = 0.5 * (np.einsum("ni,nij,nj->n", us, g, us) + np.einsum("ni,nij,nj->n", ut, g, ut))
    pull = np.einsum("ni,nij,nj->n", us, om, ut)
    return half.reshape(W.shape), pull.reshape(W.shape)


def energy_measure(curve: HolomorphicCurve, region, rtol: float = QUAD_RTOL) -> dict:
    """Energy of ``curve`` on a cylinder region or a disk, by both the Dirichlet and the
    pullback integrands."""
    out = {}
    for kind, idx in (("dirichlet", 0), ("pullback", 1)):
        if isinstance(region, CylinderDomain):
            def fn(R, T, idx=idx):
                W = region.conformal(R) + 1j * T
                # d rho d theta = h_theta ds d theta
                return _densities(curve, W)[idx] / region.h_theta_fn(R)
            out[kind] = adaptive_simpson_2d(fn, region.rho_range, region.theta_range, rtol)
        elif isinstance(region, DiskDomain):
            def fn(r, t, idx=idx):
                w = r * np.exp(1j * t)
                z = region.to_domain(w)
                jac = np.abs(region.to_domain_derivative(w)) ** 2
                return _densities(curve, z)[idx] * jac * r
            out[kind] = adaptive_simpson_2d(fn, (0.0, 1.0), (0.0, 2 * math.pi), rtol)
        else:
            raise ValidationError(f"unsupported region {region!r}")
    out["defect"] = abs(out["dirichlet"] - out["pullback"])
    return out


@dataclass
class EnergyField:
    """Energy density with respect to the area form of a cylinder domain."""
    domain: CylinderDomain
    density_fn: Callable
    name: str = "field"
    _total: float | None = field(default=None, repr=False)

    @classmethod
    def from_curve(cls, curve: HolomorphicCurve, domain: CylinderDomain) -> "EnergyField":
        def dens(R, T):
            # density w.r.t. nu_h = h_theta^2 ds d theta
            return _densities(curve, domain.conformal(R) + 1j * T)[1] / domain.h_theta_fn(R) ** 2
        return cls(domain, dens, name=curve.name)

    def density(self, rho, theta):
        return self.density_fn(np.asarray(rho, dtype=float), np.asarray(theta, dtype=float))

    def measure(self, rho_lo: float | None = None, rho_hi: float | None = None, rtol: float = QUAD_RTOL) -> float:
        a, b = self.domain.rho_range
        lo = a if rho_lo is None else rho_lo
        hi = b if rho_hi is None else rho_hi
        if hi <= lo:
            return 0.0
        fn = lambda R, T: self.density_fn(R, T) * self.domain.h_theta_fn(R)
        return adaptive_simpson_2d(fn, (lo, hi), self.domain.theta_range, rtol)

    @property
    def total(self) -> float:
        if self._total is None:
            self._total = self.measure()
        return self._total

    def cylinder_measure(self, t: float) -> float:
        """mu(C(t, t)) for the domain of this field."""
        sub = sub_cylinder(self.domain, t)
        return self.measure(*sub.rho_range)

    def boundary_flux(self, t: float) -> float:
        """-d/dt mu(C(t, t)): the density integrated over both boundary circles in
        modulus coordinates."""
        sub = sub_cylinder(self.domain, t)
        tot = 0.0
        for r in sub.rho_range:
            h = float(self.domain.h_theta_fn(np.array(r)))
            # d mu / ds = h_theta^2 * density integrated over theta
            tot += h * h * _simpson_1d(lambda th: self.density_fn(np.full_like(th, r), th),
                                       *self.domain.theta_range)
        return tot


def reflect_measure(fld: EnergyField) -> EnergyField:
    """Even extension of a field on a strip or half cylinder to the doubled cylinder."""
    dom = fld.domain
    if dom.boundary_type == "closed":
        warnings.warn("closed domain: reflection is the identity", stacklevel=2)
        return fld
    f = fld.density_fn
    if dom.boundary_type == "strip":
        def dens(R, T):
            T = np.asarray(T)
            return np.where(T <= math.pi, f(R, np.minimum(T, math.pi)), f(R, 2 * math.pi - np.maximum(T, math.pi)))
        new = CylinderDomain(dom.rho_range, dom.h_theta_fn, "closed", dom.conformal_fn, dom.conformal_inverse,
                             name=dom.name + "_doubled")
        return EnergyField(new, dens, name=fld.name + "_doubled")
    a, b = dom.rho_range
    h = dom.h_theta_fn

    def mirror(R):
        return np.where(R >= a, R, 2 * a - R)

    def dens(R, T):
        return f(mirror(R), T)

    new = CylinderDomain((2 * a - b, b), lambda R: h(mirror(R)), "closed", name=dom.name + "_doubled")
    if dom.conformal_fn is not None:
        off = float(dom.conformal(b)) - b

        def s_new(R):
            R = np.asarray(R, dtype=float)
            return np.where(R >= a, dom.conformal(mirror(R)), 2 * a - dom.conformal(mirror(R))) + off

        new.conformal_fn = s_new
        if dom.conformal_inverse is not None:
            def r_new(sv):
                sig = sv - off
                return dom.conformal_inverse(sig) if sig >= a else 2 * a - dom.conformal_inverse(2 * a - sig)
            new.conformal_inverse = r_new
    return EnergyField(new, dens, name=fld.name + "_doubled")


# ---------------------------------------------------------------------------
# gradient inequality

def curve_density(curve: HolomorphicCurve, z: complex, conformal_factor: Callable | float = 1.0) -> float:
    """d mu / d nu_h at z for the metric h = lambda^2 |dz|^2."""
    lam = conformal_factor(z) if callable(conformal_factor) else conformal_factor
    _, pull = _densities(curve, np.array([z], dtype=complex))
    return float(pull[0]) / lam ** 2


def check_gradient_inequality(pairs, c1: float = 2.0 / math.pi, delta1: float = 0.1,
                              conformal_factor: Callable | float = 1.0) -> dict:
    """``pairs`` is a list of (curve, disk, z).  The implication mu(U) < delta1 =>
    density(z) <= c1 mu(U) / r_conf^2 is checked per pair."""
    rows = []
    measured = 0.0
    ok = True
    for curve, disk, z in pairs:
        mu = energy_measure(curve, disk)["pullback"]
        dens = curve_density(curve, z, conformal_factor)
        r = conformal_radius(disk, z, conformal_factor)
        rhs = c1 * mu / r ** 2
        small = mu < delta1
        row = {"curve": curve.name, "z": [z.real, z.imag], "mu": mu, "density": dens, "r_conf": r,
               "lhs": dens, "rhs": rhs, "margin": rhs - dens if dens > 0 else math.inf, "small_energy": small}
        if small:
            ok &= dens <= rhs
            if mu > 0:
                measured = max(measured, dens * r * r / mu)
        rows.append(row)
    return {"rows": rows, "c1": c1, "delta1": delta1, "measured_c1": measured, "passed": bool(ok),
            "coverage": len(rows)}


# ---------------------------------------------------------------------------
# symplectic action and isoperimetry

@dataclass
class Loop:
    """Closed (or, with ``closed=False``, open) curve parametrised on [0, 1].

    ``fn`` returns complex C^n values (shape (N, n)) or real chart coordinates when
    ``target`` is given.
    """
    fn: Callable
    derivative_fn: Callable | None = None
    closed: bool = True
    target: ChartManifold | None = None
    name: str = "loop"


def _loop_samples(loop: Loop, n: int):
    if loop.closed:
        tau = np.arange(n) / n
        w = np.full(n, 1.0 / n)
    else:
        tau, w = _simpson_nodes(0.0, 1.0, n)
    P = np.asarray(loop.fn(tau))
    if P.ndim == 1:
        P = P[:, None]
    if loop.derivative_fn is not None:
        D = np.asarray(loop.derivative_fn(tau))
        D = D[:, None] if D.ndim == 1 else D
    elif loop.closed:
        k = np.fft.fftfreq(n, 1.0 / n)
        D = np.fft.ifft(2j * math.pi * k[:, None] * np.fft.fft(P, axis=0), axis=0)
        if not np.iscomplexobj(P):
            D = D.real
    else:
        D = np.gradient(P, tau, axis=0, edge_order=2)
    return tau, w, P, D


def loop_length(loop: Loop, n: int = 4096) -> float:
    _, w, P, D = _loop_samples(loop, n)
    if loop.target is None:
        speed = np.sqrt(np.sum(np.abs(D) ** 2, axis=1))
    else:
        g = loop.target.metric(P.real)
        speed = np.sqrt(np.einsum("ni,nij,nj->n", D.real, g, D.real))
    return float(w @ speed)


def _flat_area(P, D, w) -> float:
    # sum over factors of 1/2 (x dy - y dx)
    x, y = P.real, P.imag
    dx, dy = D.real, D.imag
    return float(w @ np.sum(0.5 * (x * dy - y * dx), axis=1))


def _cone_area(M: ChartManifold, P, D, w, n_s: int = 32) -> float:
    """Integral of omega over the chart-linear cone from the loop's centroid."""
    c = P.mean(axis=0)
    s, ws = np.polynomial.legendre.leggauss(n_s)
    s = 0.5 * (s + 1)
    ws = 0.5 * ws
    total = 0.0
    for sk, wk in zip(s, ws):
        X = c + sk * (P - c)
        om = M.omega(X)
        # d/ds = P - c, d/dtau = s D
        total += wk * float(w @ np.einsum("ni,nij,nj->n", P - c, om, sk * D))
    return total


def symplectic_action(loop: Loop, iso=None, closing: Loop | None = None, n: int = 4096) -> float:
    """a(loop) = - integral of omega over a cap.

    An open loop must end on a Lagrangian; ``closing`` is a path inside it from the
    end point back to the start.  For loops in C^n ending on R^n the straight segment
    contributes nothing and may be omitted.
    """
    if iso is not None:
        ell = loop_length(loop, n)
        if not ell < iso.delta:
            raise ThresholdError(f"loop length {ell} is not below the threshold {iso.delta}")
    _, w, P, D = _loop_samples(loop, n)
    if loop.target is None:
        area = _flat_area(P, D, w)
        if not loop.closed and closing is not None:
            _, w2, P2, D2 = _loop_samples(closing, n)
            area += _flat_area(P2, D2, w2)
        elif not loop.closed and np.max(np.abs(np.concatenate([P[0].imag, P[-1].imag]))) > 1e-12:
            raise ValidationError("open loop in C^n must end on R^n or come with a closing path")
        return -area
    if not loop.closed:
        if closing is None:
            raise ValidationError("open loop needs a closing path along the Lagrangian")
        _, w2, P2, D2 = _loop_samples(closing, n)
        w = np.concatenate([w, w2])
        P = np.concatenate([P, P2])
        D = np.concatenate([D, D2])
    return -_cone_area(loop.target, P.real, D.real, w)


def check_isoperimetric(loops, iso, n: int = 4096) -> dict:
    rows = []
    measured = 0.0
    ok = True
    for lp in loops:
        ell = loop_length(lp, n)
        a = abs(symplectic_action(lp, None, n=n)) if ell < iso.delta else math.nan
        bound = iso.c * ell * ell
        row = {"loop": lp.name, "length": ell, "abs_action": a, "bound": bound}
        if ell < iso.delta:
            row["margin"] = bound - a
            ok &= a <= bound * (1 + 1e-12)
            if ell > 0:
                measured = max(measured, a / ell ** 2)
        rows.append(row)
    return {"rows": rows, "c": iso.c, "measured_c": measured, "passed": bool(ok)}


# ---------------------------------------------------------------------------
# cylinder inequality

def check_cylinder_inequality(fld: EnergyField, constants, t_grid=None, n_t: int = 25,
                              csv_path=None, fit_margin: float = 1.0, iso_c: float | None = None) -> dict:
    """mu(C(t, t)) <= exp(-c3 t) E for t in (c2, Mod/2).

    ``constants`` needs attributes c2, c3 and delta2.  The decay exponent is fitted by
    least squares on log mu(C(t, t)) for t <= Mod/2 - ``fit_margin``.  With ``iso_c`` the
    differential inequality eps(t) <= -2 pi c eps'(t) is also checked.
    """
    E = fld.total
    mod = modulus(fld.domain)
    report = {"E": E, "modulus": mod, "c2": constants.c2, "c3": constants.c3, "delta2": constants.delta2}
    notes = []
    if not E < constants.delta2:
        notes.append("energy not below delta2: inequality vacuous")
    if not mod > 2 * constants.c2:
        notes.append("modulus not above 2 c2: inequality vacuous")
    if t_grid is None:
        t_grid = np.linspace(constants.c2, 0.5 * mod, n_t + 2)[1:-1]
    rows = []
    ok = True
    for t in np.asarray(t_grid, dtype=float):
        mu = fld.cylinder_measure(float(t))
        bound = math.exp(-constants.c3 * t) * E
        row = {"t": float(t), "mu": mu, "bound": bound, "margin": bound - mu}
        if iso_c is not None:
            flux = fld.boundary_flux(float(t))
            rhs = 2 * math.pi * iso_c * flux
            row["flux"] = flux
            row["differential_margin"] = rhs - mu
            row["differential_ok"] = bool(mu <= rhs * (1 + 10 * QUAD_RTOL))
        ok &= mu <= bound * (1 + 10 * QUAD_RTOL)
        rows.append(row)
    fit = [(r["t"], r["mu"]) for r in rows if r["t"] <= 0.5 * mod - fit_margin and r["mu"] > 0]
    if len(fit) >= 2:
        ts, mus = np.array(fit).T
        report["fitted_exponent"] = float(-np.polyfit(ts, np.log(mus), 1)[0])
    else:
        report["fitted_exponent"] = None
    report["rows"] = rows
    report["notes"] = notes
    report["passed"] = bool(ok) if not notes else True
    report["checked"] = not notes
    if iso_c is not None:
        report["differential_passed"] = all(r["differential_ok"] for r in rows)
    if csv_path is not None:
        write_decay_csv(rows, csv_path)
    return report


def write_decay_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mu", "bound"])
        for r in rows:
            w.writerow([repr(r["t"]), repr(r["mu"]), repr(r["bound"])])


# ---------------------------------------------------------------------------
# modulus bounds

def hyperbolic_modulus_bound(ell: float, T: float = 40.0) -> dict:
    """Modulus bound for the collar of a closed geodesic of length ell.

    ``stated`` is 1 / (2 ell); ``collar_quadrature`` integrates 1 / h_theta for the
    Fermi profile (ell / 2 pi) cosh(rho), which tends to 2 pi^2 / ell.
    """
    if not ell > 0:
        raise ValidationError("geodesic length must be positive")
    quad = modulus(fermi_collar(ell, T))
    return {"stated": 1.0 / (2.0 * ell), "collar_quadrature": quad,
            "collar_closed_form": 2 * math.pi ** 2 / ell, "ratio": quad * 2.0 * ell}


def flat_modulus_chain(area: float, ell: float, eps: float) -> dict:
    """Mod <= 2 pi Area / ell^2 <= 2 pi / ell^2 = pi / (2 d^2) <= pi / (2 eps^2), with ell = 2 d."""
    d = ell / 2.0
    return {"annulus": 2 * math.pi * area / ell ** 2, "unit_area": 2 * math.pi / ell ** 2,
            "distance_form": math.pi / (2 * d * d), "lipschitz_form": math.pi / (2 * eps * eps)}


# ---------------------------------------------------------------------------
# catalog

def decaying_cylinder_curve(eps: float = 1e-6) -> HolomorphicCurve:
    return HolomorphicCurve(lambda z: eps * np.exp(-z), lambda z: -eps * np.exp(-z),
                            name="eps_exp_minus_z", params={"eps": eps})


def polynomial_curve(coeffs, name: str | None = None) -> HolomorphicCurve:
    """u(z) = sum_k coeffs[k] z^k in C."""
    c = np.asarray(coeffs, dtype=complex)
    dc = c[1:] * np.arange(1, len(c))
    return HolomorphicCurve(lambda z: np.polyval(c[::-1], z), lambda z: np.polyval(dc[::-1], z),
                            name=name or f"poly{len(c) - 1}", params={"coeffs": [[x.real, x.imag] for x in c]})


def exponential_curve(scale: complex, rate: complex, name: str = "exp") -> HolomorphicCurve:
    return HolomorphicCurve(lambda z: scale * np.exp(rate * z), lambda z: scale * rate * np.exp(rate * z),
                            name=name, params={"scale": [complex(scale).real, complex(scale).imag],
                                               "rate": [complex(rate).real, complex(rate).imag]})


def flat_disk_family(n: int = 20, scale: float = 0.1, seed: int = 0):
    """(curve, disk, z) triples of small flat holomorphic disks for the gradient check."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        coeffs = scale * (rng.normal(size=4) + 1j * rng.normal(size=4)) / (1 + np.arange(4))
        if k % 4 == 3:
            curve = exponential_curve(scale * (0.5 + 0.1j), complex(rng.normal(), rng.normal()), name=f"exp{k}")
        else:
            curve = polynomial_curve(coeffs, name=f"poly{k}")
        center = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        radius = float(rng.uniform(0.3, 1.0))
        disk = DiskDomain.round(center, radius)
        z = center + radius * 0.6 * rng.uniform() * complex(math.cos(k), math.sin(k))
        out.append((curve, disk, z))
    return out


def circle_loop(r: float = 1.0, center: complex = 0.0) -> Loop:
    return Loop(lambda t: (center + r * np.exp(2j * math.pi * t))[:, None],
                lambda t: (2j * math.pi * r * np.exp(2j * math.pi * t))[:, None], name=f"circle{r:g}")


def ellipse_loop(a: float, b: float) -> Loop:
    return Loop(lambda t: (a * np.cos(2 * math.pi * t) + 1j * b * np.sin(2 * math.pi * t))[:, None],
                name=f"ellipse{a:g}x{b:g}")


def upper_semicircle(r: float = 1.0) -> Loop:
    """Half loop from r to -r through i r; both ends lie on R."""
    return Loop(lambda t: (r * np.exp(1j * math.pi * t))[:, None],
                lambda t: (1j * math.pi * r * np.exp(1j * math.pi * t))[:, None], closed=False,
                name=f"semicircle{r:g}")


def point_loop(p: complex = 0.0) -> Loop:
    return Loop(lambda t: np.full((len(t), 1), p, dtype=complex), lambda t: np.zeros((len(t), 1), dtype=complex),
                name="point")


CURVES = {
    "eps_exp_minus_z": {"factory": decaying_cylinder_curve, "params": {"eps": "float, default 1e-6"}},
    "polynomial": {"factory": polynomial_curve, "params": {"coeffs": "list of complex coefficients"}},
    "exponential": {"factory": exponential_curve, "params": {"scale": "complex", "rate": "complex"}},
    "flat_disk_family": {"factory": flat_disk_family, "params": {"n": "int", "scale": "float", "seed": "int"}},
}
