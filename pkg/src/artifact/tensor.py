"""Chart-based tensor calculus with finite-difference derivatives.

All component functions are *batched*: they accept an array of shape
``(..., dim)`` and return components with the leading batch axes preserved.
Tensor component arrays list contravariant indices first, then covariant
ones; derivative indices produced by this module are appended last.

Curvature convention: ``R(V, W)Z = nabla_V nabla_W Z - nabla_W nabla_V Z -
nabla_[V,W] Z`` with components ``R[a, b, c, d]`` such that
``(R(V, W)Z)^a = R[a, b, c, d] Z^b V^c W^d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import (
    BoundaryProximityError,
    IllConditionedPairError,
    NonTameError,
    NotPositiveDefiniteError,
    UnsupportedOrderError,
    ValidationError,
)

SPD_FLOOR = 1e-10
COND_LIMIT = 1e8

_STENCIL2 = ((-1.0, -0.5), (1.0, 0.5))
_STENCIL4 = ((-2.0, 1.0 / 12.0), (-1.0, -8.0 / 12.0), (1.0, 8.0 / 12.0), (2.0, -1.0 / 12.0))


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    periodic: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _axes(box) -> tuple[Axis, ...]:
    out = []
    for ax in box:
        if isinstance(ax, Axis):
            out.append(ax)
        else:
            out.append(Axis(float(ax[0]), float(ax[1]), bool(ax[2]) if len(ax) > 2 else False))
    return tuple(out)


def fd_derivative(fn: Callable, X, step: float, order: int = 2) -> np.ndarray:
    """Central difference of a batched function; derivative axis appended last.

    ``X`` has shape ``(N, d)``; ``fn`` maps ``(M, d)`` to ``(M, ...)``.
    ``order`` selects the 3-point (2) or 5-point (4) stencil.  The step is
    rounded to a power of two so that the stencil offsets add to X exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    step = 2.0 ** round(math.log2(step))
    N, d = X.shape
    stencil = _STENCIL4 if order == 4 else _STENCIL2
    E = np.eye(d) * step
    pts = np.stack([X[:, None, :] + c * E[None, :, :] for c, _ in stencil])
    vals = np.asarray(fn(pts.reshape(-1, d)))
    vals = vals.reshape((len(stencil), N, d) + vals.shape[1:])
    # the weights sum to zero; differencing against one stencil value first keeps
    # affine functions exact
    acc = sum(w * (vals[i] - vals[0]) for i, (_, w) in enumerate(stencil)) / step
    return np.moveaxis(acc, 1, -1)


class ChartManifold:
    """Single-chart manifold: metric, optional symplectic form and almost complex structure.

    ``box`` lists one ``(lo, hi[, periodic])`` entry per axis. ``fd_step``
    defaults to 1e-4 of the narrowest box width.
    """

    def __init__(self, dim: int, box, metric_fn: Callable, omega_fn: Callable | None = None,
                 J_fn: Callable | None = None, fd_step: float | None = None, name: str = "chart",
                 params: dict | None = None, validate: bool = True):
        self.dim = int(dim)
        self.box = _axes(box)
        if len(self.box) != self.dim:
            raise ValidationError("box must have one axis per dimension")
        self.metric_fn = metric_fn
        self.omega_fn = omega_fn
        self.J_fn = J_fn
        widths = [ax.width for ax in self.box]
        self.fd_step = float(fd_step) if fd_step is not None else 1e-4 * min(widths)
        if self.fd_step <= 0:
            raise ValidationError("fd_step must be positive")
        self.name = name
        self.params = dict(params or {})
        if validate:
            self.validate(self.sample_points(16))

    def with_fd_step(self, fd_step: float) -> "ChartManifold":
        return ChartManifold(self.dim, self.box, self.metric_fn, self.omega_fn, self.J_fn,
                             fd_step, self.name, self.params, validate=False)

    # evaluation -----------------------------------------------------------------
    def metric(self, X) -> np.ndarray:
        return np.asarray(self.metric_fn(np.asarray(X, dtype=float)), dtype=float)

    def omega(self, X) -> np.ndarray:
        if self.omega_fn is None:
            raise ValidationError(f"{self.name} carries no symplectic form")
        return np.asarray(self.omega_fn(np.asarray(X, dtype=float)), dtype=float)

    def J(self, X) -> np.ndarray:
        if self.J_fn is None:
            raise ValidationError(f"{self.name} carries no almost complex structure")
        return np.asarray(self.J_fn(np.asarray(X, dtype=float)), dtype=float)

    def sample_points(self, n: int, margin: float = 0.0, window=None) -> np.ndarray:
        """Deterministic Halton points inside the box (shrunk by ``margin``)."""
        axes = _axes(window) if window is not None else self.box
        lo = np.array([a.lo + (0.0 if a.periodic else margin) for a in axes])
        hi = np.array([a.hi - (0.0 if a.periodic else margin) for a in axes])
        u = qmc.Halton(d=self.dim, scramble=False).random(n + 1)[1:]
        return lo + u * (hi - lo)

    def validate(self, X) -> None:
        X = np.atleast_2d(X)
        g = self.metric(X)
        if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > 1e-12:
            raise ValidationError("metric components are not symmetric")
        eig = np.linalg.eigvalsh(g)
        bad = np.argmin(eig[:, 0])
        if eig[bad, 0] <= SPD_FLOOR:
            raise NotPositiveDefiniteError(f"metric not positive definite at {X[bad].tolist()}")
        if self.J_fn is not None:
            J = self.J(X)
            if np.max(np.abs(J @ J + np.eye(self.dim))) > 1e-10:
                raise ValidationError("J does not square to -Id")
        if self.omega_fn is not None:
            w = self.omega(X)
            if np.max(np.abs(w + np.swapaxes(w, -1, -2))) > 1e-12:
                raise ValidationError("omega components are not antisymmetric")

    def check_margin(self, X, reach: float) -> None:
        X = np.atleast_2d(X)
        for k, ax in enumerate(self.box):
            if ax.periodic:
                continue
            if np.any(X[:, k] - ax.lo < reach) or np.any(ax.hi - X[:, k] < reach):
                raise BoundaryProximityError(
                    f"point within {reach:.3g} of the boundary of axis {k} of {self.name}")

    def inside(self, x) -> bool:
        return all(ax.periodic or ax.lo < xi < ax.hi for ax, xi in zip(self.box, x))


@dataclass
class TensorField:
    """Components with ``valence = (covariant, contravariant)``; contravariant axes first."""
    valence: tuple[int, int]
    component_fn: Callable
    dim: int

    def __call__(self, X) -> np.ndarray:
        return np.asarray(self.component_fn(np.asarray(X, dtype=float)))

    def evaluate(self, point) -> np.ndarray:
        val = self(np.atleast_2d(point))[0]
        r, s = self.valence
        if val.shape != (self.dim,) * (r + s):
            raise ValidationError(f"component shape {val.shape} does not match valence {self.valence}")
        return val


# ---------------------------------------------------------------------------
# metric from omega and J

def metric_from_omega_J(omega_fn: Callable, J_fn: Callable) -> Callable:
    """Return the batched metric ``g(v, w) = (omega(v, Jw) + omega(w, Jv)) / 2``."""

    def g(X):
        X = np.asarray(X, dtype=float)
        W = np.asarray(omega_fn(X), dtype=float)
        J = np.asarray(J_fn(X), dtype=float)
        WJ = W @ J
        out = 0.5 * (WJ + np.swapaxes(WJ, -1, -2))
        eig = np.linalg.eigvalsh(out)
        low = eig[..., 0]
        if np.any(low <= 0):
            flat = low.reshape(-1)
            k = int(np.argmin(flat))
            pts = X.reshape(-1, X.shape[-1])
            raise NonTameError(pts[k], float(flat[k]))
        return out

    return g


# ---------------------------------------------------------------------------
# connection and curvature

def christoffel_batch(manifold: ChartManifold, X, metric_fn: Callable | None = None) -> np.ndarray:
    """Gamma[n, m, i, j] = Gamma^m_{ij} at each row of X."""
    metric = metric_fn or manifold.metric
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g = metric(X)
    dg = fd_derivative(metric, X, manifold.fd_step, order=4)
    a1 = np.swapaxes(dg, 2, 3)
    a3 = np.transpose(dg, (0, 3, 1, 2))
    N, d = X.shape
    rhs = (a1 + dg - a3).reshape(N, d, d * d)
    return 0.5 * (_inv(g) @ rhs).reshape(N, d, d, d)


def _inv(g: np.ndarray) -> np.ndarray:
    """Batched inverse with a closed form for 2x2 blocks."""
    if g.shape[-1] == 2:
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]
        out = np.empty_like(g)
        out[..., 0, 0] = g[..., 1, 1]
        out[..., 1, 1] = g[..., 0, 0]
        out[..., 0, 1] = -g[..., 0, 1]
        out[..., 1, 0] = -g[..., 1, 0]
        return out / det[..., None, None]
    return np.linalg.inv(g)


def christoffel(manifold: ChartManifold, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    manifold.check_margin(point, 2 * manifold.fd_step)
    return christoffel_batch(manifold, point[None])[0]


def riemann_batch(manifold: ChartManifold, X, metric_fn: Callable | None = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))

    def gam(Y):
        return christoffel_batch(manifold, Y, metric_fn)

    G = gam(X)
    dG = fd_derivative(gam, X, manifold.fd_step, order=2)
    return (np.einsum("nadbc->nabcd", dG) - np.einsum("nacbd->nabcd", dG)
            + np.einsum("nace,nedb->nabcd", G, G) - np.einsum("nade,necb->nabcd", G, G))


def riemann_curvature(manifold: ChartManifold, point) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    manifold.check_margin(point, 3 * manifold.fd_step)
    return riemann_batch(manifold, point[None])[0]


def sectional_curvature(manifold: ChartManifold, point, u, v, R=None) -> float:
    point = np.asarray(point, dtype=float)
    R = riemann_curvature(manifold, point) if R is None else R
    g = manifold.metric(point[None])[0]
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Ruvv = np.einsum("abcd,b,c,d->a", R, v, u, v)
    num = u @ g @ Ruvv
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return float(num / den)


def riemann_field(manifold: ChartManifold, metric_fn: Callable | None = None) -> TensorField:
    return TensorField((3, 1), lambda X: riemann_batch(manifold, X, metric_fn), manifold.dim)


# ---------------------------------------------------------------------------
# covariant derivatives and norms

def covariant_derivative(manifold: ChartManifold, tf: TensorField) -> TensorField:
    """Levi-Civita derivative of ``tf``; the new covariant index is appended last."""
    r, s = tf.valence
    step = manifold.fd_step

    def comp(X):
        X = np.atleast_2d(X)
        T = tf(X)
        dT = fd_derivative(tf, X, step, order=2)
        G = christoffel_batch(manifold, X)
        out = dT.copy()
        rank = r + s
        for p in range(rank):
            ax = 1 + p
            # bring the slot to the end, contract with Gamma, move back
            Tm = np.moveaxis(T, ax, -1)
            if p < s:
                term = np.einsum("n...m,namk->n...ka", Tm, G)
                term = np.moveaxis(term, -1, ax)
                out = out + term
            else:
                term = np.einsum("n...m,nmkb->n...kb", Tm, G)
                term = np.moveaxis(term, -1, ax)
                out = out - term
        return out

    return TensorField((r + 1, s), comp, tf.dim)


def pointwise_norm(metric: np.ndarray, T: np.ndarray, valence: tuple[int, int]) -> float:
    r, s = valence
    L = np.linalg.cholesky(metric)
    E = np.linalg.inv(L).T
    out = np.asarray(T, dtype=float)
    for p in range(r + s):
        M = L.T if p < s else E.T
        out = np.moveaxis(np.tensordot(M, out, axes=([1], [p])), 0, p)
    return float(np.sqrt(np.sum(out * out)))


def tensor_norm_parts(manifold: ChartManifold, tf: TensorField, point, m: int) -> list[float]:
    if m > 2:
        raise UnsupportedOrderError("tensor norms beyond second order are not supported")
    if m < 0:
        raise ValidationError("order must be nonnegative")
    point = np.asarray(point, dtype=float)
    if m > 0:
        manifold.check_margin(point, (m + 1) * manifold.fd_step)
    g = manifold.metric(point[None])[0]
    parts = []
    cur = tf
    for i in range(m + 1):
        parts.append(pointwise_norm(g, cur(point[None])[0], cur.valence))
        if i < m:
            cur = covariant_derivative(manifold, cur)
    return parts


def tensor_norm(manifold: ChartManifold, tf: TensorField, point, m: int) -> float:
    """Sum over i <= m of the pointwise norm of the i-th covariant derivative."""
    return float(sum(tensor_norm_parts(manifold, tf, point, m)))


def sampled_sup_norm(manifold: ChartManifold, tf: TensorField, m: int, n_samples: int = 64,
                     window=None) -> dict:
    """Sampled supremum over a Halton sweep; never claims a true supremum."""
    margin = (m + 2) * manifold.fd_step
    pts = manifold.sample_points(n_samples, margin=margin, window=window)
    vals = np.array([tensor_norm(manifold, tf, p, m) for p in pts])
    k = int(np.argmax(vals))
    return {"value": float(vals[k]), "samples": int(n_samples), "argmax": pts[k].tolist(),
            "kind": "sampled sup"}


# ---------------------------------------------------------------------------
# metric pairs

class MetricPair:
    """Two metrics on one chart with ``h(v, w) = g(Av, w)``."""

    def __init__(self, g: ChartManifold, h: ChartManifold, A_fn: Callable | None = None):
        if g.dim != h.dim:
            raise ValidationError("metrics must live on the same chart")
        self.g = g
        self.h = h
        self.A_fn = A_fn or (lambda X: np.linalg.solve(g.metric(X), h.metric(X)))

    def A(self, X) -> np.ndarray:
        return np.asarray(self.A_fn(np.asarray(X, dtype=float)))

    def check(self, X) -> None:
        X = np.atleast_2d(X)
        A = self.A(X)
        gm = self.g.metric(X)
        hm = self.h.metric(X)
        scale = max(1.0, float(np.max(np.abs(hm))))
        if np.max(np.abs(gm @ A - hm)) > 1e-10 * scale:
            raise ValidationError("g(A., .) does not reproduce h")
        cond = np.linalg.cond(A)
        if np.any(cond > COND_LIMIT):
            raise IllConditionedPairError(f"A is ill-conditioned (cond {float(np.max(cond)):.3e})")


def _nabla_A(pair: MetricPair, X) -> np.ndarray:
    g = pair.g
    A = pair.A(X)
    dA = fd_derivative(pair.A, X, g.fd_step, order=4)
    G = christoffel_batch(g, X)
    return dA + np.einsum("nikm,nmj->nijk", G, A) - np.einsum("nmkj,nim->nijk", G, A)


def connection_difference_field(pair: MetricPair) -> TensorField:
    """H = nabla^g - nabla^h from derivatives of A alone; components H[m, i, j]."""

    def comp(X):
        X = np.atleast_2d(X)
        gm = pair.g.metric(X)
        hm = np.einsum("nij,njk->nik", gm, pair.A(X))
        nA = _nabla_A(pair, X)
        low = np.einsum("nam,nmbk->nabk", gm, nA)       # g((nabla_k A) e_b, e_a)
        T = -0.5 * (np.einsum("nikj->nijk", low) + np.einsum("njki->nijk", low)
                    - np.einsum("njik->nijk", low))
        return np.einsum("nmk,nijk->nmij", np.linalg.inv(hm), T)

    return TensorField((2, 1), comp, pair.g.dim)


def connection_difference(pair: MetricPair, point, V, W) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    pair.g.check_margin(point, 2 * pair.g.fd_step)
    pair.check(point)
    H = connection_difference_field(pair)(point[None])[0]
    return np.einsum("mij,i,j->m", H, np.asarray(V, float), np.asarray(W, float))


def curvature_difference_batch(pair: MetricPair, X) -> np.ndarray:
    """S = R^g - R^h assembled from H and its h-covariant derivative."""
    X = np.atleast_2d(X)
    Hf = connection_difference_field(pair)
    H = Hf(X)
    dH = fd_derivative(Hf, X, pair.g.fd_step, order=2)       # dH[n,a,i,j,k]
    Gh = christoffel_batch(pair.g, X) - H
    NH = (dH + np.einsum("nakm,nmij->naijk", Gh, H)
          - np.einsum("nmki,namj->naijk", Gh, H) - np.einsum("nmkj,naim->naijk", Gh, H))
    return (np.einsum("nadbc->nabcd", NH) - np.einsum("nacbd->nabcd", NH)
            + np.einsum("nacm,nmdb->nabcd", H, H) - np.einsum("nadm,nmcb->nabcd", H, H))


def curvature_difference(pair: MetricPair, point, V, W, Z) -> np.ndarray:
    point = np.asarray(point, dtype=float)
    pair.g.check_margin(point, 3 * pair.g.fd_step)
    pair.check(point)
    S = curvature_difference_batch(pair, point[None])[0]
    return np.einsum("abcd,b,c,d->a", S, np.asarray(Z, float), np.asarray(V, float), np.asarray(W, float))


# ---------------------------------------------------------------------------
# catalog

def _const(mat):
    mat = np.asarray(mat, dtype=float)

    def fn(X):
        X = np.asarray(X)
        return np.broadcast_to(mat, X.shape[:-1] + mat.shape).copy()

    return fn


def standard_omega_matrix(n: int) -> np.ndarray:
    """omega = sum dx_k ^ dy_k in coordinates (x1, y1, x2, y2, ...)."""
    W = np.zeros((2 * n, 2 * n))
    for k in range(n):
        W[2 * k, 2 * k + 1] = 1.0
        W[2 * k + 1, 2 * k] = -1.0
    return W


def standard_J_matrix(n: int) -> np.ndarray:
    return -standard_omega_matrix(n)


def euclidean(n: int, half_width: float = 10.0, fd_step: float | None = None) -> ChartManifold:
    box = [(-half_width, half_width)] * n
    kw = {}
    if n % 2 == 0:
        kw = dict(omega_fn=_const(standard_omega_matrix(n // 2)), J_fn=_const(standard_J_matrix(n // 2)))
    return ChartManifold(n, box, _const(np.eye(n)), fd_step=fd_step, name="euclidean",
                         params={"n": n, "flat": True}, **kw)


def round_sphere(r: float = 1.0, fd_step: float | None = None) -> ChartManifold:
    """Sphere of radius r in coordinates (theta, phi); poles excluded from the box."""

    def metric(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        out[..., 0, 0] = r * r
        out[..., 1, 1] = (r * np.sin(X[..., 0])) ** 2
        return out

    def omega(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        a = r * r * np.sin(X[..., 0])
        out[..., 0, 1] = a
        out[..., 1, 0] = -a
        return out

    def J(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        s = np.sin(X[..., 0])
        out[..., 0, 1] = -s
        out[..., 1, 0] = 1.0 / s
        return out

    box = [(0.05, np.pi - 0.05), (-np.pi, np.pi, True)]
    return ChartManifold(2, box, metric, omega, J, fd_step=fd_step, name="round_sphere",
                         params={"r": r})


def hyperbolic_plane(fd_step: float | None = None) -> ChartManifold:
    """Upper half-plane with (dx^2 + dy^2) / y^2."""

    def metric(X):
        X = np.asarray(X)
        y = X[..., 1]
        return np.eye(2) * (1.0 / (y * y))[..., None, None]

    def omega(X):
        X = np.asarray(X)
        return standard_omega_matrix(1) * (1.0 / X[..., 1] ** 2)[..., None, None]

    box = [(-5.0, 5.0), (0.05, 10.0)]
    return ChartManifold(2, box, metric, omega, _const(standard_J_matrix(1)), fd_step=fd_step,
                         name="hyperbolic_plane", params={})


def flat_torus(periods: Sequence[float] = (2 * np.pi, 2 * np.pi), fd_step: float | None = None) -> ChartManifold:
    periods = [float(p) for p in periods]
    n = len(periods)
    box = [(0.0, p, True) for p in periods]
    kw = {}
    if n % 2 == 0:
        kw = dict(omega_fn=_const(standard_omega_matrix(n // 2)), J_fn=_const(standard_J_matrix(n // 2)))
    return ChartManifold(n, box, _const(np.eye(n)), fd_step=fd_step, name="flat_torus",
                         params={"periods": periods, "flat": True}, **kw)


def polar_flat(fd_step: float | None = None) -> ChartManifold:
    """Flat plane in polar coordinates (r, theta)."""

    def metric(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = X[..., 0] ** 2
        return out

    def omega(X):
        X = np.asarray(X)
        return standard_omega_matrix(1) * X[..., 0][..., None, None]

    def J(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        out[..., 0, 1] = -X[..., 0]
        out[..., 1, 0] = 1.0 / X[..., 0]
        return out

    box = [(0.1, 5.0), (-np.pi, np.pi, True)]
    return ChartManifold(2, box, metric, omega, J, fd_step=fd_step, name="polar_flat", params={})


def conformal_plane(fd_step: float | None = None) -> ChartManifold:
    """Plane with metric exp(2x)(dx^2 + dy^2)."""

    def metric(X):
        X = np.asarray(X)
        return np.eye(2) * np.exp(2 * X[..., 0])[..., None, None]

    return ChartManifold(2, [(-2.0, 2.0), (-2.0, 2.0)], metric, fd_step=fd_step,
                         name="conformal_plane", params={})


def stretched_plane(fd_step: float | None = None) -> ChartManifold:
    """Plane with metric (1 + x^2) dx^2 + dy^2."""

    def metric(X):
        X = np.asarray(X)
        out = np.zeros(X.shape[:-1] + (2, 2))
        out[..., 0, 0] = 1.0 + X[..., 0] ** 2
        out[..., 1, 1] = 1.0
        return out

    return ChartManifold(2, [(-2.0, 2.0), (-2.0, 2.0)], metric, fd_step=fd_step,
                         name="stretched_plane", params={})


def stereographic_sphere(fd_step: float | None = None) -> ChartManifold:
    """Unit sphere pulled back to the plane by stereographic projection."""

    def metric(X):
        X = np.asarray(X)
        q = np.sum(X * X, axis=-1)
        return np.eye(2) * (4.0 / (1.0 + q) ** 2)[..., None, None]

    return ChartManifold(2, [(-2.0, 2.0), (-2.0, 2.0)], metric, fd_step=fd_step,
                         name="stereographic_sphere", params={})


def linear_frame_plane(M, fd_step: float | None = None) -> ChartManifold:
    """Flat metric M^T M written in the coordinates of a linear frame."""
    M = np.asarray(M, dtype=float)
    return ChartManifold(M.shape[0], [(-2.0, 2.0)] * M.shape[0], _const(M.T @ M), fd_step=fd_step,
                         name="linear_frame_plane", params={"M": M.tolist()})


MANIFOLDS = {
    "euclidean": (euclidean, {"n": "int"}),
    "round_sphere": (round_sphere, {"r": "float"}),
    "hyperbolic_plane": (hyperbolic_plane, {}),
    "flat_torus": (flat_torus, {"periods": "list[float]"}),
    "polar_flat": (polar_flat, {}),
    "conformal_plane": (conformal_plane, {}),
    "stretched_plane": (stretched_plane, {}),
    "stereographic_sphere": (stereographic_sphere, {}),
}


def metric_pair(g: ChartManifold, h: ChartManifold) -> MetricPair:
    if g.box != h.box:
        h = ChartManifold(h.dim, g.box, h.metric_fn, h.omega_fn, h.J_fn, g.fd_step, h.name,
                          h.params, validate=False)
    return MetricPair(g, h)


def catalog_pairs(fd_step: float | None = None) -> dict[str, MetricPair]:
    base = ChartManifold(2, [(-2.0, 2.0), (-2.0, 2.0)], _const(np.eye(2)), fd_step=fd_step,
                         name="euclidean", params={"n": 2})
    return {
        "conformal": metric_pair(base, conformal_plane(fd_step)),
        "stretched": metric_pair(base, stretched_plane(fd_step)),
        "stereographic": metric_pair(base, stereographic_sphere(fd_step)),
    }
