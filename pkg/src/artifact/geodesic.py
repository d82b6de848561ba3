"""Geodesics, parallel transport, Jacobi fields and submanifold geometry."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import (
    ChartExitError,
    DegenerateEmbeddingError,
    OutOfTubeError,
    ValidationError,
)
from .provenance import Record, coth, formula
from .tensor import ChartManifold, _axes, christoffel_batch, fd_derivative, riemann_batch

STEPS_PER_UNIT = 1000


@dataclass
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


@dataclass
class JacobiState:
    Z: np.ndarray
    Zprime: np.ndarray

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        self.Zprime = np.asarray(self.Zprime, dtype=float)


@dataclass
class GeometricBounds:
    K: float
    H: float
    i0: float
    eps: float = 1.0
    higher_bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("K", "H", "i0", "eps"):
            v = getattr(self, name)
            ok = v >= 0 if name == "H" else v > 0
            if not ok or not math.isfinite(v):
                raise ValidationError(f"bound {name} must be a positive finite number, got {v}")
        if self.eps > 1:
            raise ValidationError("Lipschitz constant eps must not exceed 1")
        for k, v in self.higher_bounds.items():
            if not (v > 0):
                raise ValidationError(f"higher bound {k} must be positive")

    def to_dict(self) -> dict:
        return {"K": self.K, "H": self.H, "i0": self.i0, "eps": self.eps,
                "higher_bounds": dict(self.higher_bounds)}


@dataclass
class Trajectory:
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    exited: bool = False

    @property
    def end(self) -> GeodesicState:
        return GeodesicState(self.positions[-1], self.velocities[-1], float(self.t[-1]))

    def reversed(self) -> "Trajectory":
        return Trajectory(self.t[-1] - self.t[::-1], self.positions[::-1].copy(),
                          -self.velocities[::-1], self.exited)

    def write_csv(self, path) -> None:
        d = self.positions.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x{k}" for k in range(d)] + [f"v{k}" for k in range(d)])
            for t, x, v in zip(self.t, self.positions, self.velocities):
                w.writerow([repr(float(t))] + [repr(float(a)) for a in x] + [repr(float(a)) for a in v])


# ---------------------------------------------------------------------------
# geodesic flow

def _outside(manifold: ChartManifold, X: np.ndarray) -> np.ndarray:
    bad = np.zeros(X.shape[0], dtype=bool)
    for k, ax in enumerate(manifold.box):
        if not ax.periodic:
            bad |= (X[:, k] <= ax.lo) | (X[:, k] >= ax.hi)
    return bad


def _accel(manifold, X, V):
    G = christoffel_batch(manifold, X)
    GV = (G @ V[:, None, :, None])[..., 0]
    return -(GV @ V[:, :, None])[..., 0]


def default_steps(speed: float, t_end: float) -> int:
    return max(1, int(math.ceil(STEPS_PER_UNIT * abs(speed * t_end))))


def geodesic_flow(manifold: ChartManifold, X0, V0, t_end: float, steps: int, record=None):
    """RK4 geodesic flow for a batch of initial conditions.

    Returns final positions, velocities and a mask of rows that left the chart
    (those rows are frozen at their last interior state). When ``record`` lists
    step counts, positions after those steps are returned as a fourth value.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    V = np.array(V0, dtype=float, ndmin=2)
    h = t_end / steps
    exited = np.zeros(X.shape[0], dtype=bool)
    snaps = {}
    want = set(record or ())
    for step in range(steps):
        if step in want:
            snaps[step] = X.copy()
        live = ~exited
        if not np.any(live):
            break
        x, v = X[live], V[live]
        k1x, k1v = v, _accel(manifold, x, v)
        x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
        k2x, k2v = v2, _accel(manifold, x2, v2)
        x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
        k3x, k3v = v3, _accel(manifold, x3, v3)
        x4, v4 = x + h * k3x, v + h * k3v
        k4x, k4v = v4, _accel(manifold, x4, v4)
        xn = x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        out = _outside(manifold, xn)
        idx = np.flatnonzero(live)
        exited[idx[out]] = True
        keep = idx[~out]
        X[keep] = xn[~out]
        V[keep] = vn[~out]
    if record is not None:
        snaps[steps] = X.copy()
        return X, V, exited, np.stack([snaps.get(k, X) for k in record])
    return X, V, exited


def integrate_geodesic(manifold: ChartManifold, initial: GeodesicState, t_end: float,
                       steps: int | None = None) -> Trajectory:
    """Fixed-step RK4 integration; a chart exit returns the partial trajectory flagged."""
    x = initial.position.astype(float)
    v = initial.velocity.astype(float)
    g0 = manifold.metric(x[None])[0]
    speed = math.sqrt(float(v @ g0 @ v))
    steps = steps or default_steps(speed, t_end)
    h = t_end / steps
    ts, xs, vs = [initial.t], [x.copy()], [v.copy()]
    exited = False
    X, V = x[None], v[None]
    for i in range(steps):
        Xn, Vn, ex = geodesic_flow(manifold, X, V, h, 1)
        if ex[0]:
            exited = True
            break
        X, V = Xn, Vn
        ts.append(initial.t + (i + 1) * h)
        xs.append(X[0].copy())
        vs.append(V[0].copy())
    return Trajectory(np.array(ts), np.array(xs), np.array(vs), exited)


def speed_drift(manifold: ChartManifold, traj: Trajectory) -> float:
    g = manifold.metric(traj.positions)
    sp = np.einsum("ni,nij,nj->n", traj.velocities, g, traj.velocities)
    return float(np.max(np.abs(sp - sp[0])) / sp[0])


def _hermite_midpoints(traj: Trajectory):
    x0, x1 = traj.positions[:-1], traj.positions[1:]
    v0, v1 = traj.velocities[:-1], traj.velocities[1:]
    h = np.diff(traj.t)[:, None]
    xm = 0.5 * (x0 + x1) + h / 8.0 * (v0 - v1)
    vm = 1.5 * (x1 - x0) / h - 0.25 * (v0 + v1)
    return xm, vm, h[:, 0]


def parallel_transport(manifold: ChartManifold, traj: Trajectory, v0) -> np.ndarray:
    """Solve nabla_{gamma'} V = 0 along a stored path by RK4.

    ``v0`` may be a vector or a matrix whose columns are transported together.
    """
    V = np.array(v0, dtype=float)
    single = V.ndim == 1
    if single:
        V = V[:, None]
    xm, vm, hs = _hermite_midpoints(traj)
    n = len(hs)
    G = christoffel_batch(manifold, np.concatenate([traj.positions, xm]))
    Gn, Gm = G[: n + 1], G[n + 1:]
    vel = traj.velocities

    def rhs(Gam, u, W):
        return -np.einsum("kij,i,jm->km", Gam, u, W)

    for i in range(n):
        h = hs[i]
        k1 = rhs(Gn[i], vel[i], V)
        k2 = rhs(Gm[i], vm[i], V + 0.5 * h * k1)
        k3 = rhs(Gm[i], vm[i], V + 0.5 * h * k2)
        k4 = rhs(Gn[i + 1], vel[i + 1], V + h * k3)
        V = V + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return V[:, 0] if single else V


def integrate_jacobi(manifold: ChartManifold, traj: Trajectory, initial: JacobiState,
                     return_history: bool = False):
    """Solve Z'' + R(Z, gamma')gamma' = 0 (covariant derivatives) by RK4."""
    xm, vm, hs = _hermite_midpoints(traj)
    n = len(hs)
    pts = np.concatenate([traj.positions, xm])
    G = christoffel_batch(manifold, pts)
    R = riemann_batch(manifold, pts)
    vel = np.concatenate([traj.velocities, vm])

    def rhs(k, Z, Y):
        u = vel[k]
        dZ = Y - np.einsum("kij,i,j->k", G[k], u, Z)
        dY = -np.einsum("abcd,b,c,d->a", R[k], u, Z, u) - np.einsum("kij,i,j->k", G[k], u, Y)
        return dZ, dY

    Z, Y = initial.Z.copy(), initial.Zprime.copy()
    hist = [(Z.copy(), Y.copy())]
    for i in range(n):
        h = hs[i]
        m = n + 1 + i
        a1, b1 = rhs(i, Z, Y)
        a2, b2 = rhs(m, Z + 0.5 * h * a1, Y + 0.5 * h * b1)
        a3, b3 = rhs(m, Z + 0.5 * h * a2, Y + 0.5 * h * b2)
        a4, b4 = rhs(i + 1, Z + h * a3, Y + h * b3)
        Z = Z + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        Y = Y + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        hist.append((Z.copy(), Y.copy()))
    end = JacobiState(Z, Y)
    if return_history:
        return end, np.array([z for z, _ in hist]), np.array([y for _, y in hist])
    return end


def jacobi_residual(manifold: ChartManifold, traj: Trajectory, Zs: np.ndarray, Ys: np.ndarray) -> float:
    """Max residual of Z' = Y and Y' = -R(Z, u)u from five-point differences of the samples."""
    G = christoffel_batch(manifold, traj.positions)
    R = riemann_batch(manifold, traj.positions)
    u = traj.velocities
    h = float(traj.t[1] - traj.t[0])

    def d5(F):
        return (-F[4:] + 8 * F[3:-1] - 8 * F[1:-3] + F[:-4]) / (12 * h)

    s = slice(2, -2)
    rZ = d5(Zs) - (Ys[s] - np.einsum("nkij,ni,nj->nk", G[s], u[s], Zs[s]))
    rY = d5(Ys) - (-np.einsum("nabcd,nb,nc,nd->na", R[s], u[s], Zs[s], u[s])
                   - np.einsum("nkij,ni,nj->nk", G[s], u[s], Ys[s]))
    return float(max(np.max(np.abs(rZ)), np.max(np.abs(rY))))


def vector_norm(manifold: ChartManifold, x, v) -> float:
    g = manifold.metric(np.asarray(x, float)[None])[0]
    v = np.asarray(v, float)
    return math.sqrt(float(v @ g @ v))


# ---------------------------------------------------------------------------
# comparison ODE

def comparison_solution(k: float, zeta_fn: Callable, xi0: float, xiprime0: float, t_end: float,
                        n: int = 2001):
    """Solve xi'' - k xi = zeta by variation of parameters with cosh/sinh.

    Returns ``(t, xi, xi')`` sampled on ``n`` uniform nodes.
    """
    if k < 0:
        raise ValidationError("comparison equation requires k >= 0")
    if n % 2 == 0:
        n += 1
    t = np.linspace(0.0, t_end, n)
    z = np.asarray(np.broadcast_to(zeta_fn(t), t.shape), dtype=float)
    if k == 0:
        I0 = cumulative_simpson(z, x=t, initial=0.0)
        I1 = cumulative_simpson(t * z, x=t, initial=0.0)
        xi = xi0 + xiprime0 * t + t * I0 - I1
        dxi = xiprime0 + I0
        return t, xi, dxi
    r = math.sqrt(k)
    f1, f2 = np.cosh(r * t), np.sinh(r * t)
    I1 = cumulative_simpson(f1 * z, x=t, initial=0.0)
    I2 = cumulative_simpson(f2 * z, x=t, initial=0.0)
    a1, a2 = xi0, xiprime0 / r
    xi = (-f1 * I2 + f2 * I1) / r + a1 * f1 + a2 * f2
    dxi = -f2 * I2 + f1 * I1 + r * (a1 * f2 + a2 * f1)
    return t, xi, dxi


# ---------------------------------------------------------------------------
# submanifolds

class LagrangianEmbedding:
    """Parametrised submanifold of an ambient chart.

    ``param_fn`` is batched: ``(..., l_dim) -> (..., ambient.dim)``.
    """

    def __init__(self, ambient: ChartManifold, param_fn: Callable, l_dim: int, param_box,
                 name: str = "submanifold", params: dict | None = None, fd_step: float | None = None,
                 validate: bool = True):
        self.ambient = ambient
        self.param_fn = param_fn
        self.l_dim = int(l_dim)
        self.param_box = _axes(param_box)
        self.name = name
        self.params = dict(params or {})
        widths = [a.width for a in self.param_box]
        self.fd_step = fd_step or 1e-4 * min(widths)
        if validate:
            self.validate()

    def sample_params(self, n: int) -> np.ndarray:
        from scipy.stats import qmc
        lo = np.array([a.lo for a in self.param_box])
        hi = np.array([a.hi for a in self.param_box])
        u = qmc.Halton(d=self.l_dim, scramble=False).random(n + 1)[1:]
        return lo + u * (hi - lo)

    def point(self, L) -> np.ndarray:
        return np.asarray(self.param_fn(np.asarray(L, dtype=float)), dtype=float)

    def tangent(self, L) -> np.ndarray:
        """dp with shape (N, ambient_dim, l_dim)."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        return fd_derivative(self.point, L, self.fd_step, order=4)

    def hessian(self, L) -> np.ndarray:
        L = np.atleast_2d(np.asarray(L, dtype=float))
        return fd_derivative(self.tangent, L, self.fd_step, order=4)

    def validate(self, n: int = 12) -> None:
        L = self.sample_params(n)
        T = self.tangent(L)
        sv = np.linalg.svd(T, compute_uv=False)
        if np.min(sv[:, -1]) < 1e-10:
            raise DegenerateEmbeddingError(f"{self.name}: differential is rank deficient")
        am = self.ambient
        if am.omega_fn is not None and 2 * self.l_dim == am.dim:
            W = am.omega(self.point(L))
            pull = np.einsum("nai,nab,nbj->nij", T, W, T)
            if np.max(np.abs(pull)) > 1e-10:
                raise ValidationError(f"{self.name}: pullback of omega does not vanish")

    def frames(self, L):
        """Orthonormal tangent frame E (N, dim, l) and normal frame F (N, dim, dim - l).

        The normal frame is J E when J is available and J E is normal; otherwise a
        Gram-Schmidt complement built from the coordinate directions.
        """
        L = np.atleast_2d(np.asarray(L, dtype=float))
        P = self.point(L)
        T = self.tangent(L)
        g = self.ambient.metric(P)
        N, d, l = T.shape
        if np.min(np.linalg.svd(T, compute_uv=False)[:, -1]) < 1e-10:
            raise DegenerateEmbeddingError(f"{self.name}: differential is rank deficient")
        E = _gram_schmidt(g, T)
        codim = d - l
        if self.ambient.J_fn is not None and codim == l:
            F = np.einsum("nab,nbi->nai", self.ambient.J(P), E)
            cross = np.einsum("nai,nab,nbj->nij", E, g, F)
            gram = np.einsum("nai,nab,nbj->nij", F, g, F)
            if np.max(np.abs(cross)) < 1e-8 and np.max(np.abs(gram - np.eye(codim))) < 1e-8:
                return E, F
        cand = np.broadcast_to(np.eye(d), (N, d, d))
        F = _complement(g, E, cand, codim)
        return E, F


def _gram_schmidt(g, T):
    N, d, l = T.shape
    E = np.zeros_like(T)
    for i in range(l):
        v = T[:, :, i].copy()
        for j in range(i):
            c = np.einsum("na,nab,nb->n", E[:, :, j], g, v)
            v -= c[:, None] * E[:, :, j]
        nv = np.sqrt(np.einsum("na,nab,nb->n", v, g, v))
        E[:, :, i] = v / nv[:, None]
    return E


def _complement(g, E, cand, codim):
    N, d, l = E.shape
    F = np.zeros((N, d, codim))
    for n in range(N):
        basis = [E[n, :, i] for i in range(l)]
        out = []
        for c in cand[n].T:
            v = c.copy()
            for b in basis + out:
                v = v - (b @ g[n] @ v) * b
            nv = math.sqrt(max(float(v @ g[n] @ v), 0.0))
            if nv > 0.3:
                out.append(v / nv)
            if len(out) == codim:
                break
        F[n] = np.array(out).T
    return F


def _tangent_vec(lag, l_point, v):
    return lag.tangent(l_point)[0] @ np.asarray(v, dtype=float)


def second_fundamental_form_matrix(lag: LagrangianEmbedding, l_point) -> np.ndarray:
    """B[a, i, j]: ambient components of B(d_i p, d_j p)."""
    L = np.atleast_2d(np.asarray(l_point, dtype=float))
    P = lag.point(L)
    T = lag.tangent(L)[0]
    if np.linalg.svd(T, compute_uv=False)[-1] < 1e-10:
        raise DegenerateEmbeddingError(f"{lag.name}: differential is rank deficient at {L[0].tolist()}")
    Hs = lag.hessian(L)[0]                       # Hs[a, i, j] = d_j d_i p^a
    G = christoffel_batch(lag.ambient, P)[0]
    cov = Hs + np.einsum("aij,ik,jl->akl", G, T, T)
    g = lag.ambient.metric(P)[0]
    proj = np.eye(lag.ambient.dim) - T @ np.linalg.solve(T.T @ g @ T, T.T @ g)
    return np.einsum("ab,bij->aij", proj, cov)


def second_fundamental_form(lag: LagrangianEmbedding, l_point, v, w) -> np.ndarray:
    """Normal part of nabla_v W; ``v`` and ``w`` are given in L-coordinates."""
    B = second_fundamental_form_matrix(lag, l_point)
    return np.einsum("aij,i,j->a", B, np.asarray(v, float), np.asarray(w, float))


def shape_operator(lag: LagrangianEmbedding, l_point, nu, v) -> np.ndarray:
    """S_nu(v) as an ambient tangent vector, defined by g(S_nu v, .) = g(B(v, .), nu)."""
    L = np.atleast_2d(np.asarray(l_point, dtype=float))
    B = second_fundamental_form_matrix(lag, L[0])
    T = lag.tangent(L)[0]
    g = lag.ambient.metric(lag.point(L))[0]
    b = np.einsum("aij,ab,b->ij", B, g, np.asarray(nu, float))
    S = np.linalg.solve(T.T @ g @ T, b)
    return T @ (S @ np.asarray(v, float))


def second_fundamental_norm(lag: LagrangianEmbedding, l_point) -> float:
    L = np.atleast_2d(np.asarray(l_point, dtype=float))
    B = second_fundamental_form_matrix(lag, L[0])
    T = lag.tangent(L)[0]
    g = lag.ambient.metric(lag.point(L))[0]
    Gl_inv = np.linalg.inv(T.T @ g @ T)
    return math.sqrt(float(np.einsum("aij,ab,bkl,ik,jl->", B, g, B, Gl_inv, Gl_inv)))


def normal_exponential(lag: LagrangianEmbedding, l_point, normal_vector, t: float,
                       steps: int | None = None) -> np.ndarray:
    p = lag.point(np.atleast_2d(l_point))[0]
    traj = integrate_geodesic(lag.ambient, GeodesicState(p, normal_vector), t, steps)
    if traj.exited:
        raise ChartExitError("normal geodesic left the chart")
    return traj.positions[-1]


def normal_exp_batch(lag: LagrangianEmbedding, Y, steps_per_unit: int = STEPS_PER_UNIT,
                     fractions=None):
    """Phi(l, x) = exp_{p(l)}(sum_a x_a nu_a(l)) for rows Y = (l, x).

    With ``fractions`` the positions Phi(l, s x) for each fraction s are also returned.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    l = lag.l_dim
    L, Xn = Y[:, :l], Y[:, l:]
    P = lag.point(L)
    _, F = lag.frames(L)
    V = np.einsum("nai,ni->na", F, Xn)
    norms = np.linalg.norm(Xn, axis=1)
    length = float(np.max(norms)) if len(norms) else 0.0
    if length == 0.0:
        ex = np.zeros(len(P), dtype=bool)
        if fractions is not None:
            return P, ex, np.stack([P] * len(fractions))
        return P, ex
    if lag.ambient.params.get("flat"):
        # straight lines: the exponential map is exact, no integration needed
        X = P + V
        ex = _outside(lag.ambient, X)
        if fractions is None:
            return X, ex
        return X, ex, np.stack([P + f * V for f in fractions])
    steps = max(1, int(math.ceil(steps_per_unit * length)))
    if fractions is None:
        X, _, ex = geodesic_flow(lag.ambient, P, V, 1.0, steps)
        return X, ex
    n = len(fractions)
    steps = n * int(math.ceil(steps / n))
    rec = [int(round(f * steps)) for f in fractions]
    X, _, ex, snaps = geodesic_flow(lag.ambient, P, V, 1.0, steps, record=rec)
    return X, ex, snaps


def _wrap_diff(manifold: ChartManifold, D: np.ndarray) -> np.ndarray:
    D = D.copy()
    for k, ax in enumerate(manifold.box):
        if ax.periodic:
            w = ax.width
            D[..., k] = (D[..., k] + 0.5 * w) % w - 0.5 * w
    return D


@dataclass
class Foot:
    distance: float
    l_point: np.ndarray
    fiber: np.ndarray
    point: np.ndarray
    residual: float


COARSE_STEPS_PER_UNIT = 100


def _coarse_starts(lag, Q, grid, candidates):
    """Best local minima of a chart-distance surrogate over an L grid, per query point."""
    am = lag.ambient
    axes = [np.linspace(a.lo, a.hi, grid, endpoint=not a.periodic) for a in lag.param_box]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lag.l_dim)
    P = lag.point(mesh)
    gP = am.metric(P)
    _, F = lag.frames(mesh)
    shape = (grid,) * lag.l_dim
    starts = []
    for q in Q:
        D = _wrap_diff(am, q[None] - P)
        d2 = np.einsum("na,nab,nb->n", D, gP, D)
        d2g = d2.reshape(shape)
        ismin = np.ones(shape, dtype=bool)
        for ax_i, ax in enumerate(lag.param_box):
            for sgn in (1, -1):
                nb = np.roll(d2g, sgn, axis=ax_i)
                if not ax.periodic:
                    sl = [slice(None)] * lag.l_dim
                    sl[ax_i] = 0 if sgn == 1 else -1
                    nb[tuple(sl)] = np.inf
                ismin &= d2g <= nb
        order = np.argsort(d2, kind="stable")
        picks = [i for i in order if ismin.reshape(-1)[i]][:candidates] or [int(order[0])]
        rows = []
        for i in picks:
            x0 = np.einsum("ai,ab,b->i", F[i], gP[i], D[i])
            rows.append(np.concatenate([mesh[i], x0]))
        starts.append(np.array(rows))
    return starts


def _newton_batch(lag, Q, Y, max_steps=50):
    """Damped Newton on Phi(y) = q, row by row, coarse resolution first."""
    am = lag.ambient
    Y = np.array(Y, dtype=float)
    Q = np.asarray(Q, dtype=float)
    gq = am.metric(Q)
    failed = np.zeros(len(Y), dtype=bool)

    def resid(Yb, Qb, spu):
        X, ex = normal_exp_batch(lag, Yb, spu)
        return _wrap_diff(am, X - Qb), ex

    def size(r, g):
        return np.sqrt(np.abs(np.einsum("na,nab,nb->n", r, g, r)))

    used = 0
    for spu, tol, cap in ((COARSE_STEPS_PER_UNIT, 1e-10, 35), (STEPS_PER_UNIT, 1e-13, 15)):
        r, ex = resid(Y, Q, spu)
        failed |= ex
        for _ in range(cap):
            if used >= max_steps:
                break
            sz = size(r, gq)
            act = np.flatnonzero(~failed & (sz >= tol))
            if len(act) == 0:
                break
            used += 1
            Ya, Qa = Y[act], Q[act]
            Jm = _fd_rows(lambda Yb: resid(Yb, _match(Qa, Yb, len(act)), spu)[0], Ya, 1e-6)
            dy = np.stack([np.linalg.lstsq(Jm[i], -r[act[i]], rcond=None)[0] for i in range(len(act))])
            lam = np.ones(len(act))
            base = sz[act]
            pending = np.ones(len(act), dtype=bool)
            for _ in range(14):
                if not np.any(pending):
                    break
                p = np.flatnonzero(pending)
                Yt = Ya[p] + lam[p, None] * dy[p]
                rt, ext = resid(Yt, Qa[p], spu)
                ok = ~ext & (size(rt, gq[act[p]]) < base[p])
                Y[act[p[ok]]] = Yt[ok]
                r[act[p[ok]]] = rt[ok]
                pending[p[ok]] = False
                lam[p[~ok]] *= 0.5
            failed[act[pending]] = True
    sz = size(r, gq)
    return Y, sz, failed


def _match(Qa, Yb, n):
    reps = len(Yb) // n
    return np.tile(Qa, (reps, 1))


def _fd_rows(fn, Y, step):
    """Jacobian of a row-wise map by central differences, shape (N, out, in)."""
    N, d = Y.shape
    E = np.eye(d) * step
    pts = np.concatenate([Y + s * E[k] for s in (1.0, -1.0) for k in range(d)])
    vals = fn(pts).reshape(2, d, N, -1)
    return np.transpose((vals[0] - vals[1]) / (2 * step), (1, 2, 0))


def _feet_from(lag, Y, sz, failed):
    l = lag.l_dim
    out = []
    for y, s, f in zip(Y, sz, failed):
        if f or s > 1e-8:
            continue
        lp = y[:l].copy()
        ok = True
        for k, ax in enumerate(lag.param_box):
            if ax.periodic:
                lp[k] = ax.lo + (lp[k] - ax.lo) % ax.width
            elif not (ax.lo <= lp[k] <= ax.hi):
                ok = False
        if ok:
            out.append(Foot(float(np.linalg.norm(y[l:])), lp, y[l:].copy(),
                            lag.point(lp[None])[0], float(s)))
    out.sort(key=lambda f: f.distance)
    return out


def nearest_points(lag: LagrangianEmbedding, q, grid: int = 64, newton_steps: int = 50,
                   candidates: int = 4, window: float | None = None) -> list[Foot]:
    """Coarse grid over L followed by damped Newton on Phi(l, x) = q."""
    return nearest_points_many(lag, np.atleast_2d(q), grid, newton_steps, candidates, window)[0]


def nearest_points_many(lag, Q, grid=64, newton_steps=50, candidates=4, window=None):
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    starts = _coarse_starts(lag, Q, grid, candidates)
    owner = np.concatenate([[i] * len(s) for i, s in enumerate(starts)])
    Y0 = np.concatenate(starts)
    Y, sz, failed = _newton_batch(lag, Q[owner], Y0, newton_steps)
    result = []
    for i in range(len(Q)):
        sel = owner == i
        feet = _feet_from(lag, Y[sel], sz[sel], failed[sel])
        if window is not None:
            feet = [f for f in feet if f.distance <= window]
        if not feet:
            raise OutOfTubeError(f"no nearest point found inside the tube window for {Q[i].tolist()}")
        result.append(feet)
    return result


def distance_to_submanifold(lag: LagrangianEmbedding, ambient_point, window: float | None = None):
    """Return (distance, foot) for the nearest point of the submanifold."""
    f = nearest_points(lag, ambient_point, window=window)[0]
    return f.distance, f


def detect_cut(lag: LagrangianEmbedding, radius: float, n_base: int = 8, n_dir: int = 4,
               n_t: int = 8) -> dict:
    """Sample normal rays up to ``radius`` looking for focal points or competing feet."""
    l = lag.l_dim
    codim = lag.ambient.dim - l
    bases = lag.sample_params(n_base)
    if codim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        u = np.random.default_rng(0).normal(size=(n_dir, codim))
        u = np.concatenate([u, -u])
        dirs = u / np.linalg.norm(u, axis=1, keepdims=True)
    fr = np.arange(1, n_t + 1) / n_t
    ends = np.array([np.concatenate([b, radius * d]) for b in bases for d in dirs])
    d = ends.shape[1]
    step = 1e-5
    E = np.eye(d) * step
    stencil = np.concatenate([ends] + [ends + sg * E[k] for sg in (1.0, -1.0) for k in range(d)])
    X_all, ex, snaps = normal_exp_batch(lag, stencil, fractions=fr)
    if np.any(ex):
        k = int(np.flatnonzero(ex)[0])
        return {"cut": True, "kind": "chart_exit", "at": stencil[k].tolist()}
    m = len(ends)
    X = X_all[:m]
    T0 = lag.tangent(ends[:, :l])
    _, F0 = lag.frames(ends[:, :l])
    det0 = np.linalg.det(np.concatenate([T0, F0], axis=2))
    for j, s_ in enumerate(fr):
        S = snaps[j][m:].reshape(2, d, m, -1)
        Jm = np.transpose((S[0] - S[1]) / (2 * step), (1, 2, 0))
        Jm[:, :, l:] /= s_
        rel = np.linalg.det(Jm) / det0
        if np.any(rel <= 1e-9):
            k = int(np.argmin(rel))
            at = np.concatenate([ends[k, :l], s_ * ends[k, l:]])
            return {"cut": True, "kind": "focal", "at": at.tolist()}
    try:
        all_feet = nearest_points_many(lag, X)
    except OutOfTubeError as exc:
        return {"cut": True, "kind": "no_foot", "at": str(exc)}
    for y, feet in zip(ends, all_feet):
        t = float(np.linalg.norm(y[l:]))
        for f in feet:
            dl = _wrap_diff_param(lag, f.l_point - y[:l])
            if np.linalg.norm(dl) > 1e-3 and f.distance <= t + 1e-6:
                return {"cut": True, "kind": "two_feet", "at": y.tolist()}
    return {"cut": False, "kind": None, "at": None}


def _wrap_diff_param(lag, d):
    d = np.array(d, dtype=float)
    for k, ax in enumerate(lag.param_box):
        if ax.periodic:
            d[k] = (d[k] + 0.5 * ax.width) % ax.width - 0.5 * ax.width
    return d


# ---------------------------------------------------------------------------
# injectivity radius lower bound

@formula("gauss_curvature_bound")
def _gauss(K, H):
    return K + 2.0 * H * H


@formula("hessian_comparison")
def _hess(K, i0):
    z = math.sqrt(K) * i0 / 2.0
    if z < 1e-6:
        return 2.0 / i0 + K * i0 / 6.0
    return math.sqrt(K) * coth(z)


@formula("loop_length_bound")
def _loop(i0, F, H):
    return min(i0 / 4.0, 1.0 / (F + H))


@formula("injectivity_radius_bound")
def _inj(Cp, ell):
    return min(math.pi / math.sqrt(Cp), 0.5 * ell)


def geodesic_loop_bound(bounds: GeometricBounds, dimension: int | None = None) -> Record:
    """Lower bound for the injectivity radius of L from K, H and i0.

    The Hessian constant F uses the comparison surrogate sqrt(K) coth(sqrt(K) i0 / 2).
    """
    rec = Record("injectivity_radius_L")
    Cp = rec.add("C_prime", "gauss_curvature_bound", K=bounds.K, H=bounds.H)
    F = rec.add("F", "hessian_comparison", note="comparison surrogate", K=bounds.K, i0=bounds.i0)
    ell = rec.add("loop_length", "loop_length_bound", i0=bounds.i0, F=F, H=bounds.H)
    rec.add("injectivity_radius_L", "injectivity_radius_bound", Cp=Cp, ell=ell)
    return rec
