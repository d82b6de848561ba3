"""Reflection metric near a Lagrangian.

Tube coordinates are ``y = (l, x)``: ``l`` parametrises the Lagrangian and ``x``
holds normal components in the frame ``nu_a = J e_a``, so that
``Phi(l, x) = exp_{p(l)}(sum_a x_a nu_a(l))``.  All matrices below are components
in the coordinate basis ``(d/dl, d/dx)`` unless they carry an ``_ambient`` suffix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChartExitError,
    ConstructionUnavailableError,
    NoTubeError,
    ValidationError,
)
from .geodesic import (
    GeodesicState,
    JacobiState,
    LagrangianEmbedding,
    detect_cut,
    integrate_geodesic,
    integrate_jacobi,
    normal_exp_batch,
    parallel_transport,
    second_fundamental_form,
    second_fundamental_form_matrix,
    second_fundamental_norm,
)
from .tensor import (
    ChartManifold,
    MetricPair,
    TensorField,
    christoffel_batch,
    connection_difference_field,
    euclidean,
    fd_derivative,
    flat_torus,
    pointwise_norm,
    riemann_batch,
    round_sphere,
    tensor_norm_parts,
)

MAX_HALVINGS = 10


def _blockdiag(A, B):
    N, p, _ = A.shape
    q = B.shape[-1]
    out = np.zeros((N, p + q, p + q))
    out[:, :p, :p] = A
    out[:, p:, p:] = B
    return out


def _sym(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


class TubularChart:
    """Normal-bundle coordinates on a tube of radius ``radius`` around a submanifold."""

    def __init__(self, lagrangian: LagrangianEmbedding, radius: float, phi_step: float | None = None,
                 fd_step: float | None = None):
        if not radius > 0:
            raise ValidationError("tube radius must be positive")
        self.lagrangian = lagrangian
        self.radius = float(radius)
        am = lagrangian.ambient
        self.ambient = am
        self.l_dim = lagrangian.l_dim
        self.dim = am.dim
        self.codim = am.dim - self.l_dim
        self.flat = bool(am.params.get("flat"))
        base = 1e-3 if self.flat else 1e-4
        self.phi_step = phi_step or base * min(1.0, self.radius)
        box = [(a.lo, a.hi, a.periodic) for a in lagrangian.param_box] + [(-self.radius, self.radius)] * self.codim
        self.chart = ChartManifold(self.dim, box, self.g0, fd_step=fd_step, name=f"tube[{lagrangian.name}]",
                                   params={"radius": self.radius}, validate=False)
        self.j_identified = self._check_j_frames()

    # basic pieces ------------------------------------------------------------------
    def _check_j_frames(self) -> bool:
        am = self.ambient
        if am.J_fn is None or self.codim != self.l_dim:
            return False
        L = self.lagrangian.sample_params(8)
        E, F = self.lagrangian.frames(L)
        JE = np.einsum("nab,nbi->nai", am.J(self.lagrangian.point(L)), E)
        return bool(np.max(np.abs(JE - F)) < 1e-8)

    def require_j(self):
        if not self.j_identified:
            raise ConstructionUnavailableError(
                f"{self.lagrangian.name}: J is absent or J TL is not the normal bundle")

    def frame_fn(self, L):
        return self.lagrangian.frames(L)

    def split(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return Y[:, : self.l_dim], Y[:, self.l_dim:]

    def phi(self, Y) -> np.ndarray:
        L, x = self.split(Y)
        if self.flat:
            _, F = self.lagrangian.frames(L)
            return self.lagrangian.point(L) + np.einsum("nai,ni->na", F, x)
        X, exited = normal_exp_batch(self.lagrangian, np.concatenate([L, x], axis=1))
        if np.any(exited):
            raise ChartExitError("normal geodesic left the ambient chart")
        return X

    def dphi(self, Y) -> np.ndarray:
        return fd_derivative(self.phi, np.atleast_2d(Y), self.phi_step, order=4)

    def dphi_zero(self, L) -> np.ndarray:
        L = np.atleast_2d(L)
        _, F = self.lagrangian.frames(L)
        return np.concatenate([self.lagrangian.tangent(L), F], axis=2)

    def inside(self, Y) -> np.ndarray:
        _, x = self.split(Y)
        return np.linalg.norm(x, axis=1) < self.radius

    def sample(self, n: int, fiber_scale: float = 0.5) -> np.ndarray:
        """Halton points with |x_a| <= fiber_scale * radius."""
        win = [(a.lo, a.hi, a.periodic) for a in self.lagrangian.param_box]
        r = fiber_scale * self.radius / math.sqrt(self.codim)
        win += [(-r, r)] * self.codim
        return self.chart.sample_points(n, window=win)

    # metrics on the tube -----------------------------------------------------------
    def g0(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        D = self.dphi(Y)
        g = self.ambient.metric(self.phi(Y))
        return _sym(np.einsum("nai,nab,nbj->nij", D, g, D))

    def g0_zero(self, L) -> np.ndarray:
        L = np.atleast_2d(L)
        T = self.lagrangian.tangent(L)
        g = self.ambient.metric(self.lagrangian.point(L))
        gL = np.einsum("nai,nab,nbj->nij", T, g, T)
        return _blockdiag(gL, np.broadcast_to(np.eye(self.codim), (len(L), self.codim, self.codim)))

    def connection_forms(self, L) -> np.ndarray:
        """omega[n, a, b, i] = g(nabla_{d_i} e_b, e_a) for the orthonormal tangent frame."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        lag = self.lagrangian
        E, _ = lag.frames(L)
        dE = fd_derivative(lambda Z: lag.frames(Z)[0], L, lag.fd_step, order=4)   # (N, d, l, i)
        P = lag.point(L)
        T = lag.tangent(L)
        G = christoffel_batch(self.ambient, P)
        cov = dE + np.einsum("nkpq,npi,nqb->nkbi", G, T, E)
        g = self.ambient.metric(P)
        return np.einsum("nka,nkm,nmbi->nabi", E, g, cov)

    def normal_connection_forms(self, L) -> np.ndarray:
        """g(nabla_{d_i} nu_b, nu_a) for the normal frame, from the ambient connection."""
        L = np.atleast_2d(np.asarray(L, dtype=float))
        lag = self.lagrangian
        _, F = lag.frames(L)
        dF = fd_derivative(lambda Z: lag.frames(Z)[1], L, lag.fd_step, order=4)
        P = lag.point(L)
        G = christoffel_batch(self.ambient, P)
        cov = dF + np.einsum("nkpq,npi,nqb->nkbi", G, lag.tangent(L), F)
        return np.einsum("nka,nkm,nmbi->nabi", F, self.ambient.metric(P), cov)

    def W(self, Y) -> np.ndarray:
        """Vertical correction of the horizontal lift: H_i = d_i - W[a, i] d_{x_a}."""
        L, x = self.split(Y)
        om = self.connection_forms(L)
        return np.einsum("nabi,nb->nai", om, x)

    def C(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        N = len(Y)
        l, c = self.l_dim, self.codim
        out = np.zeros((N, self.dim, self.dim))
        out[:, :l, :l] = np.eye(l)
        out[:, l:, l:] = np.eye(c)
        out[:, l:, :l] = self.W(Y)
        return out

    def pi_h(self, Y) -> np.ndarray:
        Y = np.atleast_2d(Y)
        l = self.l_dim
        out = np.zeros((len(Y), self.dim, self.dim))
        out[:, :l, :l] = np.eye(l)
        out[:, l:, :l] = -self.W(Y)
        return out

    def pi_v(self, Y) -> np.ndarray:
        return np.eye(self.dim) - self.pi_h(Y)

    def g1(self, Y) -> np.ndarray:
        self.require_j()
        Y = np.atleast_2d(Y)
        L, _ = self.split(Y)
        C = self.C(Y)
        return _sym(np.einsum("nai,nab,nbj->nij", C, self.g0_zero(L), C))


def build_tube(lagrangian: LagrangianEmbedding, requested_radius: float, **kw) -> TubularChart:
    """Largest radius among requested / 2^k (k <= 10) at which no cut point is detected."""
    if not requested_radius > 0:
        raise ValidationError("requested radius must be positive")
    r = float(requested_radius)
    last = None
    for _ in range(MAX_HALVINGS + 1):
        res = detect_cut(lagrangian, r)
        if not res["cut"]:
            return TubularChart(lagrangian, r, **kw)
        last = res
        r *= 0.5
    raise NoTubeError(f"cut point found at every tested radius (last: {last})")


# ---------------------------------------------------------------------------
# the layered construction

def pullback_metric_g0(tube: TubularChart, Y) -> np.ndarray:
    return tube.g0(Y)


def linear_metric_g1(tube: TubularChart, Y) -> np.ndarray:
    return tube.g1(Y)


def sasaki_metric_g1(tube: TubularChart, Y) -> np.ndarray:
    """g1 rebuilt from the Sasaki metric of L, pushed to the normal bundle by v -> Jv."""
    tube.require_j()
    lag = tube.lagrangian
    Y = np.atleast_2d(Y)
    L, x = tube.split(Y)
    l = tube.l_dim

    def gL_fn(Z):
        T = lag.tangent(Z)
        return np.einsum("nai,nab,nbj->nij", T, tube.ambient.metric(lag.point(Z)), T)

    def E_fn(Z):
        # E[a, i] = g(d_i, e_a)
        E, _ = lag.frames(Z)
        T = lag.tangent(Z)
        return np.einsum("nka,nkm,nmi->nai", E, tube.ambient.metric(lag.point(Z)), T)

    Lchart = ChartManifold(l, [(a.lo, a.hi, a.periodic) for a in lag.param_box], gL_fn, fd_step=lag.fd_step,
                           validate=False)
    GamL = christoffel_batch(Lchart, L)
    gL = gL_fn(L)
    E = E_fn(L)
    dE = fd_derivative(E_fn, L, lag.fd_step, order=4)        # (N, a, i, j)
    xi = np.linalg.solve(E, x[:, :, None])[:, :, 0]
    N = len(Y)
    K = np.zeros((N, 2 * l, 2 * l))
    K[:, :l, :l] = np.eye(l)
    K[:, l:, l:] = np.eye(l)
    K[:, l:, :l] = np.einsum("nijk,nk->nij", GamL, xi)
    hS = np.einsum("nai,nab,nbj->nij", K, _blockdiag(gL, gL), K)
    dalpha = np.zeros((N, 2 * l, 2 * l))
    dalpha[:, :l, :l] = np.eye(l)
    dalpha[:, l:, :l] = np.einsum("naij,ni->naj", dE, xi)
    dalpha[:, l:, l:] = E
    inv = np.linalg.inv(dalpha)
    return _sym(np.einsum("nai,nab,nbj->nij", inv, hS, inv))


class ReflectionMetric:
    """All metric layers of the reflection construction on one tube."""

    def __init__(self, tube: TubularChart):
        tube.require_j()
        self.tube = tube

    # structures
    def J_prime(self, Y) -> np.ndarray:
        t = self.tube
        Y = np.atleast_2d(Y)
        D = t.dphi(Y)
        Jx = t.ambient.J(t.phi(Y))
        return np.linalg.solve(D, Jx @ D)

    def J_prime_zero(self, L) -> np.ndarray:
        t = self.tube
        L = np.atleast_2d(L)
        D = t.dphi_zero(L)
        return np.linalg.solve(D, t.ambient.J(t.lagrangian.point(L)) @ D)

    def J0(self, Y) -> np.ndarray:
        L, _ = self.tube.split(Y)
        C = self.tube.C(Y)
        return np.linalg.solve(C, self.J_prime_zero(L) @ C)

    def j(self, Y) -> np.ndarray:
        t = self.tube
        Y = np.atleast_2d(Y)
        ph = t.pi_h(Y)
        pv = np.eye(t.dim) - ph
        return -self.J0(Y) @ ph @ self.J_prime(Y) @ pv + ph

    # metrics
    def g0(self, Y):
        return self.tube.g0(Y)

    def g1(self, Y):
        return self.tube.g1(Y)

    def g2(self, Y):
        j = self.j(Y)
        return _sym(np.swapaxes(j, 1, 2) @ self.g1(Y) @ j)

    def g3(self, Y):
        Jp = self.J_prime(Y)
        return _sym(np.swapaxes(Jp, 1, 2) @ self.g2(Y) @ Jp)

    def layers(self, Y) -> dict:
        """g0 .. g3 and h at once, sharing the expensive pieces."""
        t = self.tube
        Y = np.atleast_2d(Y)
        L, _ = t.split(Y)
        D = t.dphi(Y)
        X = t.phi(Y)
        g0 = _sym(np.einsum("nai,nab,nbj->nij", D, t.ambient.metric(X), D))
        C = t.C(Y)
        g1 = _sym(np.swapaxes(C, 1, 2) @ t.g0_zero(L) @ C)
        Jp = np.linalg.solve(D, t.ambient.J(X) @ D)
        J0 = np.linalg.solve(C, self.J_prime_zero(L) @ C)
        ph = t.pi_h(Y)
        pv = np.eye(t.dim) - ph
        j = -J0 @ ph @ Jp @ pv + ph
        g2 = _sym(np.swapaxes(j, 1, 2) @ g1 @ j)
        g3 = _sym(np.swapaxes(Jp, 1, 2) @ g2 @ Jp)
        return {"g0": g0, "g1": g1, "g2": g2, "g3": g3, "h": g2 + g3, "J_prime": Jp, "j": j, "dphi": D}

    def h(self, Y) -> np.ndarray:
        return self.layers(Y)["h"]

    def h_ambient(self, Y) -> np.ndarray:
        """Components of phi_*(g2 + g3) in ambient coordinates at phi(Y)."""
        lay = self.layers(Y)
        inv = np.linalg.inv(lay["dphi"])
        return _sym(np.swapaxes(inv, 1, 2) @ lay["h"] @ inv)

    def T(self, Y) -> np.ndarray:
        return self.j(Y) @ (np.eye(self.tube.dim) + self.J_prime(Y))

    def T_identity_defect(self, Y) -> float:
        """max |T^t g1 T - h| where T = j (id + J')."""
        T = self.T(Y)
        return float(np.max(np.abs(np.swapaxes(T, 1, 2) @ self.g1(Y) @ T - self.h(Y))))

    # transport tensors
    def transport_back(self, Y) -> np.ndarray:
        """Ambient parallel transport from phi(y) back to the foot along the normal geodesic."""
        t = self.tube
        Y = np.atleast_2d(Y)
        if t.flat:
            return np.broadcast_to(np.eye(t.dim), (len(Y), t.dim, t.dim)).copy()
        L, x = t.split(Y)
        _, F = t.lagrangian.frames(L)
        P = t.lagrangian.point(L)
        out = []
        for k in range(len(Y)):
            traj = integrate_geodesic(t.ambient, GeodesicState(P[k], F[k] @ x[k]), 1.0)
            out.append(parallel_transport(t.ambient, traj.reversed(), np.eye(t.dim)))
        return np.array(out)

    def parallel_P(self, Y) -> np.ndarray:
        """g0-parallel transport T_y -> T_o along s -> (l, s x), in tube components."""
        t = self.tube
        Y = np.atleast_2d(Y)
        L, _ = t.split(Y)
        return np.linalg.solve(t.dphi_zero(L), self.transport_back(Y) @ t.dphi(Y))

    def A(self, Y) -> np.ndarray:
        return np.linalg.solve(self.tube.C(Y), self.parallel_P(Y))

    def D(self, Y) -> np.ndarray:
        """g0 = g1(D., .), i.e. D = g1^{-1} g0."""
        return np.linalg.solve(self.g1(Y), self.g0(Y))


def reflection_metric(tube: TubularChart) -> ReflectionMetric:
    return ReflectionMetric(tube)


def j_tensor(tube: TubularChart, Y) -> np.ndarray:
    return ReflectionMetric(tube).j(Y)


# ---------------------------------------------------------------------------
# verification

def _onb(g):
    """Columns orthonormal for g (N, d, d)."""
    Lc = np.linalg.cholesky(g)
    return np.linalg.inv(np.swapaxes(Lc, 1, 2))


def _submanifold_B_norm(metric_fn, chart: ChartManifold, X, l: int) -> np.ndarray:
    """Norm of the second fundamental form of {x = 0} at points X for ``metric_fn``."""
    G = christoffel_batch(chart, X, metric_fn=metric_fn)
    g = metric_fn(X)
    out = []
    for n in range(len(X)):
        gt = g[n, :l, :l]
        Pt = np.zeros((chart.dim, chart.dim))
        Pt[:l, :] = np.linalg.solve(gt, g[n, :l, :])        # tangential projection
        Bn = np.einsum("ab,bij->aij", np.eye(chart.dim) - Pt, G[n][:, :l, :l])
        ginv = np.linalg.inv(gt)
        out.append(math.sqrt(max(float(np.einsum("aij,ab,bkl,ik,jl->", Bn, g[n], Bn, ginv, ginv)), 0.0)))
    return np.array(out)


def _base_points(tube: TubularChart, n: int) -> np.ndarray:
    L = tube.lagrangian.sample_params(n)
    return np.concatenate([L, np.zeros((n, tube.codim))], axis=1)


def verify_th_can(refl: ReflectionMetric, sample_count: int = 20, d_samples: int = 4,
                  fiber_scale: float = 0.5) -> dict:
    """Sampled defects of the Hermitian, orthogonality, totally-geodesic and
    norm-equivalence properties of h."""
    t = refl.tube
    Y = t.sample(sample_count, fiber_scale)
    lay = refl.layers(Y)
    h, g0, Jp = lay["h"], lay["g0"], lay["J_prime"]
    U = _onb(g0)
    herm = np.swapaxes(Jp, 1, 2) @ h @ Jp - h
    herm_o = np.swapaxes(U, 1, 2) @ herm @ U
    hermitian = float(np.max(np.linalg.norm(herm_o, ord=2, axis=(1, 2))))
    eig = np.linalg.eigvals(np.linalg.solve(g0, h)).real

    O = _base_points(t, sample_count)
    layO = refl.layers(O)
    hO, JO = layO["h"], layO["J_prime"]
    l = t.l_dim
    Tv = np.zeros((len(O), t.dim, l))
    Tv[:, :l, :] = np.eye(l)
    JT = JO @ Tv
    num = np.swapaxes(JT, 1, 2) @ hO @ Tv
    nJ = np.sqrt(np.einsum("nai,nab,nbi->ni", JT, hO, JT))
    nT = np.sqrt(np.einsum("nai,nab,nbi->ni", Tv, hO, Tv))
    orth = float(np.max(np.abs(num) / (nJ[:, :, None] * nT[:, None, :])))
    on_O = {k: float(np.max(np.abs(layO[k] - layO["g0"]))) for k in ("g1", "g2", "g3")}
    on_O["h_minus_2g0"] = float(np.max(np.abs(hO - 2 * layO["g0"])))

    Bh = _submanifold_B_norm(refl.h, t.chart, O, l)
    Bg2 = _submanifold_B_norm(refl.g2, t.chart, O, l)
    Bg3 = _submanifold_B_norm(refl.g3, t.chart, O, l)
    Bg0 = _submanifold_B_norm(t.g0, t.chart, O, l)
    Bamb = [second_fundamental_norm(t.lagrangian, o[:l]) for o in O]

    Dfield = TensorField((1, 1), lambda X: np.linalg.solve(t.g0(X), refl.h(X)), t.dim)
    Dpts = t.sample(d_samples, fiber_scale)
    Dparts = np.array([tensor_norm_parts(t.chart, Dfield, p, 2) for p in Dpts])

    report = {
        "samples": sample_count,
        "fd_step": t.chart.fd_step,
        "phi_step": t.phi_step,
        "tube_radius": t.radius,
        "hermitian_defect": hermitian,
        "orthogonality_defect": orth,
        "layers_on_zero_section": on_O,
        "B_h": float(np.max(Bh)),
        "B_g2": float(np.max(Bg2)),
        "B_g3": float(np.max(Bg3)),
        "B_g0_tube": float(np.max(Bg0)),
        "B_gJ": float(np.max(Bamb)),
        "B_gJ_min": float(np.min(Bamb)),
        "norm_equivalence": {"min_eig": float(np.min(eig)), "max_eig": float(np.max(eig))},
        "D_norms": {"order0": float(np.max(Dparts[:, 0])), "order1": float(np.max(Dparts[:, 1])),
                    "order2": float(np.max(Dparts[:, 2])), "samples": d_samples, "kind": "sampled sup"},
        "T_identity_defect": refl.T_identity_defect(Y[: min(len(Y), 8)]),
    }
    report["passed"] = {
        "hermitian": hermitian < 1e-8,
        "orthogonal": orth < 1e-8,
        "totally_geodesic": report["B_h"] < 1e-5,
    }
    return report


def jacobi_characterization_of_A(refl: ReflectionMetric, l_point, v, x, normal: bool = False,
                                 times=(1.0,)) -> dict:
    """A applied to the parallel extension of v, by definition and by a Jacobi field.

    For tangent ``v`` (L coordinates) the Jacobi field starts at v with derivative
    J((nabla_v J) x - B(v, J x)); for normal ``v`` (fiber components) it starts at 0
    with derivative v and equals t A v at time t.  Both results are ambient vectors.
    """
    t = refl.tube
    lag = t.lagrangian
    am = t.ambient
    l_point = np.asarray(l_point, dtype=float)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    L = l_point[None]
    p = lag.point(L)[0]
    T = lag.tangent(L)[0]
    _, F = lag.frames(L)
    F = F[0]
    n_amb = F @ x
    if normal:
        v_tube = np.concatenate([np.zeros(t.l_dim), v])
        v_amb = F @ v
    else:
        v_tube = np.concatenate([v, np.zeros(t.codim)])
        v_amb = T @ v
    out = {"route_a": [], "route_b": [], "times": list(times)}
    # route (b): ambient Jacobi field along the normal geodesic
    traj = integrate_geodesic(am, GeodesicState(p, n_amb), max(times))
    if normal:
        init = JacobiState(np.zeros(t.dim), v_amb)
    else:
        Jp = am.J(p[None])[0]
        G = christoffel_batch(am, p[None])[0]
        dJ = fd_derivative(am.J, p[None], am.fd_step, order=4)[0]           # dJ[a, b, c] = d_c J^a_b
        nabJ = dJ + np.einsum("ace,eb->abc", G, Jp) - np.einsum("ecb,ae->abc", G, Jp)
        nabla_v_J = np.einsum("abc,c->ab", nabJ, v_amb)
        Jx = Jp @ n_amb                                                        # tangent to L
        Jx_l = np.linalg.lstsq(T, Jx, rcond=None)[0]
        B = second_fundamental_form(lag, l_point, v, Jx_l)
        init = JacobiState(v_amb, Jp @ (nabla_v_J @ n_amb - B))
    _, Zs, _ = integrate_jacobi(am, traj, init, return_history=True)
    for s in times:
        k = int(round(s / max(times) * (len(traj.t) - 1)))
        out["route_b"].append(Zs[k])
        # route (a): parallel extension, then A, pushed forward at (l, s x)
        Ys = np.concatenate([l_point, s * x])[None]
        P = refl.parallel_P(Ys)[0]
        vbar = np.linalg.solve(P, v_tube)
        Av = refl.A(Ys)[0] @ vbar
        Av_amb = t.dphi(Ys)[0] @ Av
        out["route_a"].append(s * Av_amb if normal else Av_amb)
    out["route_a"] = np.array(out["route_a"])
    out["route_b"] = np.array(out["route_b"])
    out["max_diff"] = float(np.max(np.abs(out["route_a"] - out["route_b"])))
    return out


def tameness_check(tube: TubularChart, bounds=None, radius: float | None = None, n: int = 16,
                   d_samples: int = 4) -> dict:
    """The four tameness quantities sampled on the tube and the smallest K' they allow."""
    lag = tube.lagrangian
    r = tube.radius if radius is None else float(radius)
    items = {}
    cut = detect_cut(lag, r)
    items["cut_distance"] = {"radius": r, "cut": cut["cut"], "kind": cut["kind"], "K_min": 1.0 / r,
                             "ok": not cut["cut"]}
    Y = tube.sample(n, fiber_scale=min(1.0, r / tube.radius) * 0.999)
    # the ratio extremes sit at the rim, which Halton points rarely reach
    rim = []
    for lp in lag.sample_params(4):
        for a in range(tube.codim):
            for sg in (1.0, -1.0):
                x = np.zeros(tube.codim)
                x[a] = sg * 0.999 * min(r, tube.radius)
                rim.append(np.concatenate([lp, x]))
    Y = np.concatenate([Y, np.array(rim)])
    g0 = tube.g0(Y)
    g1 = tube.g1(Y)
    lam = np.linalg.eigvals(np.linalg.solve(g1, g0)).real
    ratio_lo, ratio_hi = float(np.sqrt(lam.min())), float(np.sqrt(lam.max()))
    items["norm_equivalence"] = {"ratio_min": ratio_lo, "ratio_max": ratio_hi,
                                 "K_min": max(ratio_hi, 1.0 / ratio_lo), "ok": bool(np.all(lam > 0))}
    Dfield = TensorField((1, 1), lambda X: np.linalg.solve(tube.g1(X), tube.g0(X)), tube.dim)
    pts = tube.sample(d_samples, fiber_scale=0.5 * min(1.0, r / tube.radius))
    parts = []
    for p in pts:
        pr = tensor_norm_parts(tube.chart, Dfield, p, 2)
        g = tube.g0(p[None])[0]
        U = _onb(g[None])[0]
        D = Dfield(p[None])[0]
        op = float(np.linalg.norm(np.linalg.inv(U) @ D @ U, ord=2))
        parts.append([op, pr[1], pr[2]])
    parts = np.array(parts)
    items["D_bounds"] = {"operator_norm": float(parts[:, 0].max()), "order1": float(parts[:, 1].max()),
                         "order2": float(parts[:, 2].max()), "K_min": float(parts.max()), "ok": True}
    Ls = lag.sample_params(max(4, n // 2))
    Bn = np.array([second_fundamental_norm(lag, lp) for lp in Ls])
    dB = np.array([second_fundamental_derivative_norm(tube, lp) for lp in Ls])
    items["B_bounds"] = {"order0": float(Bn.max()), "order1": float(dB.max()),
                         "K_min": float(max(Bn.max(), dB.max())), "ok": True}
    ok = all(v["ok"] for v in items.values())
    K = max([1.0] + [v["K_min"] for v in items.values()])
    out = {"items": items, "K_prime": K if ok else None, "passed": ok}
    if not ok:
        out["failed_items"] = [k for k, v in items.items() if not v["ok"]]
    if bounds is not None:
        out["bounds"] = bounds.to_dict()
    return out


def second_fundamental_derivative_norm(tube: TubularChart, l_point) -> float:
    """|nabla B| at a point, from frame components differentiated along L."""
    lag = tube.lagrangian
    l = lag.l_dim
    L0 = np.atleast_2d(np.asarray(l_point, dtype=float))

    def comps(Z):
        out = []
        for z in Z:
            E, F = lag.frames(z[None])
            T = lag.tangent(z[None])[0]
            g = tube.ambient.metric(lag.point(z[None]))[0]
            M = np.linalg.solve(T.T @ g @ T, T.T @ g @ E[0])        # e_a = T M[:, a]
            Bm = second_fundamental_form_matrix(lag, z)
            out.append(np.einsum("kc,km,mij,ia,jb->cab", F[0], g, Bm, M, M))
        return np.array(out)

    step = 10 * lag.fd_step
    Bf = comps(L0)[0]
    dB = fd_derivative(comps, L0, step, order=4)[0]                     # (c, a, b, i)
    om = tube.connection_forms(L0)[0]                                     # [d, a, i]
    omn = tube.normal_connection_forms(L0)[0]
    nab = (dB - np.einsum("dai,cdb->cabi", om, Bf) - np.einsum("dbi,cad->cabi", om, Bf)
           + np.einsum("cdi,dab->cabi", omn, Bf))
    E, _ = lag.frames(L0)
    T = lag.tangent(L0)[0]
    g = tube.ambient.metric(lag.point(L0))[0]
    M = np.linalg.solve(T.T @ g @ T, T.T @ g @ E[0])
    nab_o = np.einsum("cabi,ik->cabk", nab, M)
    return float(np.sqrt(np.sum(nab_o ** 2)))


# ---------------------------------------------------------------------------
# interpolation

def smoothstep(s):
    """Quintic smoothstep 6 s^5 - 15 s^4 + 10 s^3, clamped to [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def bump(s):
    """k with k = 1 near 0 and k = 0 near 1."""
    return 1.0 - smoothstep(s)


@dataclass
class BlendedMetric:
    refl: ReflectionMetric
    delta: float

    def distance(self, Y) -> np.ndarray:
        _, x = self.refl.tube.split(Y)
        return np.linalg.norm(x, axis=1)

    def f(self, Y) -> np.ndarray:
        return 1.0 - bump((self.distance(Y) - self.delta) / self.delta)

    def metric(self, Y) -> np.ndarray:
        """f g0 + (1 - f) h in tube coordinates; h is evaluated only where f < 1."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        f = self.f(Y)
        out = self.refl.tube.g0(Y)
        need = f < 1.0
        if np.any(need):
            h = self.refl.h(Y[need])
            fn = f[need][:, None, None]
            out[need] = fn * out[need] + (1.0 - fn) * h
        return out

    def ambient_metric(self, Q) -> np.ndarray:
        """Blend at ambient points: g_J beyond 2 delta, otherwise via the nearest foot."""
        from .geodesic import nearest_points_many
        t = self.refl.tube
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        out = t.ambient.metric(Q)
        feet = nearest_points_many(t.lagrangian, Q)
        for k, fl in enumerate(feet):
            foot = min(fl, key=lambda ft: ft.distance)
            if foot.distance >= 2 * self.delta:
                continue
            y = np.concatenate([foot.l_point, foot.fiber])[None]
            f = float(self.f(y)[0])
            if f < 1.0:
                out[k] = f * out[k] + (1.0 - f) * self.refl.h_ambient(y)[0]
        return out

    def chart(self, fd_step: float | None = None) -> ChartManifold:
        t = self.refl.tube
        return ChartManifold(t.dim, [(a.lo, a.hi, a.periodic) for a in t.chart.box], self.metric,
                             fd_step=fd_step or t.chart.fd_step, name="blend", validate=False)


def interpolate_metrics(refl: ReflectionMetric, delta: float) -> BlendedMetric:
    """Blend g_J (outside 2 delta) with the reflection metric (inside delta)."""
    if not delta > 0:
        raise ValidationError("delta must be positive")
    if not 2 * delta < refl.tube.radius:
        raise ValidationError(f"2 delta = {2 * delta} is not below the verified tube radius {refl.tube.radius}")
    return BlendedMetric(refl, float(delta))


def curvature_norms(chart: ChartManifold, X, metric_fn=None) -> np.ndarray:
    X = np.atleast_2d(X)
    fn = metric_fn or chart.metric
    R = riemann_batch(chart, X, metric_fn=fn)
    g = fn(X)
    return np.array([pointwise_norm(g[k], R[k], (3, 1)) for k in range(len(X))])


def blend_curvature_report(blend: BlendedMetric, n: int = 12, fd_step: float | None = None) -> dict:
    """Sampled |R| of the blend across the annulus, at fd_step and fd_step / 2, with the
    constituent curvatures and the connection-difference term for comparison."""
    t = blend.refl.tube
    d = blend.delta
    L = t.lagrangian.sample_params(n)
    rng = np.linspace(0.05 * d, 2.45 * d, n)
    dirs = np.zeros((n, t.codim))
    dirs[:, 0] = 1.0
    Y = np.concatenate([L, rng[:, None] * dirs], axis=1)
    ch = blend.chart(fd_step)
    r1 = curvature_norms(ch, Y)
    r2 = curvature_norms(ch.with_fd_step(0.5 * ch.fd_step), Y)
    # points where |R| is at the FD noise level are compared against 1% of the peak
    floor = max(1e-3, 1e-2 * float(np.max(np.abs(r1))))
    rel = float(np.max(np.abs(r1 - r2) / np.maximum(np.abs(r1), floor)))
    g0c = t.chart
    hc = ChartManifold(t.dim, [(a.lo, a.hi, a.periodic) for a in g0c.box], blend.refl.h,
                       fd_step=ch.fd_step, validate=False)
    rg = curvature_norms(g0c.with_fd_step(ch.fd_step), Y)
    rh = curvature_norms(hc, Y)
    pair = MetricPair(g0c.with_fd_step(ch.fd_step), ch)
    Hf = connection_difference_field(pair)
    Hparts = np.array([tensor_norm_parts(pair.g, Hf, y, 1) for y in Y])
    H1 = Hparts.sum(axis=1)
    # |S| <= 2 (|H|_1 + |H|_1^2) with norms taken in g0
    bound = 1.5 * max(rg.max(), rh.max()) + 2.0 * float(np.max(H1 + H1 ** 2))
    return {"points": Y.tolist(), "curvature": r1.tolist(), "curvature_half_step": r2.tolist(),
            "max_relative_change": rel, "stable": bool(rel < 0.05),
            "finite": bool(np.all(np.isfinite(r1))), "max_curvature": float(np.max(r1)),
            "constituent_g0": float(rg.max()), "constituent_h": float(rh.max()),
            "connection_term_bound": bound, "below_bound": bool(np.max(r1) <= bound)}


def partition_report(blend: BlendedMetric, n: int = 16) -> dict:
    """Range of f, support checks and sampled |f|_2 at two fd steps."""
    t = blend.refl.tube
    d = blend.delta
    L = t.lagrangian.sample_params(n)
    rs = np.linspace(0.0, min(2.5 * d, 0.99 * t.radius), n)
    dirs = np.zeros((n, t.codim))
    dirs[:, 0] = 1.0
    Y = np.concatenate([L, rs[:, None] * dirs], axis=1)
    f = blend.f(Y)
    dist = blend.distance(Y)
    outside = (dist <= d) | (dist >= 2 * d)
    ffield = TensorField((0, 0), lambda X: blend.f(X), t.dim)
    inner = (dist > d * 1.02) & (dist < 2 * d * 0.98)
    pts = Y[inner][:4]
    c1 = t.chart
    c2 = c1.with_fd_step(0.5 * c1.fd_step)
    n1 = np.array([tensor_norm_parts(c1, ffield, p, 2) for p in pts])
    n2 = np.array([tensor_norm_parts(c2, ffield, p, 2) for p in pts])
    return {"f_min": float(f.min()), "f_max": float(f.max()),
            "product_outside_annulus": float(np.max(np.abs(f * (1 - f))[outside])) if np.any(outside) else 0.0,
            "f_norm2": float(n1.sum(axis=1).max()), "f_norm2_half_step": float(n2.sum(axis=1).max()),
            "bump_second_derivative_bound": 10.0 / math.sqrt(3.0)}


# ---------------------------------------------------------------------------
# Lagrangian catalog

def circle_in_C(radius: float = 1.0) -> LagrangianEmbedding:
    amb = euclidean(2)
    return LagrangianEmbedding(amb, lambda L: radius * np.stack([np.cos(L[..., 0]), np.sin(L[..., 0])], -1),
                               1, [(-math.pi, math.pi, True)], name="circle_in_C", params={"radius": radius})


def real_plane_in_Cn(n: int = 1, half_width: float = 5.0) -> LagrangianEmbedding:
    amb = euclidean(2 * n)

    def p(L):
        L = np.asarray(L)
        out = np.zeros(L.shape[:-1] + (2 * n,))
        out[..., 0::2] = L
        return out

    return LagrangianEmbedding(amb, p, n, [(-half_width, half_width)] * n, name="real_plane_in_Cn",
                               params={"n": n})


def equator_in_sphere(r: float = 1.0) -> LagrangianEmbedding:
    amb = round_sphere(r)
    return LagrangianEmbedding(amb, lambda L: np.stack([np.full_like(L[..., 0], math.pi / 2), L[..., 0]], -1),
                               1, [(-math.pi, math.pi, True)], name="equator_in_sphere", params={"r": r})


def circle_times_line(radius: float = 1.0, half_width: float = 3.0) -> LagrangianEmbedding:
    """S^1 x R inside C x C."""
    amb = euclidean(4)

    def p(L):
        L = np.asarray(L)
        z = np.zeros(L.shape[:-1])
        return np.stack([radius * np.cos(L[..., 0]), radius * np.sin(L[..., 0]), L[..., 1], z], -1)

    return LagrangianEmbedding(amb, p, 2, [(-math.pi, math.pi, True), (-half_width, half_width)],
                               name="circle_times_line", params={"radius": radius})


def flat_torus_circle(height: float = math.pi) -> LagrangianEmbedding:
    """Closed geodesic {y = height} in the square flat torus."""
    amb = flat_torus((2 * math.pi, 2 * math.pi))
    return LagrangianEmbedding(amb, lambda L: np.stack([L[..., 0], np.full_like(L[..., 0], height)], -1),
                               1, [(0.0, 2 * math.pi, True)], name="flat_torus_circle", params={"height": height})


def gradient_graph(a: float = 0.2, half_width: float = 2.0) -> LagrangianEmbedding:
    """Graph of the gradient of F(q) = a (cos q1 + cos q2 + sin q1 sin q2) in C^2."""
    amb = euclidean(4)

    def p(L):
        q1, q2 = L[..., 0], L[..., 1]
        d1 = a * (-np.sin(q1) + np.cos(q1) * np.sin(q2))
        d2 = a * (-np.sin(q2) + np.sin(q1) * np.cos(q2))
        return np.stack([q1, d1, q2, d2], -1)

    return LagrangianEmbedding(amb, p, 2, [(-half_width, half_width)] * 2, name="gradient_graph",
                               params={"a": a})


LAGRANGIANS = {
    "circle_in_C": {"factory": circle_in_C, "ambient": "euclidean(2)",
                    "params": {"radius": "float > 0, default 1"}},
    "real_plane_in_Cn": {"factory": real_plane_in_Cn, "ambient": "euclidean(2n)",
                         "params": {"n": "int >= 1, default 1", "half_width": "float, default 5"}},
    "equator_in_sphere": {"factory": equator_in_sphere, "ambient": "round_sphere(r)",
                          "params": {"r": "float > 0, default 1"}},
    "circle_times_line": {"factory": circle_times_line, "ambient": "euclidean(4)",
                          "params": {"radius": "float > 0, default 1", "half_width": "float, default 3"}},
    "flat_torus_circle": {"factory": flat_torus_circle, "ambient": "flat_torus",
                          "params": {"height": "float, default pi"}},
    "gradient_graph": {"factory": gradient_graph, "ambient": "euclidean(4)",
                       "params": {"a": "float, default 0.2", "half_width": "float, default 2"}},
}
