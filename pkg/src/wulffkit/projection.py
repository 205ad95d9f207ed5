"""Anisotropic distance, nearest projection and offset curvatures.

Distances are measured with the dual norm, ``delta(x) = min phi*(x - c)``.
For a convex body ``K`` with support function ``h`` this equals

    delta(x) = max_eta (eta . x - h(eta)) / phi(eta),

and at the optimal direction ``eta`` the foot is the boundary point with
outer normal ``eta`` while ``x = foot + delta * grad phi(eta)``.  Smooth bodies
are solved with a batched Newton iteration on that relation.  The complement
of a body ``C`` uses the mirrored formula
``delta(x) = min_eta (h_C(eta) - eta . x) / phi(-eta)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .bodies import ConvexBody, HPolytope, SmoothBody, WulffBody
from .errors import AmbiguousProjection, IllConditioned, InsideBody, NoConvergence, NotNormalDirection
from .norms import NormSpec, same_norm, unit_tangent_basis
from .tolerances import DEFAULTS, Tolerances
from .wulff import sphere_mesh


@dataclass(frozen=True)
class Complement:
    """Closure of R^d minus the interior of ``body``."""

    body: ConvexBody

    @property
    def dim(self) -> int:
        return self.body.dim


def complement_of(body: ConvexBody) -> Complement:
    return Complement(body)


@dataclass(frozen=True)
class ProjectionResult:
    distance: float
    foot: np.ndarray
    cahn_hoffman: np.ndarray
    multiplicity: str = "unique"  # or "ambiguous"
    face: int | None = None  # polytope face index (HPolytope.faces)
    normal: np.ndarray | None = None  # Euclidean outer normal of the body at the foot

    @property
    def is_unique(self) -> bool:
        return self.multiplicity == "unique"


@dataclass(frozen=True)
class BatchProjection:
    distance: np.ndarray
    foot: np.ndarray
    face: np.ndarray | None = None
    normal: np.ndarray | None = None


def _is_symmetric(spec: NormSpec) -> bool:
    return spec.variant in ("euclidean", "ellipsoidal", "perturbed")


# ---------------------------------------------------------------------------
# smooth bodies

def _scan_directions(dim: int, resolution: int) -> np.ndarray:
    return np.asarray(sphere_mesh(dim, resolution).nodes)


def _smooth_newton(body: SmoothBody, spec: NormSpec, X, eta, delta, sigma: float, tol: Tolerances,
                   strict: bool = True):
    """Solve c + s grad psi(eta) + delta grad phi(sigma eta) = x for (eta, delta).

    sigma = +1 projects onto the body from outside, sigma = -1 onto its
    boundary from inside.  Damped by step halving on the residual norm.
    With strict=False a convergence mask is returned instead of raising.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    c, s, psi = body.center, body.scale, body.psi
    scale = np.maximum(np.linalg.norm(X - c, axis=1), s) + delta

    def residual(eta, delta, Xs):
        return c + s * psi.gradient(eta) + delta[:, None] * spec.gradient(sigma * eta) - Xs

    G = residual(eta, delta, X)
    gn = np.linalg.norm(G, axis=1)
    for _ in range(tol.projection_max_iter):
        active = np.flatnonzero(gn > tol.projection_residual * scale)
        if len(active) == 0:
            break
        e, dl = eta[active], delta[active]
        Q = unit_tangent_basis(e)
        B = s * psi.hessian(e) + sigma * dl[:, None, None] * spec.hessian(sigma * e)
        J = np.concatenate([B @ Q, spec.gradient(sigma * e)[:, :, None]], axis=2)
        step = np.linalg.solve(J, -G[active][..., None])[..., 0]
        t = np.ones(len(active))
        done = np.zeros(len(active), dtype=bool)
        for _half in range(40):
            ne = e + t[:, None] * np.einsum("nij,nj->ni", Q, step[:, : d - 1])
            ne /= np.linalg.norm(ne, axis=1, keepdims=True)
            nd = dl + t * step[:, d - 1]
            nG = residual(ne, nd, X[active])
            ngn = np.linalg.norm(nG, axis=1)
            ok = ~done & (ngn < gn[active])
            idx = active[ok]
            eta[idx], delta[idx], G[idx], gn[idx] = ne[ok], nd[ok], nG[ok], ngn[ok]
            done |= ok
            if done.all():
                break
            t = np.where(done, t, 0.5 * t)
        if not done.any():
            break
    converged = gn <= 1e3 * tol.projection_residual * scale
    if not strict:
        return eta, delta, converged
    if not converged.all():
        raise NoConvergence(f"projection Newton stalled (residual {gn.max():.3g})")
    return eta, delta


def _wulff_gauge(body: SmoothBody, spec: NormSpec):
    """(center, scale) when the body is a Wulff shape of ``spec``, else None."""
    if isinstance(body, WulffBody) and same_norm(body.norm, spec):
        return body.center, body.scale
    if body.variant == "ellipsoid" and spec.variant in ("euclidean", "ellipsoidal"):
        # {(x-c)^T M (x-c) <= 1} is c + s W exactly when M^{-1} = s^2 A
        Minv = np.linalg.inv(body.M)
        s2 = np.trace(Minv) / np.trace(spec.A)
        if np.allclose(Minv, s2 * spec.A, rtol=1e-13, atol=0.0):
            return body.center, float(np.sqrt(s2))
    return None


def _project_smooth(body: SmoothBody, spec: NormSpec, X, tol: Tolerances) -> BatchProjection:
    X = np.asarray(X, dtype=float)
    gauge = _wulff_gauge(body, spec)
    if gauge is not None:
        center, scale = gauge
        y = X - center
        g = spec.dual_value(y)
        foot = center + scale * y / g[:, None]
        return BatchProjection(g - scale, foot, None, body.outer_normal(foot))
    V = _scan_directions(body.dim, 64 if body.dim == 2 else 8)
    F = (X @ V.T - body.support_value(V)) / spec.value(V)
    k = np.argmax(F, axis=1)
    eta = V[k].copy()
    delta = np.maximum(F[np.arange(len(X)), k], 0.0)
    eta, delta = _smooth_newton(body, spec, X, eta, delta, 1.0, tol)
    return BatchProjection(delta, body.boundary_point(eta), None, eta)


# ---------------------------------------------------------------------------
# polytopes

def _edge_min(spec: NormSpec, X, p, e, length, iters: int = 60):
    """min over t in [0, L] of phi*(x - p - t e) for unit e (batched, safeguarded Newton)."""
    n = len(X)
    lo = np.zeros(n)
    hi = np.full(n, length)

    def deriv(t):
        y = X - p - t[:, None] * e
        return -spec.dual_gradient(y) @ e

    glo, ghi = deriv(lo), deriv(hi)
    t = np.where(glo >= 0, 0.0, np.where(ghi <= 0, length, 0.5 * length))
    inner = (glo < 0) & (ghi > 0)
    idx = np.flatnonzero(inner)
    for _ in range(iters):
        if len(idx) == 0:
            break
        y = X[idx] - p - t[idx, None] * e
        g = -spec.dual_gradient(y) @ e
        h = np.einsum("i,nij,j->n", e, spec.dual_hessian(y), e)
        neg = g < 0
        lo[idx] = np.where(neg, t[idx], lo[idx])
        hi[idx] = np.where(neg, hi[idx], t[idx])
        tn = t[idx] - g / np.maximum(h, 1e-300)
        bad = (tn <= lo[idx]) | (tn >= hi[idx]) | ~np.isfinite(tn)
        tn = np.where(bad, 0.5 * (lo[idx] + hi[idx]), tn)
        conv = np.abs(tn - t[idx]) <= 1e-14 * max(length, 1.0)
        t[idx] = tn
        idx = idx[~conv]
    y = X - p - t[:, None] * e
    return spec.dual_value(y), p + t[:, None] * e, inner & (t > 0) & (t < length)


def _project_polytope(P: HPolytope, spec: NormSpec, X, tol: Tolerances) -> BatchProjection:
    X = np.asarray(X, dtype=float)
    n = len(X)
    scale = max(1.0, np.abs(P.b).max())
    best = np.full(n, np.inf)
    foot = np.zeros_like(X)
    face = np.full(n, -1)
    V = P.vertices
    for fi, f in enumerate(P.faces):
        if f.dim == 0:
            v = V[f.vertices[0]]
            dist = spec.dual_value(X - v)
            cand = np.broadcast_to(v, X.shape)
            ok = np.ones(n, dtype=bool)
        elif f.dim == P.dim - 1:
            i = f.constraints[0]
            nrm = P.A[i]
            g = X @ nrm - P.b[i]
            dist = g / spec.value(nrm)
            cand = X - dist[:, None] * spec.gradient(nrm)
            ok = (g > 0) & np.all(cand @ P.A.T <= P.b + 1e-10 * scale, axis=1)
        else:
            a, b = V[list(f.vertices)]
            L = float(np.linalg.norm(b - a))
            dist, cand, ok = _edge_min(spec, X, a, (b - a) / L, L)
        better = ok & (dist < best)
        best = np.where(better, dist, best)
        foot[better] = cand[better]
        face[better] = fi
    return BatchProjection(best, foot, face, None)


# ---------------------------------------------------------------------------
# complements

def _complement_polytope(P: HPolytope, spec: NormSpec, X):
    X = np.asarray(X, dtype=float)
    phis = spec.value(-P.A)
    D = (P.b - X @ P.A.T) / phis
    k = np.argmin(D, axis=1)
    delta = D[np.arange(len(X)), k]
    foot = X - delta[:, None] * spec.gradient(-P.A[k])
    Ds = np.sort(D, axis=1)
    gap = (Ds[:, 1] - Ds[:, 0]) if D.shape[1] > 1 else np.full(len(X), np.inf)
    return delta, foot, k, gap


def _complement_smooth_point(body: SmoothBody, spec: NormSpec, x, tol: Tolerances):
    """All refined local minima (delta, eta) for one interior point, best first."""
    sm = sphere_mesh(body.dim, 64 if body.dim == 2 else 16)
    V = np.asarray(sm.nodes)
    F = (body.support_value(V) - V @ x) / spec.value(-V)
    nb = np.full(len(V), np.inf)
    E = sm.elements
    for a in range(E.shape[1]):
        for b in range(E.shape[1]):
            if a != b:
                np.minimum.at(nb, E[:, a], F[E[:, b]])
    cand = np.flatnonzero(F <= nb)
    X = np.broadcast_to(x, (len(cand), body.dim)).copy()
    eta, delta, ok = _smooth_newton(body, spec, X, V[cand].copy(), np.maximum(F[cand], 0.0), -1.0, tol,
                                    strict=False)
    # candidates started near a focal point may stall; only the global minimiser matters
    if not ok.any():
        raise NoConvergence("no local minimum of the complement distance converged")
    eta, delta = eta[ok], delta[ok]
    order = np.argsort(delta)
    return delta[order], eta[order]


def _project_complement(C: Complement, spec: NormSpec, x, tol: Tolerances) -> ProjectionResult:
    body = C.body
    x = np.asarray(x, dtype=float)
    if not np.all(body.contains(x)):
        raise ValueError("complement projection needs x inside the body")
    if isinstance(body, HPolytope):
        delta, foot, k, gap = _complement_polytope(body, spec, x[None])
        amb = gap[0] <= tol.ambiguity_gap * max(delta[0], 1e-300)
        nu = (x - foot[0]) / delta[0]
        return ProjectionResult(float(delta[0]), foot[0], nu, "ambiguous" if amb else "unique", None, body.A[k[0]])
    gauge = _wulff_gauge(body, spec)
    if gauge is not None and _is_symmetric(spec):
        # gauge-radial: the foot is the radial boundary point, unique off the center
        center, scale = gauge
        y = x - center
        g = float(spec.dual_value(y)) if np.linalg.norm(y) > 0 else 0.0
        amb = g <= 0.5 * tol.ambiguity_gap * scale
        u = y / g if not amb else np.eye(body.dim)[0] / spec.dual_value(np.eye(body.dim)[0])
        foot = center + scale * u
        delta = scale - g
        return ProjectionResult(delta, foot, (x - foot) / delta, "ambiguous" if amb else "unique", None,
                                body.outer_normal(foot))
    deltas, etas = _complement_smooth_point(body, spec, x, tol)
    delta, eta = deltas[0], etas[0]
    foot = body.boundary_point(eta)
    amb = False
    if len(deltas) > 1:
        feet = body.boundary_point(etas[1:])
        sep = np.linalg.norm(feet - foot, axis=1)
        close = deltas[1:] - delta <= tol.ambiguity_gap * max(delta, 1e-300)
        amb = bool(np.any(close & (sep > tol.ambiguity_separation * body.diameter)))
    return ProjectionResult(float(delta), foot, (x - foot) / delta, "ambiguous" if amb else "unique", None, eta)


# ---------------------------------------------------------------------------
# public API

def project_batch(body: ConvexBody, spec: NormSpec, X, tol: Tolerances = DEFAULTS) -> BatchProjection:
    """Distances and feet for a stack of points outside a convex body.

    Points inside the body are not detected here; callers filter them first.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        return BatchProjection(np.zeros(0), np.zeros((0, body.dim)), np.zeros(0, dtype=int), None)
    if isinstance(body, HPolytope):
        return _project_polytope(body, spec, X, tol)
    return _project_smooth(body, spec, X, tol)


def distance_project(K, spec: NormSpec, x, tol: Tolerances = DEFAULTS) -> ProjectionResult:
    """Nearest phi-projection of x onto K (a ConvexBody or a Complement)."""
    x = np.asarray(x, dtype=float)
    if isinstance(K, Complement):
        return _project_complement(K, spec, x, tol)
    if np.all(K.contains(x)):
        raise InsideBody("x lies in the body")
    bp = project_batch(K, spec, x[None], tol)
    delta, foot = float(bp.distance[0]), bp.foot[0]
    nu = (x - foot) / delta
    face = None if bp.face is None else int(bp.face[0])
    normal = None if bp.normal is None else bp.normal[0]
    return ProjectionResult(delta, foot, nu, "unique", face, normal)


def distance(K, spec: NormSpec, x, tol: Tolerances = DEFAULTS) -> float:
    """delta^phi_K(x); zero for points of a convex body."""
    x = np.asarray(x, dtype=float)
    if not isinstance(K, Complement) and np.all(K.contains(x)):
        return 0.0
    if isinstance(K, Complement) and not np.all(K.body.contains(x)):
        return 0.0
    return distance_project(K, spec, x, tol).distance


def _normal_cone(body: ConvexBody, xi, tol: Tolerances) -> np.ndarray:
    """Generators (rows) of the Euclidean normal cone of a convex body at xi."""
    if isinstance(body, HPolytope):
        act = body.active(xi, tol=max(tol.boundary, 1e-9))
        return body.A[act]
    return body.outer_normal(np.asarray(xi, dtype=float))[None]


def optimality_residual(K: ConvexBody, spec: NormSpec, x, xi, tol: Tolerances = DEFAULTS) -> float:
    """Distance from grad phi*(x - xi) to the normal cone of K at xi."""
    g = spec.dual_gradient(np.asarray(x, float) - np.asarray(xi, float))
    N = _normal_cone(K, xi, tol)
    if len(N) == 0:
        return float(np.linalg.norm(g))
    _, res = nnls(N.T, g)
    return float(res)


# ---------------------------------------------------------------------------
# offset curvatures

@dataclass(frozen=True)
class CurvatureSpectrum:
    chi: np.ndarray
    kappa: np.ndarray
    radius_used: float
    eigvectors: np.ndarray  # (n, d) tangent vectors, row i pairs with chi[i]
    kappa_infinite: np.ndarray = field(default=None)
    eigen_residual: float = 0.0
    richardson_defect: float = 0.0
    richardson_ok: bool = True

    def kappa_report(self, sentinel: float = 1e300) -> list[float]:
        """kappa with infinite entries replaced by a finite sentinel (reporting only)."""
        return [sentinel if inf else float(k) for k, inf in zip(self.kappa, self.kappa_infinite)]


def _sorted_eig(vals, vecs):
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if len(nz) and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    keys = [vecs[i] for i in range(vecs.shape[0] - 1, -1, -1)] + [np.round(vals, 10)]
    order = np.lexsort(keys)
    return vals[order], vecs[:, order].T


def _nu_field(K, spec, tol):
    if isinstance(K, Complement):
        def f(P):
            out = []
            for p in P:
                r = _project_complement(K, spec, p, tol)
                if not r.is_unique:
                    raise AmbiguousProjection("projection is not unique near x")
                out.append(r.cahn_hoffman)
            return np.array(out)
    else:
        def f(P):
            bp = project_batch(K, spec, P, tol)
            return (P - bp.foot) / bp.distance[:, None]
    return f


def _fd_jacobian(nu, x, h):
    d = len(x)
    E = np.eye(d) * h
    P = np.concatenate([x + E, x - E])
    N = nu(P)
    return ((N[:d] - N[d:]) / (2 * h)).T  # J[:, k] = d nu / d x_k


def chi_spectrum(K, spec: NormSpec, x, tol: Tolerances = DEFAULTS) -> CurvatureSpectrum:
    """Eigenvalues of D nu on the tangent space of the distance level set through x."""
    x = np.asarray(x, dtype=float)
    base = distance_project(K, spec, x, tol)
    if not base.is_unique:
        raise AmbiguousProjection("x has more than one nearest point")
    r = base.distance
    nu = _nu_field(K, spec, tol)
    grad = spec.dual_gradient(base.cahn_hoffman)
    Q = unit_tangent_basis(grad / np.linalg.norm(grad))
    h = tol.fd_step * r

    def spectrum(h):
        J = _fd_jacobian(nu, x, h)
        R = Q.T @ J @ Q
        w, y = np.linalg.eig(R)
        vecs = Q @ y
        res = np.linalg.norm(J @ vecs - vecs * w[None, :], axis=0)
        rel = float(res.max() / max(np.linalg.norm(J, 2), 1.0 / r)) if len(w) else 0.0
        return np.real(w), np.real(vecs), rel

    chi, vecs, eres = spectrum(h)
    chi2, _, _ = spectrum(h / 2)
    if eres > tol.eigen_residual:
        raise IllConditioned(f"eigen-residual {eres:.3g}")
    chi, vecs = _sorted_eig(chi, vecs)
    rdef = float(np.max(np.abs(chi - np.sort(chi2))) * r) if len(chi) else 0.0
    return CurvatureSpectrum(
        chi=chi,
        kappa=np.full_like(chi, np.nan),
        radius_used=r,
        eigvectors=vecs,
        kappa_infinite=np.zeros(len(chi), dtype=bool),
        eigen_residual=eres,
        richardson_defect=rdef,
        richardson_ok=rdef <= tol.richardson,
    )


def kappa_spectrum(K, spec: NormSpec, a, u, r: float, tol: Tolerances = DEFAULTS) -> CurvatureSpectrum:
    """Boundary curvatures at the bundle point (a, u) from the offset at distance r."""
    x = np.asarray(a, dtype=float) + r * np.asarray(u, dtype=float)
    cs = chi_spectrum(K, spec, x, tol)
    den = 1.0 - r * cs.chi
    inf = den <= tol.kappa_infinite
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(inf, np.inf, cs.chi / np.where(inf, 1.0, den))
    return CurvatureSpectrum(
        chi=cs.chi,
        kappa=kappa,
        radius_used=r,
        eigvectors=cs.eigvectors,
        kappa_infinite=inf,
        eigen_residual=cs.eigen_residual,
        richardson_defect=cs.richardson_defect,
        richardson_ok=cs.richardson_ok,
    )


def reach_estimate(C: Complement, spec: NormSpec, a, u, tol: Tolerances = DEFAULTS) -> float:
    """sup{s : delta(a + s u) = s} for the complement of a body, by bisection."""
    if not isinstance(C, Complement):
        C = Complement(C)
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    diam = C.body.diameter

    def ok(s):
        x = a + s * u
        if not np.all(C.body.contains(x)):
            return False
        return abs(distance(C, spec, x, tol) - s) <= tol.reach_predicate * s

    eps = tol.reach_probe * diam
    if not ok(eps):
        raise NotNormalDirection("(a, u) is not a normal-bundle point of the complement")
    lo, hi = eps, diam
    if ok(hi):
        return hi
    while hi - lo > tol.reach_rel * lo:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
