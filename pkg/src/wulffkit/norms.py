"""Uniformly convex C^2 norms, their derivatives and their duals.

All evaluation methods are vectorised: they accept a single ``(d,)`` vector or
a stack ``(..., d)`` and broadcast over the leading axes.  Hessians come back
with shape ``(..., d, d)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NotElliptic, ZeroVector
from .tolerances import DEFAULTS, Tolerances


@dataclass(frozen=True)
class NormJet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _check_nonzero(u: np.ndarray, tol: float) -> np.ndarray:
    r = np.linalg.norm(u, axis=-1)
    if np.any(r <= tol):
        raise ZeroVector(f"vector norm below {tol:g}")
    return r


def unit_tangent_basis(eta: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the plane orthogonal to each unit vector.

    Returns shape ``(..., d, d-1)``; columns span ``eta^perp``.
    """
    eta = np.asarray(eta, dtype=float)
    d = eta.shape[-1]
    if d == 2:
        t = np.stack([-eta[..., 1], eta[..., 0]], axis=-1)
        return t[..., :, None]
    k = np.argmin(np.abs(eta), axis=-1)
    a = np.zeros_like(eta)
    np.put_along_axis(a, k[..., None], 1.0, axis=-1)
    t1 = a - np.einsum("...i,...i->...", a, eta)[..., None] * eta
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(eta, t1)
    return np.stack([t1, t2], axis=-1)


class NormSpec:
    """An anisotropy norm phi on R^d (d = 2 or 3)."""

    dim: int
    variant: str = ""

    # subclasses implement value/gradient/hessian and the dual trio
    def value(self, u):  # pragma: no cover - abstract
        raise NotImplementedError

    def gradient(self, u):  # pragma: no cover - abstract
        raise NotImplementedError

    def hessian(self, u):  # pragma: no cover - abstract
        raise NotImplementedError

    def dual_value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def dual_gradient(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def dual_hessian(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_json(self) -> dict:  # pragma: no cover - abstract
        raise NotImplementedError

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def label(self) -> str:
        return self.variant


@dataclass(frozen=True, eq=False)
class EllipsoidalNorm(NormSpec):
    """phi(u) = sqrt(u^T A u) with A symmetric positive definite."""

    A: np.ndarray
    variant: str = field(default="ellipsoidal", init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] not in (2, 3):
            raise ValueError("A must be a 2x2 or 3x3 matrix")
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("A must be symmetric")
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A)[0] <= 0:
            raise NotElliptic("A must be positive definite")
        A.setflags(write=False)
        Ainv = np.linalg.inv(A)
        Ainv = 0.5 * (Ainv + Ainv.T)
        Ainv.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "_Ainv", Ainv)
        object.__setattr__(self, "dim", A.shape[0])

    @staticmethod
    def _quad(M, u):
        u = np.asarray(u, dtype=float)
        Mu = u @ M  # M symmetric
        return Mu, np.sqrt(np.einsum("...i,...i->...", u, Mu))

    def _val(self, M, u):
        _check_nonzero(np.asarray(u, float), DEFAULTS.zero_vector)
        return self._quad(M, u)[1]

    def _grad(self, M, u):
        _check_nonzero(np.asarray(u, float), DEFAULTS.zero_vector)
        Mu, v = self._quad(M, u)
        return Mu / v[..., None]

    def _hess(self, M, u):
        _check_nonzero(np.asarray(u, float), DEFAULTS.zero_vector)
        Mu, v = self._quad(M, u)
        outer = Mu[..., :, None] * Mu[..., None, :]
        return (M - outer / (v * v)[..., None, None]) / v[..., None, None]

    def value(self, u):
        return self._val(self.A, u)

    def gradient(self, u):
        return self._grad(self.A, u)

    def hessian(self, u):
        return self._hess(self.A, u)

    def dual_value(self, x):
        return self._val(self._Ainv, x)

    def dual_gradient(self, x):
        return self._grad(self._Ainv, x)

    def dual_hessian(self, x):
        return self._hess(self._Ainv, x)

    def dual_norm(self) -> "EllipsoidalNorm":
        return EllipsoidalNorm(self._Ainv)

    def to_json(self) -> dict:
        return {"variant": "ellipsoidal", "A": self.A.tolist()}

    def label(self) -> str:
        return "ellipsoidal" + str(np.round(np.diag(self.A), 6).tolist())


class EuclideanNorm(EllipsoidalNorm):
    """The standard norm |u|; self-dual."""

    def __init__(self, dim: int = 3):
        if dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        super().__init__(np.eye(dim))
        object.__setattr__(self, "variant", "euclidean")

    def to_json(self) -> dict:
        return {"variant": "euclidean", "dimension": self.dim}

    def label(self) -> str:
        return "euclidean"

    def __repr__(self) -> str:
        return f"EuclideanNorm(dim={self.dim})"


def default_profile(dim: int) -> tuple:
    """Cubic-symmetry profile h(eta) = sum_i eta_i^4."""
    return tuple((1.0, tuple(float(v) for v in np.eye(dim)[i]), 4) for i in range(dim))


@dataclass(frozen=True, eq=False)
class PerturbedNorm(NormSpec):
    """phi(u) = |u| (1 + epsilon * h(u/|u|)).

    The profile ``h`` is a sum of zonal terms ``c_k (w_k . eta)^p_k`` with even
    integer powers, so phi stays even and C^infinity away from the origin.
    Construction rejects perturbations whose sampled ellipticity drops below
    ``tol.min_ellipticity``.
    """

    dim: int
    epsilon: float
    profile: tuple = ()
    tol: Tolerances = DEFAULTS
    variant: str = field(default="perturbed", init=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        prof = self.profile or default_profile(self.dim)
        terms = []
        for term in prof:
            if isinstance(term, dict):
                c, w, p = term["coeff"], term["direction"], term.get("power", 4)
            else:
                c, w, p = term
            w = np.asarray(w, dtype=float)
            if w.shape != (self.dim,) or np.linalg.norm(w) == 0:
                raise ValueError("profile direction must be a nonzero d-vector")
            if int(p) != p or p < 2 or p % 2:
                raise ValueError("profile powers must be even integers >= 2")
            w = w / np.linalg.norm(w)
            terms.append((float(c), tuple(w.tolist()), int(p)))
        object.__setattr__(self, "profile", tuple(terms))
        W = np.array([t[1] for t in terms])
        object.__setattr__(self, "_W", W)
        object.__setattr__(self, "_WW", np.einsum("ki,kj->kij", W, W).reshape(len(W), -1))
        object.__setattr__(self, "_c", np.array([t[0] for t in terms]))
        object.__setattr__(self, "_p", np.array([t[2] for t in terms], dtype=float))
        gamma = ellipticity_estimate(self, self.tol.ellipticity_samples)
        if gamma < self.tol.min_ellipticity:
            raise NotElliptic(f"sampled ellipticity {gamma:.3g} < {self.tol.min_ellipticity:g}")

    def _terms(self, u):
        u = np.asarray(u, dtype=float)
        r = _check_nonzero(u, self.tol.zero_vector)
        t = (u @ self._W.T) / r[..., None]  # (..., K), cosines to the profile directions
        return u, r, t

    def _powers(self, t):
        """t^(p-2), t^(p-1), t^p per profile term."""
        p = self._p
        if np.all(p == p[0]) and p[0] <= 16:
            lo = np.ones_like(t)
            for _ in range(int(p[0]) - 2):
                lo = lo * t
        else:
            lo = t ** (p - 2)
        mid = lo * t
        return lo, mid, mid * t

    def value(self, u):
        u, r, t = self._terms(u)
        _, _, tp = self._powers(t)
        return r * (1.0 + self.epsilon * (tp @ self._c))

    def gradient(self, u):
        u, r, t = self._terms(u)
        _, tp1, tp = self._powers(t)
        p, c = self._p, self._c
        a = (c * p) * tp1  # coefficient of w_k
        b = tp @ (c * (1 - p))  # coefficient of u / r
        return (u / r[..., None]) * (1.0 + self.epsilon * b[..., None]) + self.epsilon * (a @ self._W)

    def hessian(self, u):
        u, r, t = self._terms(u)
        tp2, tp1, tp = self._powers(t)
        p, c, W = self._p, self._c, self._W
        d = self.dim
        ri = 1.0 / r
        eye = np.eye(d)
        uu = u[..., :, None] * u[..., None, :]
        H = (eye - uu * (ri * ri)[..., None, None]) * ri[..., None, None]
        # d/du of  c p t^{p-1} w + c (1-p) t^p u / r
        k1 = (tp2 * (c * p * (p - 1))) * ri[..., None]
        k2 = (tp1 * (c * p * (1 - p))) * (ri * ri)[..., None]
        k3 = (tp @ (c * (1 - p))) * ri
        k4 = (tp @ (c * (1 - p) * (-1 - p))) * ri**3
        ww = (k1 @ self._WW).reshape(k1.shape[:-1] + (d, d))
        wu = k2 @ W
        cross = wu[..., :, None] * u[..., None, :] + u[..., :, None] * wu[..., None, :]
        iso = k3[..., None, None] * eye + k4[..., None, None] * uu
        return H + self.epsilon * (ww + cross + iso)

    # dual -----------------------------------------------------------------
    def _dual_solve(self, x):
        """Maximise v.x over phi(v) = 1 by Newton iteration on the KKT system.

        Returns (phi*(x), maximiser v) for a stack of points.  Starts from the
        Euclidean maximiser x/|x| and retracts onto {phi = 1} after each step.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x).reshape(-1, self.dim)
        xn = _check_nonzero(X, self.tol.zero_vector)
        d = self.dim
        v = X / xn[:, None]
        v = v / self.value(v)[:, None]
        mu = np.einsum("ij,ij->i", v, X)
        done = np.zeros(len(X), dtype=bool)
        for _ in range(self.tol.dual_max_iter):
            g = self.gradient(v)
            res = X - mu[:, None] * g
            rn = np.linalg.norm(res, axis=1)
            done = rn <= self.tol.dual_kkt * xn
            if done.all():
                break
            idx = np.flatnonzero(~done)
            H = self.hessian(v[idx])
            J = np.zeros((len(idx), d + 1, d + 1))
            J[:, :d, :d] = -mu[idx, None, None] * H
            J[:, :d, d] = -g[idx]
            J[:, d, :d] = g[idx]
            rhs = np.zeros((len(idx), d + 1))
            rhs[:, :d] = -res[idx]
            step = np.linalg.solve(J, rhs[..., None])[..., 0]
            t = np.ones(len(idx))
            best_v = v[idx].copy()
            best_mu = mu[idx].copy()
            best_r = rn[idx].copy()
            accepted = np.zeros(len(idx), dtype=bool)
            for _half in range(30):
                nv = best_v + t[:, None] * step[:, :d]
                # retraction: rescale onto phi = 1, keeping the ray
                bad = np.linalg.norm(nv, axis=1) <= 1e-300
                nv[bad] = best_v[bad]
                nv = nv / self.value(nv)[:, None]
                nmu = np.einsum("ij,ij->i", nv, X[idx])
                nr = np.linalg.norm(X[idx] - nmu[:, None] * self.gradient(nv), axis=1)
                ok = (nr < best_r) & ~accepted
                v[idx[ok]] = nv[ok]
                mu[idx[ok]] = nmu[ok]
                accepted |= ok
                if accepted.all():
                    break
                t = np.where(accepted, t, 0.5 * t)
            if not accepted.any():
                break
        g = self.gradient(v)
        rn = np.linalg.norm(X - mu[:, None] * g, axis=1)
        if np.any(rn > self.tol.dual_kkt * xn):
            raise NoConvergence(f"dual norm ascent stalled (KKT residual {rn.max():.3g})")
        if single:
            return mu[0], v[0]
        shape = x.shape[:-1]
        return mu.reshape(shape), v.reshape(shape + (d,))

    def dual_value(self, x):
        return self._dual_solve(x)[0]

    def dual_gradient(self, x):
        return self._dual_solve(x)[1]

    def dual_hessian(self, x):
        mu, v = self._dual_solve(x)
        return _dual_hessian_from_primal(self, mu, v)

    def to_json(self) -> dict:
        return {
            "variant": "perturbed",
            "dimension": self.dim,
            "epsilon": self.epsilon,
            "profile": [
                {"coeff": c, "direction": list(w), "power": p} for c, w, p in self.profile
            ],
        }

    def label(self) -> str:
        return f"perturbed(eps={self.epsilon:g})"


def _dual_hessian_from_primal(spec: NormSpec, dual_val, v):
    """Hessian of phi* from the maximiser v = grad phi*(x).

    Differentiating grad phi(grad phi*(x)) = x / phi*(x) gives
    Hphi(v) H* = (I - g v^T) / phi*, g = grad phi(v); adding g g^T to Hphi
    makes it invertible without changing the product because g^T H* = 0.
    """
    v = np.asarray(v, dtype=float)
    g = spec.gradient(v)
    H = spec.hessian(v)
    T = H + g[..., :, None] * g[..., None, :]
    eye = np.eye(v.shape[-1])
    R = (eye - g[..., :, None] * v[..., None, :]) / np.asarray(dual_val)[..., None, None]
    Hs = np.linalg.solve(T, R)
    return 0.5 * (Hs + np.swapaxes(Hs, -1, -2))


def norm_jet(spec: NormSpec, u) -> NormJet:
    u = np.asarray(u, dtype=float)
    return NormJet(float(spec.value(u)), spec.gradient(u), spec.hessian(u))


def dual_jet(spec: NormSpec, x) -> NormJet:
    x = np.asarray(x, dtype=float)
    return NormJet(float(spec.dual_value(x)), spec.dual_gradient(x), spec.dual_hessian(x))


def random_unit_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def ellipticity_estimate(spec: NormSpec, sample_count: int, seed: int = 0) -> float:
    """Sampled minimum of v^T D^2 phi(u) v over unit u and unit v orthogonal to u.

    Being a minimum over samples, this is an upper bound on the true
    ellipticity constant.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    rng = np.random.default_rng(seed)
    d = spec.dim
    u = random_unit_vectors(sample_count, d, rng)
    if d == 2:
        v = np.stack([-u[:, 1], u[:, 0]], axis=1)
    else:
        w = rng.standard_normal((sample_count, d))
        w -= np.einsum("ij,ij->i", w, u)[:, None] * u
        v = w / np.linalg.norm(w, axis=1, keepdims=True)
    H = spec.hessian(u)
    return float(np.einsum("ni,nij,nj->n", v, H, v).min())


def norm_from_json(obj) -> NormSpec:
    if isinstance(obj, str):
        obj = json.loads(obj)
    obj = dict(obj)
    variant = obj.pop("variant", None)
    if variant == "euclidean":
        allowed = {"dimension"}
    elif variant == "ellipsoidal":
        allowed = {"A", "dimension"}
    elif variant == "perturbed":
        allowed = {"dimension", "epsilon", "profile"}
    else:
        raise ValueError(f"unknown norm variant {variant!r}")
    extra = set(obj) - allowed
    if extra:
        raise ValueError(f"unknown keys for {variant} norm: {sorted(extra)}")
    if variant == "euclidean":
        return EuclideanNorm(int(obj.get("dimension", 3)))
    if variant == "ellipsoidal":
        spec = EllipsoidalNorm(np.asarray(obj["A"], dtype=float))
        if "dimension" in obj and obj["dimension"] != spec.dim:
            raise ValueError("dimension does not match A")
        return spec
    return PerturbedNorm(
        int(obj["dimension"]),
        float(obj.get("epsilon", 0.0)),
        tuple(obj.get("profile") or ()),
    )


def same_norm(a: NormSpec, b: NormSpec) -> bool:
    return a.to_json() == b.to_json()


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
