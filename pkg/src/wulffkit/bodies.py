"""Convex bodies in R^2 / R^3 and their exact reference quantities."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .errors import EmptyInterior, Unbounded
from .norms import EllipsoidalNorm, NormSpec, norm_from_json, unit_ball_volume
from .wulff import flat_element_areas, lump, sphere_mesh, tangent_hessian, wulff_volume

DEFAULT_RESOLUTION = {2: 512, 3: 64}


@dataclass(frozen=True)
class BoundaryMesh:
    points: np.ndarray  # (N, d) boundary nodes
    normals: np.ndarray  # (N, d) exterior unit normals
    elements: np.ndarray  # (E, d) node indices
    element_weights: np.ndarray  # flat H^n measure per element
    weights: np.ndarray  # (N,) node quadrature weights
    labels: np.ndarray | None = None  # polytope facet index per node

    @property
    def total_weight(self) -> float:
        return float(self.element_weights.sum())


class ConvexBody:
    dim: int
    variant: str = ""

    def contains(self, x) -> np.ndarray | bool:  # pragma: no cover - abstract
        raise NotImplementedError

    def support_point(self, eta) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def support_value(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        return np.einsum("...i,...i->...", self.support_point(eta), eta)

    def extents(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate bounding box (lo, hi) of the body."""
        eye = np.eye(self.dim)
        hi = np.array([self.support_value(e) for e in eye])
        lo = -np.array([self.support_value(-e) for e in eye])
        return lo, hi

    def tube_box(self, spec: NormSpec, rho: float) -> tuple[np.ndarray, np.ndarray]:
        """Exact bounding box of {x : delta^phi(x) <= rho}."""
        lo, hi = self.extents()
        eye = np.eye(self.dim)
        return lo - rho * spec.value(-eye), hi + rho * spec.value(eye)

    def label(self) -> str:
        return self.variant

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


@dataclass(frozen=True)
class Face:
    dim: int
    constraints: tuple  # indices of the defining active constraints
    vertices: tuple  # indices into HPolytope.vertices


@dataclass(frozen=True, eq=False)
class HPolytope(ConvexBody):
    """{x : A x <= b}; rows are normalised to unit length on construction."""

    A: np.ndarray
    b: np.ndarray
    variant: str = field(default="hpolytope", init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] not in (2, 3) or A.shape[0] != b.shape[0]:
            raise ValueError("A must be m x d (d = 2, 3) and b an m-vector")
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise ValueError("zero row in A")
        # leave unit rows untouched so JSON round trips are exact
        nrm = np.where(np.abs(nrm - 1.0) <= 4e-16, 1.0, nrm)
        A, b = A / nrm[:, None], b / nrm
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "dim", A.shape[1])
        d = self.dim
        for i in range(d):
            for sgn in (1.0, -1.0):
                c = np.zeros(d)
                c[i] = -sgn
                res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
                if res.status == 3:
                    raise Unbounded("polytope is unbounded")
                if res.status == 2:
                    raise EmptyInterior("polytope is empty")
        if self.chebyshev[1] <= 1e-12:
            raise EmptyInterior("polytope has empty interior")
        _ = self.vertices, self.faces

    @classmethod
    def box(cls, lo, hi) -> "HPolytope":
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        d = len(lo)
        A = np.vstack([np.eye(d), -np.eye(d)])
        return cls(A, np.concatenate([hi, -lo]))

    @cached_property
    def chebyshev(self) -> tuple[np.ndarray, float]:
        d = self.dim
        c = np.zeros(d + 1)
        c[-1] = -1.0
        Aub = np.hstack([self.A, np.ones((len(self.b), 1))])
        res = linprog(c, A_ub=Aub, b_ub=self.b, bounds=[(None, None)] * d + [(0, None)], method="highs")
        return res.x[:d], float(res.x[-1])

    @cached_property
    def vertices(self) -> np.ndarray:
        d = self.dim
        pts = []
        scale = max(1.0, np.abs(self.b).max())
        for idx in itertools.combinations(range(len(self.b)), d):
            M = self.A[list(idx)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, self.b[list(idx)])
            if np.all(self.A @ v <= self.b + 1e-9 * scale):
                pts.append(v)
        pts = np.array(pts)
        key = np.round(pts / scale, 9)
        _, first = np.unique(key, axis=0, return_index=True)
        V = pts[np.sort(first)]
        if d == 2:
            c = V.mean(axis=0)
            V = V[np.argsort(np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0]))]
        V.setflags(write=False)
        return V

    def active(self, x, tol: float = 1e-9) -> np.ndarray:
        scale = max(1.0, np.abs(self.b).max())
        return np.flatnonzero(np.abs(self.A @ np.asarray(x, float) - self.b) <= tol * scale)

    @cached_property
    def faces(self) -> tuple:
        """All proper faces, lowest dimension first (vertices, edges[, facets])."""
        V = self.vertices
        act = [frozenset(self.active(v).tolist()) for v in V]
        faces = [Face(0, tuple(sorted(a)), (k,)) for k, a in enumerate(act)]
        d = self.dim
        facets = []
        for i in range(len(self.b)):
            vs = tuple(k for k, a in enumerate(act) if i in a)
            if len(vs) >= d:
                facets.append(Face(d - 1, (i,), vs))
        if d == 3:
            seen = set()
            for f, g in itertools.combinations(facets, 2):
                shared = tuple(sorted(set(f.vertices) & set(g.vertices)))
                if len(shared) < 2:
                    continue
                if len(shared) > 2:
                    P = V[list(shared)]
                    direc = P[-1] - P[0]
                    t = P @ direc
                    shared = (shared[int(np.argmin(t))], shared[int(np.argmax(t))])
                key = tuple(sorted(shared))
                if key in seen:
                    continue
                seen.add(key)
                faces.append(Face(1, tuple(sorted(f.constraints + g.constraints)), key))
        faces.extend(facets)
        return tuple(faces)

    def facet_polygon(self, face: Face) -> np.ndarray:
        """Ordered vertex indices around a 3D facet."""
        P = self.vertices[list(face.vertices)]
        n = self.A[face.constraints[0]]
        c = P.mean(axis=0)
        t1 = P[0] - c
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        ang = np.arctan2((P - c) @ t2, (P - c) @ t1)
        return np.array(face.vertices)[np.argsort(ang)]

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.A.T <= self.b, axis=-1)

    def support_point(self, eta):
        eta = np.asarray(eta, dtype=float)
        k = np.argmax(eta @ self.vertices.T, axis=-1)
        return self.vertices[k]

    @cached_property
    def diameter(self) -> float:
        V = self.vertices
        return float(np.max(np.linalg.norm(V[:, None] - V[None], axis=-1)))

    @property
    def inradius(self) -> float:
        return self.chebyshev[1]

    def reference_volume(self, resolution: int | None = None) -> float:
        V = self.vertices
        if self.dim == 2:
            x, y = V[:, 0], V[:, 1]
            return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
        p = self.chebyshev[0]
        vol = 0.0
        for f in self.faces:
            if f.dim != 2:
                continue
            ring = V[self.facet_polygon(f)]
            for k in range(1, len(ring) - 1):
                vol += abs(np.linalg.det(np.stack([ring[0] - p, ring[k] - p, ring[k + 1] - p]))) / 6.0
        return float(vol)

    def facet_measures(self) -> list[tuple[int, float]]:
        """(constraint index, H^n measure) for each facet."""
        out = []
        V = self.vertices
        for f in self.faces:
            if f.dim != self.dim - 1:
                continue
            if self.dim == 2:
                a, b = V[list(f.vertices)]
                out.append((f.constraints[0], float(np.linalg.norm(b - a))))
            else:
                ring = V[self.facet_polygon(f)]
                area = 0.0
                for k in range(1, len(ring) - 1):
                    area += 0.5 * np.linalg.norm(np.cross(ring[k] - ring[0], ring[k + 1] - ring[0]))
                out.append((f.constraints[0], float(area)))
        return out

    def boundary_mesh(self, resolution: int) -> BoundaryMesh:
        if resolution < 8:
            raise ValueError("resolution must be >= 8")
        V = self.vertices
        pts, nrm, elems, labels = [], [], [], []
        offset = 0
        for f in self.faces:
            if f.dim != self.dim - 1:
                continue
            n = self.A[f.constraints[0]]
            if self.dim == 2:
                a, b = V[list(f.vertices)]
                t = np.linspace(0.0, 1.0, resolution + 1)
                P = a + t[:, None] * (b - a)
                E = np.stack([np.arange(resolution), np.arange(1, resolution + 1)], axis=1)
            else:
                ring = V[self.facet_polygon(f)]
                c = ring.mean(axis=0)
                k = max(1, resolution // 8)
                P, E = [], []
                for j in range(len(ring)):
                    A0, B0 = ring[j], ring[(j + 1) % len(ring)]
                    base = sum(len(p) for p in P)
                    ij = [(i, l) for i in range(k + 1) for l in range(k + 1 - i)]
                    loc = {q: m for m, q in enumerate(ij)}
                    P.append(np.array([c + (i * (A0 - c) + l * (B0 - c)) / k for i, l in ij]))
                    for i in range(k):
                        for l in range(k - i):
                            E.append((base + loc[(i, l)], base + loc[(i + 1, l)], base + loc[(i, l + 1)]))
                            if i + l <= k - 2:
                                E.append((base + loc[(i + 1, l)], base + loc[(i + 1, l + 1)], base + loc[(i, l + 1)]))
                P = np.concatenate(P)
                E = np.array(E)
            pts.append(P)
            nrm.append(np.broadcast_to(n, P.shape))
            elems.append(E + offset)
            labels.append(np.full(len(P), f.constraints[0]))
            offset += len(P)
        P = np.concatenate(pts)
        E = np.concatenate(elems)
        ew = flat_element_areas(P, E)
        return BoundaryMesh(P, np.concatenate(nrm), E, ew, lump(E, ew, len(P)), np.concatenate(labels))

    def to_json(self) -> dict:
        return {"variant": "hpolytope", "A": self.A.tolist(), "b": self.b.tolist()}

    def label(self) -> str:
        return f"hpolytope[{len(self.b)}]"


class SmoothBody(ConvexBody):
    """Strictly convex body with support function h(eta) = c . eta + s psi(eta).

    The boundary is parametrised by its outer unit normal,
    x(eta) = c + s grad psi(eta).
    """

    center: np.ndarray
    scale: float
    psi: NormSpec

    def boundary_point(self, eta):
        return self.center + self.scale * self.psi.gradient(eta)

    def support_point(self, eta):
        eta = np.asarray(eta, dtype=float)
        eta = eta / np.linalg.norm(eta, axis=-1, keepdims=True)
        return self.boundary_point(eta)

    def support_value(self, eta):
        eta = np.asarray(eta, dtype=float)
        return eta @ self.center + self.scale * self.psi.value(eta)

    def gauge(self, x):
        """phi-like gauge g with body = {g <= 1}."""
        raise NotImplementedError  # pragma: no cover

    def outer_normal(self, x) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def weingarten_inverse(self, eta):
        """Tangent basis Q and s * Q^T D^2 psi Q (inverse Euclidean Weingarten map)."""
        Q, Ht = tangent_hessian(self.psi, eta)
        return Q, self.scale * Ht

    def boundary_mesh(self, resolution: int) -> BoundaryMesh:
        sm = sphere_mesh(self.dim, resolution)
        eta = sm.nodes
        P = self.boundary_point(eta)
        _, R = self.weingarten_inverse(eta)
        jac = np.linalg.det(R)
        ew = flat_element_areas(P, sm.elements)
        return BoundaryMesh(P, eta.copy(), sm.elements, ew, sm.weights * jac)

    def contains(self, x):
        return self.gauge(x) <= 1.0

    @cached_property
    def _radii(self) -> np.ndarray:
        sm = sphere_mesh(self.dim, 128)
        return self.scale * np.linalg.norm(self.psi.gradient(sm.nodes), axis=1), self.scale * self.psi.value(sm.nodes)

    @property
    def diameter(self) -> float:
        return float(2.0 * self._radii[0].max())

    @property
    def inradius(self) -> float:
        return float(self._radii[1].min())


@dataclass(frozen=True, eq=False)
class Ellipsoid(SmoothBody):
    """{x : (x - c)^T M (x - c) <= 1}."""

    center: np.ndarray
    M: np.ndarray
    variant: str = field(default="ellipsoid", init=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        M = np.array(self.M, dtype=float)
        if M.shape != (len(c), len(c)) or len(c) not in (2, 3):
            raise ValueError("center must be a d-vector and M a d x d matrix, d = 2, 3")
        if not np.allclose(M, M.T) or np.linalg.eigvalsh(M)[0] <= 0:
            raise ValueError("M must be symmetric positive definite")
        M = 0.5 * (M + M.T)
        c.setflags(write=False)
        M.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "dim", len(c))
        object.__setattr__(self, "scale", 1.0)
        object.__setattr__(self, "psi", EllipsoidalNorm(np.linalg.inv(M)))

    @classmethod
    def from_axes(cls, semi_axes, center=None) -> "Ellipsoid":
        a = np.asarray(semi_axes, dtype=float)
        c = np.zeros(len(a)) if center is None else center
        return cls(c, np.diag(1.0 / a**2))

    def gauge(self, x):
        y = np.asarray(x, dtype=float) - self.center
        return np.einsum("...i,ij,...j->...", y, self.M, y)

    def outer_normal(self, x):
        g = (np.asarray(x, dtype=float) - self.center) @ self.M
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def reference_volume(self, resolution: int | None = None) -> float:
        return unit_ball_volume(self.dim) / float(np.sqrt(np.linalg.det(self.M)))

    def to_json(self) -> dict:
        return {"variant": "ellipsoid", "center": self.center.tolist(), "M": self.M.tolist()}

    def label(self) -> str:
        ax = 1.0 / np.sqrt(np.linalg.eigvalsh(self.M))[::-1]
        return "ellipsoid" + str(np.round(np.sort(ax), 6).tolist())


@dataclass(frozen=True, eq=False)
class WulffBody(SmoothBody):
    """{x : phi*(x - a) <= s}, a rescaled and translated Wulff shape."""

    center: np.ndarray
    scale: float
    norm: NormSpec
    variant: str = field(default="wulff", init=False)

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        if len(c) != self.norm.dim:
            raise ValueError("center dimension does not match the norm")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "scale", float(self.scale))
        object.__setattr__(self, "dim", len(c))
        object.__setattr__(self, "psi", self.norm)

    def gauge(self, x):
        return self.norm.dual_value(np.asarray(x, dtype=float) - self.center) / self.scale

    def outer_normal(self, x):
        g = self.norm.dual_gradient(np.asarray(x, dtype=float) - self.center)
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def reference_volume(self, resolution: int | None = None) -> float:
        res = resolution or 2 * DEFAULT_RESOLUTION[self.dim]
        return self.scale**self.dim * wulff_volume(self.norm, res)

    def to_json(self) -> dict:
        return {
            "variant": "wulff",
            "center": self.center.tolist(),
            "scale": self.scale,
            "norm": self.norm.to_json(),
        }

    def label(self) -> str:
        return f"wulff(s={self.scale:g})"


# spec-named operations ------------------------------------------------------

def contains(body: ConvexBody, x):
    return body.contains(x)


def support_point(body: ConvexBody, eta):
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(np.linalg.norm(eta, axis=-1) - 1.0) > 1e-9):
        raise ValueError("eta must be a unit vector")
    return body.support_point(eta)


def boundary_mesh(body: ConvexBody, resolution: int) -> BoundaryMesh:
    return body.boundary_mesh(resolution)


def reference_volume(body: ConvexBody) -> float:
    return body.reference_volume()


def body_from_json(obj, norm: NormSpec | None = None) -> ConvexBody:
    if isinstance(obj, str):
        obj = json.loads(obj)
    obj = dict(obj)
    variant = obj.pop("variant", None)
    allowed = {
        "hpolytope": {"A", "b"},
        "ellipsoid": {"center", "M"},
        "wulff": {"center", "scale", "norm"},
    }
    if variant not in allowed:
        raise ValueError(f"unknown body variant {variant!r}")
    extra = set(obj) - allowed[variant]
    if extra:
        raise ValueError(f"unknown keys for {variant} body: {sorted(extra)}")
    if variant == "hpolytope":
        return HPolytope(np.asarray(obj["A"], float), np.asarray(obj["b"], float))
    if variant == "ellipsoid":
        return Ellipsoid(np.asarray(obj["center"], float), np.asarray(obj["M"], float))
    spec = norm_from_json(obj["norm"]) if "norm" in obj else norm
    if spec is None:
        raise ValueError("wulff body needs a norm")
    return WulffBody(np.asarray(obj["center"], float), float(obj.get("scale", 1.0)), spec)
