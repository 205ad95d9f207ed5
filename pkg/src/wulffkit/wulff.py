"""Wulff shapes: Gauss-map parametrisation, meshes, quadrature and volume.

The unit sphere is meshed once per ``(dim, resolution)``: in 2D by
``resolution`` equally spaced angles, in 3D by a geodesic icosphere of
frequency ``resolution // 2`` (``10 f^2 + 2`` nodes).  Every smooth boundary
in the package is the image of this mesh under a Gauss-map inverse
``eta -> c + s grad(psi)(eta)``, so surface integrals become sphere integrals
weighted by ``det(s D^2 psi)`` on the tangent plane.
"""
from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass

import numpy as np

from .errors import NotOnWulff
from .norms import NormSpec, unit_tangent_basis
from .tolerances import DEFAULTS, Tolerances


@dataclass(frozen=True)
class SphereMesh:
    dim: int
    resolution: int
    nodes: np.ndarray  # (N, d) unit vectors
    elements: np.ndarray  # (E, d) node indices, outward oriented
    weights: np.ndarray  # (N,) lumped spherical areas, sum = |S^n|


def _icosahedron():
    t = (1.0 + 5**0.5) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _icosphere(freq: int):
    V, F = _icosahedron()
    ij = [(i, j) for i in range(freq + 1) for j in range(freq + 1 - i)]
    local = {p: k for k, p in enumerate(ij)}
    I = np.array([p[0] for p in ij], dtype=float)
    J = np.array([p[1] for p in ij], dtype=float)
    tris = []
    for i in range(freq):
        for j in range(freq - i):
            tris.append((local[(i, j)], local[(i + 1, j)], local[(i, j + 1)]))
            if i + j <= freq - 2:
                tris.append((local[(i + 1, j)], local[(i + 1, j + 1)], local[(i, j + 1)]))
    tris = np.array(tris)
    pts, elems = [], []
    for fi, (a, b, c) in enumerate(F):
        A, B, C = V[a], V[b], V[c]
        P = (I[:, None] * B + J[:, None] * C + (freq - I - J)[:, None] * A) / freq
        pts.append(P / np.linalg.norm(P, axis=1, keepdims=True))
        elems.append(tris + fi * len(ij))
    pts = np.concatenate(pts)
    elems = np.concatenate(elems)
    key = np.round(pts, 10)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    nodes = pts[first]
    elems = inverse.reshape(-1)[elems]
    a, b, c = nodes[elems[:, 0]], nodes[elems[:, 1]], nodes[elems[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0
    elems[flip] = elems[flip][:, [0, 2, 1]]
    return nodes, elems


def spherical_triangle_area(a, b, c):
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1.0 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def icosphere_frequency(resolution: int) -> int:
    return max(1, resolution // 2)


@functools.lru_cache(maxsize=32)
def sphere_mesh(dim: int, resolution: int) -> SphereMesh:
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    if dim == 2:
        th = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
        nodes = np.stack([np.cos(th), np.sin(th)], axis=1)
        elems = np.stack([np.arange(resolution), (np.arange(resolution) + 1) % resolution], axis=1)
        weights = np.full(resolution, 2.0 * np.pi / resolution)
    elif dim == 3:
        nodes, elems = _icosphere(icosphere_frequency(resolution))
        area = spherical_triangle_area(nodes[elems[:, 0]], nodes[elems[:, 1]], nodes[elems[:, 2]])
        weights = np.zeros(len(nodes))
        for k in range(3):
            np.add.at(weights, elems[:, k], area / 3.0)
    else:
        raise ValueError("dimension must be 2 or 3")
    for arr in (nodes, elems, weights):
        arr.setflags(write=False)
    return SphereMesh(dim, resolution, nodes, elems, weights)


def tangent_hessian(spec: NormSpec, eta: np.ndarray):
    """Return (Q, Q^T D^2 phi(eta) Q) with Q an orthonormal tangent basis at eta."""
    Q = unit_tangent_basis(eta)
    H = spec.hessian(eta)
    return Q, np.swapaxes(Q, -1, -2) @ H @ Q


def flat_element_areas(points: np.ndarray, elements: np.ndarray) -> np.ndarray:
    if points.shape[1] == 2:
        return np.linalg.norm(points[elements[:, 1]] - points[elements[:, 0]], axis=1)
    a, b, c = (points[elements[:, k]] for k in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def lump(elements: np.ndarray, element_weights: np.ndarray, n_nodes: int) -> np.ndarray:
    w = np.zeros(n_nodes)
    k = elements.shape[1]
    for j in range(k):
        np.add.at(w, elements[:, j], element_weights / k)
    return w


@dataclass(frozen=True)
class WulffMesh:
    vertices: np.ndarray  # points u with phi*(u) = 1
    normals: np.ndarray  # n^phi(u), unit
    elements: np.ndarray
    element_weights: np.ndarray  # flat H^n measure of each mapped element
    vertex_weights: np.ndarray
    resolution: int

    @property
    def total_weight(self) -> float:
        return float(self.element_weights.sum())

    def to_csv(self) -> str:
        d = self.vertices.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        axes = "xyz"[:d]
        w.writerow([*axes, *("n" + a for a in axes), "weight"])
        for x, n, wt in zip(self.vertices, self.normals, self.vertex_weights):
            w.writerow([f"{v:.9g}" for v in (*x, *n, wt)])
        return buf.getvalue()


def wulff_point(spec: NormSpec, eta) -> np.ndarray:
    """Point of the Wulff shape whose outer unit normal is eta."""
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(np.linalg.norm(eta, axis=-1) - 1.0) > 1e-9):
        raise ValueError("eta must be a unit vector")
    return spec.gradient(eta)


def wulff_normal(spec: NormSpec, u, tol: Tolerances = DEFAULTS) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    g = spec.dual_gradient(u)
    if np.any(np.abs(spec.dual_value(u) - 1.0) > tol.on_wulff):
        raise NotOnWulff("point is not on the Wulff shape")
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def wulff_mesh(spec: NormSpec, resolution: int) -> WulffMesh:
    sm = sphere_mesh(spec.dim, resolution)
    verts = spec.gradient(sm.nodes)
    ew = flat_element_areas(verts, sm.elements)
    return WulffMesh(verts, sm.nodes.copy(), sm.elements, ew, lump(sm.elements, ew, len(verts)), resolution)


def gauss_area_element(spec: NormSpec, eta: np.ndarray) -> np.ndarray:
    """det of D^2 phi on the tangent plane: H^n density of W^phi per unit sphere area."""
    _, Ht = tangent_hessian(spec, eta)
    return np.linalg.det(Ht)


def wulff_volume(spec: NormSpec, resolution: int = 128) -> float:
    """Volume of {phi* <= 1} from (1/d) * integral of x . eta over the boundary.

    On the Wulff shape x . eta = phi(eta), and the surface element is the
    Gauss-map Jacobian times the sphere weight.
    """
    sm = sphere_mesh(spec.dim, resolution)
    f = spec.value(sm.nodes) * gauss_area_element(spec, sm.nodes)
    return float(f @ sm.weights) / spec.dim
