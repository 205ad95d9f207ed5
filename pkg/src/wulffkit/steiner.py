"""Monte Carlo tube volumes and Steiner-polynomial fits.

The tube ``{x : 0 < delta(x) <= rho, foot(x) in B}`` has volume
``sum_m rho^(n+1-m) C_m(B)``.  Volumes are estimated by uniform sampling in
the exact bounding box of the full tube and the coefficients recovered by
weighted least squares in the basis ``rho^(n+1-m)``.

Sampling is split into fixed-size chunks, chunk ``j`` of stream ``k`` seeded
with ``SeedSequence([seed, k, j])``.  Only integer hit counts are merged, in
chunk order, so results do not depend on how many workers ran the chunks.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bodies import ConvexBody
from .errors import SingularDesign
from .norms import NormSpec
from .projection import project_batch
from .regions import WHOLE, Region
from .tolerances import DEFAULTS, Tolerances

CHUNK = 1 << 16
DEFAULT_GRID = (0.05, 0.1, 0.2, 0.4)


def _chunk_counts(body, spec, rho, regions, lo, hi, n, seed, stream, chunk, tol):
    rng = np.random.default_rng(np.random.SeedSequence([seed, stream, chunk]))
    X = lo + (hi - lo) * rng.random((n, len(lo)))
    X = X[~body.contains(X)]
    counts = np.zeros(len(regions), dtype=np.int64)
    if len(X) == 0:
        return counts
    bp = project_batch(body, spec, X, tol)
    hit = (bp.distance > 0) & (bp.distance <= rho)
    for k, reg in enumerate(regions):
        if reg.empty:
            continue
        m = reg.mask(bp.foot, bp.face) & hit
        counts[k] = int(m.sum())
    return counts


def tube_counts(body: ConvexBody, spec: NormSpec, rho: float, regions, samples: int, seed: int,
                stream: int = 0, workers: int = 1, tol: Tolerances = DEFAULTS):
    """Hit counts per region for one sampling stream; returns (counts, box volume, samples)."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    lo, hi = body.tube_box(spec, rho)
    sizes = [CHUNK] * (samples // CHUNK) + ([samples % CHUNK] if samples % CHUNK else [])
    args = [(body, spec, rho, regions, lo, hi, n, seed, stream, j, tol) for j, n in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda a: _chunk_counts(*a), args))
    else:
        parts = [_chunk_counts(*a) for a in args]
    counts = np.sum(parts, axis=0) if parts else np.zeros(len(regions), dtype=np.int64)
    return counts, float(np.prod(hi - lo)), int(samples)


def _volume_from_count(k, box, n):
    p = k / n
    # a zero count still carries the resolution of the sampler
    var = max(p * (1 - p), 1.0 / n) / n
    return box * p, box * np.sqrt(var)


def tube_volume_mc(body: ConvexBody, spec: NormSpec, rho: float, region: Region = WHOLE, samples: int = 10**6,
                   seed: int = 0, workers: int = 1, stream: int = 0, tol: Tolerances = DEFAULTS):
    """(volume, stderr) of the part of the rho-tube whose feet lie in region."""
    counts, box, n = tube_counts(body, spec, rho, [region], samples, seed, stream, workers, tol)
    v, se = _volume_from_count(int(counts[0]), box, n)
    return (0.0, se) if region.empty else (v, se)


@dataclass(frozen=True)
class SteinerFit:
    coefficients: np.ndarray  # c_0..c_n, multiplying rho^(n+1-m)
    stderr: np.ndarray
    covariance: np.ndarray
    residual: float  # max relative fit residual over the grid
    rho_grid: tuple
    samples_per_rho: int
    seed: int
    region: Region = WHOLE
    volumes: np.ndarray = field(default=None)
    volume_stderr: np.ndarray = field(default=None)
    threshold: float = DEFAULTS.steiner_residual

    @property
    def failed(self) -> bool:
        return not self.residual <= self.threshold

    def to_json(self) -> dict:
        return {
            "coefficients": self.coefficients.tolist(),
            "stderr": self.stderr.tolist(),
            "residual": self.residual,
            "failed": self.failed,
            "rho_grid": list(self.rho_grid),
            "samples_per_rho": self.samples_per_rho,
            "seed": self.seed,
            "region": self.region.to_json(),
            "volumes": self.volumes.tolist(),
            "volume_stderr": self.volume_stderr.tolist(),
        }


def default_grid(body: ConvexBody) -> tuple:
    return tuple(f * body.inradius for f in DEFAULT_GRID)


def _design(rho, dim):
    n = dim - 1
    rho = np.asarray(rho, dtype=float)
    return np.stack([rho ** (n + 1 - m) for m in range(n + 1)], axis=1)


def fit_coefficients(rho, volumes, stderr, dim: int):
    """Weighted least squares in the Steiner basis; returns (coef, cov, max rel residual)."""
    rho = np.asarray(rho, dtype=float)
    distinct = np.unique(rho[rho > 0])
    if len(distinct) < dim:
        raise SingularDesign(f"need at least {dim} distinct positive radii, got {len(distinct)}")
    X = _design(rho, dim)
    w = 1.0 / np.asarray(stderr, dtype=float) ** 2
    colscale = np.abs(X).max(axis=0)
    Xs = X / colscale
    N = Xs.T @ (w[:, None] * Xs)
    if np.linalg.cond(N) > 1e12:
        raise SingularDesign("radius grid gives an ill-conditioned design")
    Ninv = np.linalg.inv(N)
    beta = Ninv @ (Xs.T @ (w * volumes)) / colscale
    cov = Ninv / np.outer(colscale, colscale)
    y = np.asarray(volumes, dtype=float)
    fitted = X @ beta
    scale = np.where(np.abs(y) > 0, np.abs(y), np.inf)
    res = np.max(np.abs(y - fitted) / scale) if np.isfinite(scale).any() else 0.0
    return beta, cov, float(res)


def steiner_fit_regions(body: ConvexBody, spec: NormSpec, regions, rho_grid=None, samples: int = 10**6,
                        seed: int = 0, workers: int = 1, tol: Tolerances = DEFAULTS) -> list[SteinerFit]:
    """One fit per region; regions share samples, radii use independent streams."""
    grid = tuple(float(r) for r in (rho_grid if rho_grid is not None else default_grid(body)))
    regions = list(regions)
    vols = np.zeros((len(regions), len(grid)))
    ses = np.zeros_like(vols)
    if len(np.unique([r for r in grid if r > 0])) < body.dim:
        raise SingularDesign(f"need at least {body.dim} distinct positive radii")
    for k, rho in enumerate(grid):
        counts, box, n = tube_counts(body, spec, rho, regions, samples, seed, k, workers, tol)
        for i, c in enumerate(counts):
            vols[i, k], ses[i, k] = _volume_from_count(int(c), box, n)
    out = []
    for i, reg in enumerate(regions):
        beta, cov, res = fit_coefficients(grid, vols[i], ses[i], body.dim)
        if reg.empty:
            beta, res = np.zeros_like(beta), 0.0
        out.append(SteinerFit(beta, np.sqrt(np.diag(cov)), cov, res, grid, samples, seed, reg,
                              vols[i], ses[i], tol.steiner_residual))
    return out


def steiner_fit(body: ConvexBody, spec: NormSpec, region: Region = WHOLE, rho_grid=None, samples: int = 10**6,
                seed: int = 0, workers: int = 1, tol: Tolerances = DEFAULTS) -> SteinerFit:
    return steiner_fit_regions(body, spec, [region], rho_grid, samples, seed, workers, tol)[0]
