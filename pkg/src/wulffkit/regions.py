"""Position-side region selectors B for curvature measures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Cut:
    """Half-space {x : (x - center) . direction >= offset} (``>`` if strict)."""

    center: tuple
    direction: tuple
    offset: float = 0.0
    strict: bool = False

    def test(self, x: np.ndarray) -> np.ndarray:
        s = (np.asarray(x) - np.asarray(self.center)) @ np.asarray(self.direction)
        return s > self.offset if self.strict else s >= self.offset

    def complement(self) -> "Cut":
        return Cut(self.center, tuple(-v for v in self.direction), -self.offset, not self.strict)


@dataclass(frozen=True)
class Region:
    """Intersection of half-space cuts, optionally restricted to one polytope face.

    ``Region()`` is the whole boundary; ``Region(empty=True)`` selects nothing.
    ``face`` is an index into ``HPolytope.faces`` and can only be evaluated on
    projection results that carry face labels.
    """

    cuts: tuple = ()
    face: int | None = None
    empty: bool = False
    name: str = "all"

    def mask(self, feet: np.ndarray, face_ids: np.ndarray | None = None) -> np.ndarray:
        feet = np.atleast_2d(feet)
        m = np.full(len(feet), not self.empty)
        for c in self.cuts:
            m &= c.test(feet)
        if self.face is not None:
            if face_ids is None:
                raise ValueError("face selector needs face labels")
            m &= np.asarray(face_ids) == self.face
        return m

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "empty": self.empty,
            "face": self.face,
            "cuts": [
                {"center": list(c.center), "direction": list(c.direction), "offset": c.offset, "strict": c.strict}
                for c in self.cuts
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Region":
        extra = set(obj) - {"name", "empty", "face", "cuts"}
        if extra:
            raise ValueError(f"unknown region keys {sorted(extra)}")
        cuts = tuple(
            Cut(tuple(c["center"]), tuple(c["direction"]), float(c.get("offset", 0.0)), bool(c.get("strict", False)))
            for c in obj.get("cuts", ())
        )
        return cls(cuts, obj.get("face"), bool(obj.get("empty", False)), obj.get("name", "region"))


WHOLE = Region()
EMPTY = Region(empty=True, name="empty")


def quadrant_partition(center, axes=(0, 1)) -> list[Region]:
    """Disjoint partition of the boundary into 4 pieces by the signs of two coordinates."""
    d = len(center)
    out = []
    for sx in (1, -1):
        for sy in (1, -1):
            cuts = []
            for ax, sgn in zip(axes, (sx, sy)):
                e = np.zeros(d)
                e[ax] = 1.0
                c = Cut(tuple(map(float, center)), tuple(e.tolist()), 0.0, False)
                cuts.append(c if sgn > 0 else c.complement())
            out.append(Region(tuple(cuts), name=f"q{'+' if sx > 0 else '-'}{'+' if sy > 0 else '-'}"))
    return out


def coordinate_caps(center, extents_pos, extents_neg, fraction: float = 0.5) -> list[Region]:
    """2d caps {(x - center) . (+/-e_i) >= fraction * extent}.

    Extents are the support distances from ``center`` along +e_i and -e_i.
    The caps isolate the tips of the body along each axis, so bodies whose
    curvature density is not constant yield different measure ratios per cap.
    """
    d = len(center)
    out = []
    for i in range(d):
        for sgn, ext in ((1.0, extents_pos[i]), (-1.0, extents_neg[i])):
            e = np.zeros(d)
            e[i] = sgn
            cut = Cut(tuple(map(float, center)), tuple(e.tolist()), float(fraction * ext), False)
            out.append(Region((cut,), name=f"cap{'+' if sgn > 0 else '-'}{'xyz'[i]}"))
    return out
