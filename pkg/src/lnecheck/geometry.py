"""Ambient metrics and the explicit transforms between R^q, S^q and RP^2.

All functions accept either a single point of shape ``(q,)`` or a batch of
shape ``(n, q)`` and return arrays of the matching shape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError

ETA_SINGULAR = 1e-9
ETA_POLE = 1e-9

EUCLIDEAN = "euclidean"
SPHERE = "sphere"
PROJECTIVE = "projective"
METRIC_KINDS = (EUCLIDEAN, SPHERE, PROJECTIVE)


@dataclass(frozen=True)
class AmbientMetric:
    """Metric of the ambient space a sample lives in.

    ``dim`` is the intrinsic dimension q: points of ``EUCLIDEAN(q)`` have q
    coordinates, points of ``SPHERE(q)`` and ``PROJECTIVE(2)`` are unit
    vectors with q + 1 coordinates.
    """

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        if self.kind == PROJECTIVE and self.dim != 2:
            raise ValueError("only the projective plane is supported")

    @property
    def coord_dim(self) -> int:
        return self.dim if self.kind == EUCLIDEAN else self.dim + 1

    def __str__(self) -> str:
        return f"{self.kind.upper()}({self.dim})"

    @classmethod
    def euclidean(cls, q: int) -> "AmbientMetric":
        return cls(EUCLIDEAN, q)

    @classmethod
    def sphere(cls, q: int) -> "AmbientMetric":
        return cls(SPHERE, q)

    @classmethod
    def projective(cls) -> "AmbientMetric":
        return cls(PROJECTIVE, 2)


def as_point(coords) -> np.ndarray:
    p = np.asarray(coords, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise DimensionMismatch("a point needs at least one coordinate")
    if not np.all(np.isfinite(p)):
        raise DomainError("point coordinates must be finite")
    return p


def unit_direction(coords) -> np.ndarray:
    """Renormalize ``coords`` to a unit vector."""
    v = as_point(coords)
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("the zero vector has no direction")
    return v / n


def north_pole(q: int) -> np.ndarray:
    n = np.zeros(q + 1)
    n[-1] = 1.0
    return n


def south_pole(q: int) -> np.ndarray:
    s = np.zeros(q + 1)
    s[-1] = -1.0
    return s


def invert(x) -> np.ndarray:
    """Euclidean inversion ``x -> x / |x|^2``."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(r2 <= ETA_SINGULAR**2):
        raise DomainError("inversion is undefined at (or too near) the origin")
    return x / r2


def stereo_to_sphere(x) -> np.ndarray:
    """Inverse stereographic projection R^q -> S^q minus the north pole."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1, keepdims=True)
    head = 2.0 * x / (1.0 + r2)
    # (R^2 - 1)/(R^2 + 1) written to stay accurate for huge R
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tail = np.where(r2 > 1.0, (1.0 - 1.0 / r2) / (1.0 + 1.0 / r2), (r2 - 1.0) / (r2 + 1.0))
    y = np.concatenate([head, tail], axis=-1)
    # a final renormalization keeps |y| = 1 to machine precision
    return y / np.linalg.norm(y, axis=-1, keepdims=True)


def stereo_from_sphere(y) -> np.ndarray:
    """Stereographic projection from the north pole, S^q minus N -> R^q."""
    y = np.asarray(y, dtype=float)
    last = y[..., -1:]
    if np.any(distance_to_pole(y) <= ETA_POLE):
        raise DomainError("stereographic projection is undefined at the north pole")
    head = y[..., :-1]
    # 1 - y_last loses precision near the pole; |y'|^2 = (1 - y)(1 + y) does not
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.sum(head * head, axis=-1, keepdims=True) / (1.0 + last)
    denom = np.where(last < 0.0, 1.0 - last, denom)
    return head / denom


def phi_chart(y, check: bool = True) -> np.ndarray:
    """Chart of S^q around the north pole, defined on the ball of radius 1/2.

    With ``check=False`` the formula is evaluated anywhere; it then agrees
    with the inverse stereographic projection of the inverted point.
    """
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1, keepdims=True)
    if check and np.any(r2 > 0.25 * (1 + 1e-12)):
        raise DomainError("phi chart is only defined for |y| <= 1/2")
    return np.concatenate([2.0 * y / (1.0 + r2), (1.0 - r2) / (1.0 + r2)], axis=-1)


def affine_to_projective(x) -> np.ndarray:
    """Unit representative of ``[x : y : 1]`` for points of the affine plane."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise DimensionMismatch("the projective plane compactifies R^2 only")
    ones = np.ones(x.shape[:-1] + (1,))
    v = np.concatenate([x, ones], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def direction_to_projective(u) -> np.ndarray:
    """Point ``[u : 0]`` of the line at infinity."""
    u = np.asarray(u, dtype=float)
    v = np.concatenate([u, np.zeros(u.shape[:-1] + (1,))], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def projective_distance(a, b) -> np.ndarray:
    """``arccos |<a, b>|`` for unit representatives, computed stably.

    The chord form ``2 asin(min(|a - b|, |a + b|) / 2)`` is used because
    ``arccos`` loses half the digits for nearby points.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dm = np.linalg.norm(a - b, axis=-1)
    dp = np.linalg.norm(a + b, axis=-1)
    return 2.0 * np.arcsin(np.clip(np.minimum(dm, dp) / 2.0, 0.0, 1.0))


def ambient_distance(m: AmbientMetric, a, b) -> np.ndarray | float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1] or a.shape[-1] != m.coord_dim:
        raise DimensionMismatch(
            f"{m} expects {m.coord_dim} coordinates, got {a.shape[-1]} and {b.shape[-1]}"
        )
    if m.kind == PROJECTIVE:
        d = projective_distance(a, b)
    else:
        d = np.linalg.norm(a - b, axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def great_circle_distance(a, b) -> np.ndarray | float:
    """Intrinsic distance on the unit sphere; at most pi/2 times the chord."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    chord = np.linalg.norm(a - b, axis=-1)
    d = 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))
    return float(d) if np.ndim(d) == 0 else d


def cosine_gap(y: float, t: float, theta: float) -> float:
    """Distance between points at radii ``y`` and ``t`` whose directions make
    the angle ``2 * theta`` (law of cosines in half-angle form)."""
    if y < 0 or t < 0:
        raise ValueError("radii must be nonnegative")
    return math.sqrt((y + t) ** 2 * math.sin(theta) ** 2 + (y - t) ** 2 * math.cos(theta) ** 2)


def conformal_factor_stereo(x) -> np.ndarray:
    """Local scale factor ``2 / (1 + |x|^2)`` of the inverse stereographic map."""
    x = np.asarray(x, dtype=float)
    return 2.0 / (1.0 + np.sum(x * x, axis=-1))


def distance_to_pole(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    q = y.shape[-1] - 1
    return np.linalg.norm(y - north_pole(q), axis=-1)


def pole_distance_at_radius(R) -> np.ndarray | float:
    """Chordal distance from ``sigma(x)`` to the north pole when ``|x| = R``."""
    R = np.asarray(R, dtype=float)
    d = 2.0 / np.sqrt(1.0 + R * R)
    return float(d) if np.ndim(d) == 0 else d


def distance_to_line_at_infinity(v) -> np.ndarray:
    """Projective distance from ``[v]`` to the line ``w = 0``."""
    v = np.asarray(v, dtype=float)
    return np.arcsin(np.clip(np.abs(v[..., -1]), 0.0, 1.0))
