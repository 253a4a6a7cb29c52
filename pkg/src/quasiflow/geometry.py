"""Closed reference curves inside a disk container.

Curves are stored by their values at N equispaced parameter nodes
theta_j = 2*pi*j/N; the trigonometric interpolant of those nodes is the
curve.  Everything else (normals, curvature, arclength, evaluation between
nodes) is derived spectrally from it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import _fourier as fr
from .errors import (
    DegenerateCurve,
    NotConverged,
    OutsideContainer,
    SelfIntersection,
)

TUBE_SAFETY = 0.9


@dataclass(frozen=True)
class Container:
    """Disk-shaped outer domain."""

    radius: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"container radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def clearance(self, points):
        """Distance from points to the wall (negative outside)."""
        points = np.asarray(points, dtype=float)
        return self.radius - np.hypot(points[..., 0] - self.center[0], points[..., 1] - self.center[1])


# --------------------------------------------------------------------------- specs

@dataclass(frozen=True)
class CircleSpec:
    radius: float
    center: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class EllipseSpec:
    a: float
    b: float
    center: tuple = (0.0, 0.0)
    angle: float = 0.0


@dataclass(frozen=True)
class FourierSpec:
    """Star-shaped curve r(theta) = sum_k cos_k cos(k theta) + sin_k sin(k theta).

    ``cos[0]`` is the mean radius; ``sin[0]`` is ignored.
    """

    cos: Sequence[float]
    sin: Sequence[float] = ()
    center: tuple = (0.0, 0.0)


# --------------------------------------------------------------------------- curve

@dataclass(frozen=True, eq=False)
class ReferenceCurve:
    xy: np.ndarray
    container: Container = field(default_factory=Container)
    circle: Optional[tuple] = None  # (cx, cy, R) when the curve is known to be a circle

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2 or xy.shape[0] < 8:
            raise ValueError("xy must have shape (N, 2) with N >= 8")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    @property
    def n(self):
        return self.xy.shape[0]

    @cached_property
    def theta(self):
        return fr.nodes(self.n)

    @cached_property
    def coef(self):
        return fr.coefficients(self.xy)

    @property
    def fourier_x(self):
        return self.coef[:, 0]

    @property
    def fourier_y(self):
        return self.coef[:, 1]

    @cached_property
    def d1(self):
        return fr.derivative(self.xy, 1)

    @cached_property
    def d2(self):
        return fr.derivative(self.xy, 2)

    @cached_property
    def speed(self):
        return np.hypot(self.d1[:, 0], self.d1[:, 1])

    @cached_property
    def tangent(self):
        return self.d1 / self.speed[:, None]

    @cached_property
    def normal(self):
        """Outer unit normal (the curve is counterclockwise)."""
        t = self.tangent
        return np.column_stack([t[:, 1], -t[:, 0]])

    @cached_property
    def curvature(self):
        d1, d2 = self.d1, self.d2
        return (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / self.speed**3

    @cached_property
    def weights(self):
        """Arclength quadrature weights ds_j."""
        return self.speed * (2.0 * np.pi / self.n)

    @cached_property
    def length(self):
        return float(self.weights.sum())

    @cached_property
    def area(self):
        x, y = self.xy[:, 0], self.xy[:, 1]
        return float(0.5 * np.sum(x * self.d1[:, 1] - y * self.d1[:, 0]) * 2.0 * np.pi / self.n)

    @cached_property
    def tube(self) -> "TubeData":
        return tube_and_ball(self, self.container)

    def point(self, theta, order=0):
        """Curve (or its theta-derivative) evaluated at arbitrary parameters."""
        return fr.evaluate(self.coef, theta, self.n, order)

    def normal_at(self, theta):
        d = self.point(theta, 1)
        s = np.hypot(d[..., 0], d[..., 1])
        return np.stack([d[..., 1] / s, -d[..., 0] / s], axis=-1)

    def curvature_at(self, theta):
        d1 = self.point(theta, 1)
        d2 = self.point(theta, 2)
        s = np.hypot(d1[..., 0], d1[..., 1])
        return (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / s**3

    def resampled(self, m):
        if m == self.n:
            return self
        return ReferenceCurve(fr.resample(self.xy, m), self.container, self.circle)

    def with_container(self, container):
        return ReferenceCurve(self.xy, container, self.circle)


def _orient_ccw(xy):
    d1 = fr.derivative(xy, 1)
    area2 = np.sum(xy[:, 0] * d1[:, 1] - xy[:, 1] * d1[:, 0])
    if area2 < 0:
        xy = np.roll(xy[::-1], 1, axis=0)
    return xy


def curve_from_nodes(xy, container=None, circle=None, check=True) -> ReferenceCurve:
    container = container or Container()
    curve = ReferenceCurve(_orient_ccw(np.asarray(xy, dtype=float)), container, circle)
    if check:
        validate_curve(curve)
    return curve


def build_reference_curve(spec, container=None, n=128, check=True) -> ReferenceCurve:
    """Sample a circle, ellipse or star-shaped Fourier spec at ``n`` nodes."""
    container = container or Container()
    if n < 8 or n & (n - 1):
        raise ValueError(f"node count must be a power of two >= 8, got {n}")
    th = fr.nodes(n)
    circle = None
    if isinstance(spec, CircleSpec):
        cx, cy = spec.center
        xy = np.column_stack([cx + spec.radius * np.cos(th), cy + spec.radius * np.sin(th)])
        circle = (float(cx), float(cy), float(spec.radius))
    elif isinstance(spec, EllipseSpec):
        ca, sa = np.cos(spec.angle), np.sin(spec.angle)
        u, v = spec.a * np.cos(th), spec.b * np.sin(th)
        xy = np.column_stack([spec.center[0] + ca * u - sa * v, spec.center[1] + sa * u + ca * v])
    elif isinstance(spec, FourierSpec):
        r = np.zeros(n)
        for k, c in enumerate(spec.cos):
            r += c * np.cos(k * th)
        for k, s in enumerate(spec.sin):
            if k:
                r += s * np.sin(k * th)
        if np.any(r <= 0):
            raise SelfIntersection("radial Fourier spec has non-positive radius")
        cx, cy = spec.center
        xy = np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
        if all(c == 0 for c in spec.cos[1:]) and all(s == 0 for s in spec.sin[1:]):
            circle = (float(cx), float(cy), float(spec.cos[0]))
    else:
        raise TypeError(f"unsupported curve spec {spec!r}")
    return curve_from_nodes(xy, container, circle, check)


def _segments_intersect(pts):
    """True if the closed polygon through ``pts`` has two crossing non-adjacent edges."""
    a = pts
    b = np.roll(pts, -1, axis=0)
    m = len(pts)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    o1 = orient(A, B, C)
    o2 = orient(A, B, D)
    o3 = orient(C, D, A)
    o4 = orient(C, D, B)
    cross = (o1 * o2 < 0) & (o3 * o4 < 0)
    i, j = np.indices((m, m))
    gap = np.abs(i - j)
    adjacent = (gap <= 1) | (gap == m - 1)
    return bool(np.any(cross & ~adjacent))


def validate_curve(curve: ReferenceCurve):
    """Raise if the curve self-intersects or leaves its container."""
    if not np.all(np.isfinite(curve.xy)):
        raise DegenerateCurve("non-finite node coordinates")
    dense = curve.point(fr.nodes(2 * curve.n))
    if _segments_intersect(dense):
        raise SelfIntersection("curve polygon has crossing edges")
    if curve.container.clearance(dense).min() <= 0:
        raise OutsideContainer("curve touches or leaves the container")
    if curve.area <= 0:
        raise SelfIntersection("curve encloses no positive area")


# --------------------------------------------------------------------------- projection

@dataclass(frozen=True)
class Projection:
    d: np.ndarray        # signed distance, negative inside
    p: np.ndarray        # nearest point on the curve
    theta: np.ndarray    # its parameter
    in_tube: np.ndarray  # |d| < a


def _nearest_node_init(curve, x, oversample=8, chunk=2048):
    m = oversample * curve.n
    th = fr.nodes(m)
    pts = curve.point(th)
    idx = np.empty(len(x), dtype=int)
    for s in range(0, len(x), chunk):
        xs = x[s:s + chunk]
        d2 = (xs[:, None, 0] - pts[None, :, 0]) ** 2 + (xs[:, None, 1] - pts[None, :, 1]) ** 2
        idx[s:s + chunk] = np.argmin(d2, axis=1)
    return th[idx], 2.0 * np.pi / m


def signed_distance_project(curve: ReferenceCurve, x, strict=True) -> Projection:
    """Nearest-point projection and signed distance for one or many points.

    Newton's method on theta for (p(theta) - x) . p'(theta) = 0, started from
    the nearest of 8N dense samples.  Points outside the tube get a
    best-effort answer with ``in_tube`` False; ``strict`` makes a
    non-converged in-tube point raise NotConverged.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    theta, h = _nearest_node_init(curve, x)
    scale = curve.length
    for _ in range(60):
        p = curve.point(theta)
        p1 = curve.point(theta, 1)
        p2 = curve.point(theta, 2)
        r = p - x
        f = np.sum(r * p1, axis=1)
        fp = np.sum(p1 * p1, axis=1) + np.sum(r * p2, axis=1)
        ok = fp > 1e-12 * np.sum(p1 * p1, axis=1)
        step = np.where(ok, f / np.where(ok, fp, 1.0), 0.0)
        step = np.clip(step, -h, h)
        theta = theta - step
        if np.max(np.abs(step)) < 1e-15:
            break
    p = curve.point(theta)
    p1 = curve.point(theta, 1)
    nu = curve.normal_at(theta)
    r = x - p
    d = np.sum(r * nu, axis=1)
    tangential = np.abs(np.sum(r * p1, axis=1)) / np.hypot(p1[:, 0], p1[:, 1])
    in_tube = np.abs(d) < curve.tube.a
    if strict and np.any(in_tube & (tangential > 1e-10 * scale)):
        raise NotConverged("projection Newton iteration did not converge for an in-tube point")
    theta = np.mod(theta, 2.0 * np.pi)
    if single:
        return Projection(d[0], p[0], theta[0], bool(in_tube[0]))
    return Projection(d, p, theta, in_tube)


def tube_point(curve: ReferenceCurve, theta, d):
    """The tubular coordinate map (p(theta), d) -> p + d * nu."""
    return curve.point(theta) + np.asarray(d)[..., None] * curve.normal_at(theta)


# --------------------------------------------------------------------------- tube

@dataclass(frozen=True)
class TubeData:
    a: float
    r_ball: float
    kappa_max: float


def tube_and_ball(curve: ReferenceCurve, container: Optional[Container] = None) -> TubeData:
    """Tube half-width and ball-condition radius from a sampled medial-axis search.

    For each node p with normal nu and every other node q, the largest
    tangent ball on the inner side passing clear of q has radius
    |p - q|^2 / (2 (p - q).nu) (outer side: the negative of the denominator).
    These are combined with 1/|kappa| and capped by the wall clearance.
    """
    container = container or curve.container
    kappa = curve.curvature
    kmax = float(np.max(np.abs(kappa)))
    if not np.isfinite(kmax) or kmax * curve.length > 1e8:
        raise DegenerateCurve(f"curvature bound {kmax!r} is not usable")
    p, nu = curve.xy, curve.normal
    w = p[:, None, :] - p[None, :, :]
    wn = np.einsum("ijk,ik->ij", w, nu)
    w2 = np.einsum("ijk,ijk->ij", w, w)
    tiny = 1e-14 * curve.length
    with np.errstate(divide="ignore", invalid="ignore"):
        r_in = np.where(wn > tiny, w2 / (2.0 * np.where(wn > tiny, wn, 1.0)), np.inf)
        r_out = np.where(wn < -tiny, w2 / (-2.0 * np.where(wn < -tiny, wn, -1.0)), np.inf)
    r_in_min = r_in.min()
    r_out_min = r_out.min()
    if np.any(kappa > 0):
        r_in_min = min(r_in_min, 1.0 / kappa.max())
    if np.any(kappa < 0):
        r_out_min = min(r_out_min, -1.0 / kappa.min())
    clearance = float(container.clearance(curve.point(fr.nodes(4 * curve.n))).min())
    r_ball = float(min(r_in_min, r_out_min, clearance))
    if r_ball <= 0:
        raise DegenerateCurve("no positive ball radius (curve touches the wall?)")
    a = TUBE_SAFETY * min(1.0 / kmax if kmax > 0 else np.inf, r_ball)
    return TubeData(a=float(a), r_ball=r_ball, kappa_max=kmax)


# --------------------------------------------------------------------------- level function

def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        g = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return f / (f + g)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)
CUTOFF_SHOULDER = 0.05


def _smoothstep_integral(x):
    """int_0^x smoothstep for x in [0, 1] (Gauss-Legendre; equals 1/2 at x = 1)."""
    x = np.asarray(x, dtype=float)
    u = 0.5 * x[..., None] * (_GL_NODES + 1.0)
    return 0.5 * x * (_smoothstep(u) @ _GL_WEIGHTS)


def _ramp(t, w=CUTOFF_SHOULDER):
    """C-infinity ramp from 0 to 1 on [0, 1] whose slope is flat at 1/(1 - w) except on
    shoulders of width w.  A steeper ramp would fold the Hanzawa map at |rho| = 0.3 a."""
    t = np.clip(t, 0.0, 1.0)
    head = w * _smoothstep_integral(np.minimum(t, w) / w)
    mid = np.clip(t - w, 0.0, 1.0 - 2.0 * w)
    tail = np.where(t > 1.0 - w, w * (0.5 - _smoothstep_integral(np.clip((1.0 - t) / w, 0.0, 1.0))), 0.0)
    return (head + mid + tail) / (1.0 - w)


def cutoff(s):
    """Smooth bump: 1 for |s| < 1/3, 0 for |s| > 2/3, slope at most 3/(1 - CUTOFF_SHOULDER)."""
    t = 3.0 * np.abs(np.asarray(s, dtype=float)) - 1.0
    return np.where(t <= 0.0, 1.0, np.where(t >= 1.0, 0.0, 1.0 - _ramp(t)))


@dataclass(frozen=True)
class LevelFunction:
    curve: ReferenceCurve
    tube: TubeData

    def profile(self, s):
        """g(s) = s chi(s/a) + (1 - chi(s/a)) sgn(s)."""
        s = np.asarray(s, dtype=float)
        c = cutoff(s / self.tube.a)
        return s * c + (1.0 - c) * np.sign(s)

    def __call__(self, x):
        return level_function_eval(self, x)


def level_function(curve: ReferenceCurve) -> LevelFunction:
    return LevelFunction(curve, curve.tube)


def level_function_eval(lf: LevelFunction, x):
    proj = signed_distance_project(lf.curve, x, strict=False)
    return lf.profile(proj.d)


# --------------------------------------------------------------------------- bundle metric

def _lift(curve, theta):
    pos = curve.point(theta)
    nu = curve.normal_at(theta)
    kap = curve.curvature_at(theta)
    tau = np.stack([-nu[..., 1], nu[..., 0]], axis=-1)
    shape = kap[..., None, None] * tau[..., :, None] * tau[..., None, :]
    return pos, nu, shape


def _sym2_norm(m):
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 1, 1]
    half = 0.5 * (a + c)
    rad = np.sqrt(0.25 * (a - c) ** 2 + b**2)
    return np.maximum(np.abs(half + rad), np.abs(half - rad))


def _lifted_gap(l1, l2, order):
    gap = np.hypot(*np.moveaxis(l1[0] - l2[0], -1, 0))
    if order == 2:
        gap = np.maximum(gap, np.hypot(*np.moveaxis(l1[1] - l2[1], -1, 0)))
        gap = np.maximum(gap, _sym2_norm(l1[2] - l2[2]))
    return gap


def _directed(c1, c2, order):
    l1 = _lift(c1, c1.theta)
    proj = signed_distance_project(c2, c1.xy, strict=False)
    best = _lifted_gap(l1, _lift(c2, proj.theta), order)
    l2 = _lift(c2, c2.theta)
    pairwise = _lifted_gap(
        tuple(v[:, None] for v in l1), tuple(v[None, :] for v in l2), order
    )
    best = np.minimum(best, pairwise.min(axis=1))
    return float(best.max())


def bundle_distance(c1: ReferenceCurve, c2: ReferenceCurve, order=0) -> float:
    """Hausdorff distance of curves (order 0) or of their second normal bundles (order 2).

    The order-2 variant lifts each point to (p, nu, kappa tau tau^T) and
    compares lifted points by the max of the three component distances
    (spectral norm for the shape operator).
    """
    if order not in (0, 2):
        raise ValueError("order must be 0 or 2")
    c1 = c1.resampled(max(64, c1.n))
    c2 = c2.resampled(max(64, c2.n))
    return max(_directed(c1, c2, order), _directed(c2, c1, order))
