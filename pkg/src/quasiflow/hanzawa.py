"""Interfaces as normal graphs over a reference curve.

An interface is p + rho(p) nu(p) for p on the reference curve.  The height
rho is stored at the reference curve's nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _fourier as fr
from .errors import TubeViolation, UnsupportedBase
from .geometry import (
    ReferenceCurve,
    curve_from_nodes,
    cutoff,
    signed_distance_project,
)

HEIGHT_MARGIN = 0.3
SLOPE_BOUND = 1.0


@dataclass(frozen=True, eq=False)
class HeightField:
    base: ReferenceCurve
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.base.n,):
            raise ValueError(f"height field needs {self.base.n} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.base.n

    @cached_property
    def sup(self):
        return float(np.max(np.abs(self.values)))

    @cached_property
    def slope(self):
        """Arclength derivative of rho along the base curve."""
        return fr.derivative(self.values, 1) / self.base.speed

    @cached_property
    def max_slope(self):
        return float(np.max(np.abs(self.slope)))

    def within_margin(self, margin=HEIGHT_MARGIN):
        """Validity margin used by the evolution: |rho| <= margin*a and |rho'| <= 1."""
        return self.sup <= margin * self.base.tube.a and self.max_slope <= SLOPE_BOUND

    def at(self, theta):
        return fr.evaluate(fr.coefficients(self.values), theta, self.n)

    def with_values(self, values):
        return HeightField(self.base, values)

    def check_resolution(self):
        return fr.check_resolution(self.values, "height field")


def zero_height(base: ReferenceCurve) -> HeightField:
    return HeightField(base, np.zeros(base.n))


def realize_interface(rho: HeightField, check=True) -> ReferenceCurve:
    """The curve p + rho(p) nu(p), sampled at the base nodes."""
    base = rho.base
    if rho.sup >= base.tube.a:
        raise TubeViolation(f"|rho|_inf = {rho.sup:.3e} leaves the tube of half-width {base.tube.a:.3e}")
    xy = base.xy + rho.values[:, None] * base.normal
    return curve_from_nodes(xy, base.container, None, check)


def _polar(rho):
    base = rho.base
    if base.circle is None:
        raise UnsupportedBase("quasilinear curvature split needs a circular reference curve")
    r = base.circle[2] + rho.values
    r1 = fr.derivative(rho.values, 1)
    r2 = fr.derivative(rho.values, 2)
    return r, r1, r2


def curvature(rho: HeightField) -> np.ndarray:
    """Curvature of the realized interface at the base nodes (circles: +1/R)."""
    if rho.base.circle is not None:
        r, r1, r2 = _polar(rho)
        return (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5
    return realize_interface(rho, check=False).curvature


@dataclass(frozen=True)
class CurvatureSplit:
    """K(rho) = -a2 * rho'' + Q, i.e. P(rho) sigma = -a2 sigma''."""

    second_order_coeff: np.ndarray
    lower_order: np.ndarray

    def apply_P(self, sigma):
        return -self.second_order_coeff * fr.derivative(sigma, 2)


def split_curvature(rho: HeightField) -> CurvatureSplit:
    r, r1, _ = _polar(rho)
    denom = (r * r + r1 * r1) ** 1.5
    return CurvatureSplit(r / denom, (r * r + 2.0 * r1 * r1) / denom)


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def reparameterize(gamma: ReferenceCurve, sigma_new: ReferenceCurve, margin=1.0) -> HeightField:
    """Height function of ``gamma`` over ``sigma_new``.

    For every node p_j of the new base, the normal ray p_j + t nu_j is
    intersected with gamma by Newton's method on gamma's parameter.
    Raises TubeViolation when |rho| reaches ``margin`` times the tube
    half-width (1.0 is the hard bound; the evolution passes 0.3).
    """
    p, nu = sigma_new.xy, sigma_new.normal
    a = sigma_new.tube.a
    m = 8 * gamma.n
    s_dense = fr.nodes(m)
    g_dense = gamma.point(s_dense)
    rel = g_dense[None, :, :] - p[:, None, :]
    t = np.einsum("jmk,jk->jm", rel, nu)
    c = np.abs(_cross(rel, nu[:, None, :]))
    c = np.where(np.abs(t) < a, c, np.inf)
    if not np.all(np.isfinite(c.min(axis=1))):
        raise TubeViolation("interface does not cross every normal ray inside the tube")
    s = s_dense[np.argmin(c, axis=1)]
    h = 2.0 * np.pi / m
    for _ in range(60):
        g = gamma.point(s)
        g1 = gamma.point(s, 1)
        f = _cross(g - p, nu)
        fp = _cross(g1, nu)
        step = np.clip(f / np.where(np.abs(fp) > 1e-300, fp, 1e-300), -h, h)
        s = s - step
        if np.max(np.abs(step)) < 1e-15:
            break
    g = gamma.point(s)
    values = np.einsum("jk,jk->j", g - p, nu)
    if np.max(np.abs(_cross(g - p, nu))) > 1e-10:
        raise TubeViolation("normal-ray intersection did not converge")
    if np.max(np.abs(values)) >= margin * a:
        raise TubeViolation(
            f"|rho|_inf = {np.max(np.abs(values)):.3e} exceeds {margin}*a = {margin * a:.3e}"
        )
    return HeightField(sigma_new, values)


def hanzawa_extension(rho: HeightField, x) -> np.ndarray:
    """Theta_h(x) = x + chi(d(x)/a) rho(Pi(x)) nu(Pi(x))."""
    x = np.asarray(x, dtype=float)
    base = rho.base
    proj = signed_distance_project(base, x, strict=False)
    theta = np.atleast_1d(proj.theta)
    d = np.atleast_1d(proj.d)
    weight = cutoff(d / base.tube.a) * rho.at(theta)
    out = np.atleast_2d(x) + weight[:, None] * base.normal_at(theta)
    return out[0] if x.ndim == 1 else out
