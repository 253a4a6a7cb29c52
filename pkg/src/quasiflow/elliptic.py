"""Two-phase harmonic problem and its Dirichlet-to-Neumann jump.

Given Dirichlet data g on the interface Gamma, u is harmonic inside Gamma
(phase 1) and between Gamma and the container wall (phase 2), equals g on
Gamma and has zero normal derivative on the wall.  The unknown Cauchy data
are found from Green's representation formula (direct boundary integral
method): Nystrom discretization with Kress' product quadrature for the
logarithmic single layer on Gamma and the periodic trapezoid rule for all
smooth kernels.

With G(x, y) = -log(|x - y| / L) / (2 pi), for x on the boundary of a
phase D with outer normal n:  u(x)/2 = S[du/dn](x) - D[u](x).  The length
scale L only adds a multiple of the (zero) total flux for true solutions,
but L must differ from the logarithmic capacity of the wall (its radius),
otherwise the discrete system has a one-dimensional kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import _fourier as fr
from .errors import IllConditioned
from .geometry import CircleSpec, Container, ReferenceCurve, build_reference_curve
from .io import write_text_atomic

FOUR_PI = 4.0 * np.pi
KERNEL_SCALE = 4.0  # L / wall radius


def kress_weights(n):
    """Circulant weights R_j(t_i) for int log(4 sin^2((t - s)/2)) f(s) ds."""
    half = n // 2
    d = fr.nodes(n)
    m = np.arange(1, half)
    r = -(4.0 * np.pi / n) * np.sum(np.cos(np.outer(d, m)) / m, axis=1)
    r -= (4.0 * np.pi / n**2) * np.cos(half * d)
    i = np.arange(n)
    return r[(i[:, None] - i[None, :]) % n]


def single_layer_self(curve: ReferenceCurve, scale=1.0):
    n = curve.n
    t = curve.theta
    x = curve.xy
    diff = x[:, None, :] - x[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    s2 = 4.0 * np.sin(0.5 * (t[:, None] - t[None, :])) ** 2
    np.fill_diagonal(s2, 1.0)
    np.fill_diagonal(dist2, 1.0)
    smooth = np.log(dist2 / s2)
    np.fill_diagonal(smooth, np.log(curve.speed**2))
    mat = -(kress_weights(n) + (2.0 * np.pi / n) * (smooth - 2.0 * np.log(scale))) / FOUR_PI
    return mat * curve.speed[None, :]


def double_layer_self(curve: ReferenceCurve):
    x, nu = curve.xy, curve.normal
    diff = x[None, :, :] - x[:, None, :]  # y_j - x_i
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(dist2, 1.0)
    kern = -np.einsum("ijk,jk->ij", diff, nu) / (2.0 * np.pi * dist2)
    np.fill_diagonal(kern, -curve.curvature / FOUR_PI)
    return kern * curve.weights[None, :]


def single_layer_at(curve: ReferenceCurve, targets, scale=1.0):
    diff = curve.xy[None, :, :] - np.asarray(targets)[:, None, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    return -np.log(dist2 / scale**2) / FOUR_PI * curve.weights[None, :]


def double_layer_at(curve: ReferenceCurve, targets):
    diff = curve.xy[None, :, :] - np.asarray(targets)[:, None, :]
    dist2 = np.einsum("ijk,ijk->ij", diff, diff)
    kern = -np.einsum("ijk,jk->ij", diff, curve.normal) / (2.0 * np.pi * dist2)
    return kern * curve.weights[None, :]


def wall_curve(container: Container, n) -> ReferenceCurve:
    return build_reference_curve(CircleSpec(container.radius, container.center), container, n, check=False)


def _wall_nodes(container, clearance, n_min):
    n = n_min
    while 2.0 * np.pi * container.radius / n > clearance / 5.0 and n < 8192:
        n *= 2
    return n


@dataclass(frozen=True)
class TwoPhaseSolution:
    gamma: ReferenceCurve
    container: Container
    g: np.ndarray
    flux_inner: np.ndarray   # d u^1 / d nu on Gamma
    flux_outer: np.ndarray   # d u^2 / d nu on Gamma
    wall_values: np.ndarray  # u on the container wall
    operator: "TwoPhaseOperator" = field(repr=False)

    @property
    def jump(self):
        return self.flux_outer - self.flux_inner

    def evaluate(self, points):
        return self.operator.evaluate(self, points)


class TwoPhaseOperator:
    """Assembled and factorized boundary integral system for one interface."""

    def __init__(self, gamma: ReferenceCurve, container: Optional[Container] = None, n_outer=None):
        self.gamma = gamma
        self.container = container or gamma.container
        dense = gamma.point(fr.nodes(4 * gamma.n))
        clearance = float(self.container.clearance(dense).min())
        h_gamma = float(gamma.speed.max()) * 2.0 * np.pi / gamma.n
        if clearance <= 0 or h_gamma > clearance:
            raise IllConditioned(
                f"interface is {clearance:.3e} from the wall with node spacing {h_gamma:.3e}"
            )
        if gamma.tube.r_ball < 2.0 * h_gamma:
            raise IllConditioned("interface nearly touches itself at this resolution")
        if n_outer is None:
            n_outer = _wall_nodes(self.container, clearance, max(64, gamma.n))
        self.wall = wall_curve(self.container, n_outer)

        n = gamma.n
        self.scale = KERNEL_SCALE * self.container.radius
        self.S = single_layer_self(gamma, self.scale)
        self.D = double_layer_self(gamma)
        self.D_wall = double_layer_self(self.wall)
        self.S_to_wall = single_layer_at(gamma, self.wall.xy, self.scale)
        self.D_to_wall = double_layer_at(gamma, self.wall.xy)
        self.Dwall_to_gamma = double_layer_at(self.wall, gamma.xy)

        self._lu_inner = lu_factor(self.S)
        nw = self.wall.n
        block = np.empty((n + nw, n + nw))
        block[:n, :n] = -self.S
        block[:n, n:] = -self.Dwall_to_gamma
        block[n:, :n] = -self.S_to_wall
        block[n:, n:] = -(0.5 * np.eye(nw) + self.D_wall)
        self._lu_outer = lu_factor(block)

    def _fluxes(self, g):
        n = self.gamma.n
        q1 = lu_solve(self._lu_inner, 0.5 * g + self.D @ g)
        rhs = np.concatenate([0.5 * g - self.D @ g, -self.D_to_wall @ g])
        sol = lu_solve(self._lu_outer, rhs)
        return q1, sol[:n], sol[n:]

    def solve(self, g) -> TwoPhaseSolution:
        g = np.asarray(g, dtype=float)
        q1, q2, w = self._fluxes(g)
        return TwoPhaseSolution(self.gamma, self.container, g, q1, q2, w, self)

    @cached_property
    def dtn_matrix(self):
        """Matrix M with jump = M g at the interface nodes."""
        eye = np.eye(self.gamma.n)
        q1, q2, _ = self._fluxes(eye)
        return q2 - q1

    def evaluate(self, sol: TwoPhaseSolution, points):
        """u at arbitrary points from the representation formula.

        Curves and densities are resampled upward until the node spacing is at
        most a quarter of the nearest target distance, which keeps the
        trapezoid rule accurate close to either boundary.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        inside = winding_number(self.gamma, points) > 0.5
        gamma, (q1, q2, g) = _refined(self.gamma, (sol.flux_inner, sol.flux_outer, sol.g), points)
        wall, (w,) = _refined(self.wall, (sol.wall_values,), points[~inside])
        u = np.empty(len(points))
        if inside.any():
            p = points[inside]
            u[inside] = single_layer_at(gamma, p, self.scale) @ q1 - double_layer_at(gamma, p) @ g
        if (~inside).any():
            p = points[~inside]
            u[~inside] = (
                -single_layer_at(gamma, p, self.scale) @ q2
                + double_layer_at(gamma, p) @ g
                - double_layer_at(wall, p) @ w
            )
        return u


def _refined(curve: ReferenceCurve, densities, points, max_nodes=8192):
    if len(points) == 0:
        return curve, densities
    dist = np.sqrt(((points[:, None, :] - curve.xy[None, :, :]) ** 2).sum(axis=2)).min()
    m = curve.n
    while m < max_nodes and float(curve.speed.max()) * 2.0 * np.pi / m > 0.25 * dist:
        m *= 2
    if m == curve.n:
        return curve, densities
    return curve.resampled(m), tuple(fr.resample(d, m) for d in densities)


def winding_number(curve: ReferenceCurve, points):
    poly = curve.point(fr.nodes(4 * curve.n))
    rel = poly[None, :, :] - np.asarray(points)[:, None, :]
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    dang = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    dang = (dang + np.pi) % (2.0 * np.pi) - np.pi
    return dang.sum(axis=1) / (2.0 * np.pi)


def solve_two_phase(container: Container, gamma: ReferenceCurve, g, n_outer=None) -> TwoPhaseSolution:
    fr.check_resolution(g, "Dirichlet data")
    return TwoPhaseOperator(gamma, container, n_outer).solve(g)


def dtn_jump(container: Container, gamma: ReferenceCurve, g, n_outer=None) -> np.ndarray:
    return solve_two_phase(container, gamma, g, n_outer).jump


def dirichlet_energy(sol: TwoPhaseSolution) -> float:
    """Integral of |grad u|^2 over both phases via -oint g [[du/dnu]] ds."""
    return float(-np.sum(sol.g * sol.jump * sol.gamma.weights))


def concentric_jump_eigenvalue(k, radius, wall_radius):
    """Closed-form jump eigenvalue j_k for g = cos(k theta) on concentric circles."""
    if k == 0:
        return 0.0
    alpha = 1.0 / (radius**k + wall_radius ** (2 * k) * radius ** (-k))
    return alpha * k * (radius ** (k - 1) - wall_radius ** (2 * k) * radius ** (-k - 1)) - k / radius


def write_probe_csv(path, points, values):
    lines = ["x,y,u"] + [f"{x:.12e},{y:.12e},{u:.12e}" for (x, y), u in zip(np.asarray(points), values)]
    write_text_atomic(path, "\n".join(lines) + "\n")
