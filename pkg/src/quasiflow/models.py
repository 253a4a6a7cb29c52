"""Problem backends: a 1D second-order quasilinear Dirichlet problem and the
Mullins-Sekerka height equation over a circular reference curve."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from . import _fourier as fr
from .elliptic import TwoPhaseOperator
from .errors import ConstraintViolation, NonPositiveCoefficient, TubeViolation, UnsupportedBase
from .geometry import Container, ReferenceCurve
from .hanzawa import HeightField, curvature, realize_interface, split_curvature
from .stepper import NormSuite, QuasilinearProblem, check_weight, compute_mu0


def default_weight(mu0):
    return 0.5 * (mu0 + 1.0)


# --- second-order problem on (0, 1) -------------------------------------------

class SecondOrderProblem(QuasilinearProblem):
    """u_t - a(u, u_x) u_xx = f(u, u_x) on (0, 1), u = 0 at both ends.

    States are the values at the m interior nodes of a uniform mesh.
    A(v)u = -a(v, v_x) u_xx with second-order central differences.
    """

    def __init__(self, a_fn: Callable, f_fn: Optional[Callable], m: int, p=4.0, mu=None, a_min=1e-8):
        self.a_fn, self.f_fn = a_fn, f_fn
        self.dim = int(m)
        self.h = 1.0 / (m + 1)
        self.x = self.h * np.arange(1, m + 1)
        mu0 = compute_mu0(1, p, "secondorder")
        mu = default_weight(mu0) if mu is None else mu
        check_weight(mu, mu0)
        self.norms = NormSuite(0.0, 2.0, p, mu, "dirichlet")
        self.a_min = a_min

    def dx(self, u):
        pad = np.concatenate([[0.0], u, [0.0]])
        return (pad[2:] - pad[:-2]) / (2.0 * self.h)

    def dxx(self, u):
        pad = np.concatenate([[0.0], u, [0.0]])
        return (pad[2:] - 2.0 * pad[1:-1] + pad[:-2]) / self.h**2

    def coefficient(self, v):
        a = np.broadcast_to(np.asarray(self.a_fn(v, self.dx(v)), dtype=float), v.shape)
        if np.min(a) < self.a_min:
            raise NonPositiveCoefficient(f"diffusion coefficient dropped to {np.min(a):.3e}")
        return a

    def check_state(self, v):
        if not np.all(np.isfinite(v)):
            raise ConstraintViolation("state is not finite")
        self.coefficient(v)

    def apply_A(self, v, u):
        return -self.coefficient(v) * self.dxx(u)

    def apply_F(self, v):
        if self.f_fn is None:
            return np.zeros(self.dim)
        return np.broadcast_to(np.asarray(self.f_fn(v, self.dx(v)), dtype=float), v.shape).copy()

    def operator(self, v):
        m = self.dim
        lap = (np.diag(-2.0 * np.ones(m)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / self.h**2
        return -self.coefficient(v)[:, None] * lap

    def linear_solver(self, v0, dt):
        c = dt * self.coefficient(v0) / self.h**2
        ab = np.zeros((3, self.dim))
        ab[0, 1:] = -c[:-1]
        ab[1] = 1.0 + 2.0 * c
        ab[2, :-1] = -c[1:]
        return lambda rhs: solve_banded((1, 1), ab, rhs)


def make_second_order(a_fn, f_fn=None, m=63, p=4.0, mu=None) -> SecondOrderProblem:
    return SecondOrderProblem(a_fn, f_fn, m, p, mu)


# --- Mullins-Sekerka -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MsState:
    """Interface as heights over a reference circle, with its derived operators."""

    rho: HeightField
    container: Optional[Container] = None

    def __post_init__(self):
        if self.rho.base.circle is None:
            raise UnsupportedBase("Mullins-Sekerka states need a circular reference curve")
        if self.container is None:
            object.__setattr__(self, "container", self.rho.base.container)

    @property
    def sigma(self) -> ReferenceCurve:
        return self.rho.base

    @cached_property
    def interface(self) -> ReferenceCurve:
        return realize_interface(self.rho)

    @cached_property
    def operator(self) -> TwoPhaseOperator:
        return TwoPhaseOperator(self.interface, self.container)

    @cached_property
    def dtn(self):
        return self.operator.dtn_matrix

    @cached_property
    def curvature(self):
        return curvature(self.rho)

    @cached_property
    def split(self):
        return split_curvature(self.rho)

    @cached_property
    def metric(self):
        """nu_Sigma . nu_Gamma at the nodes: converts normal velocity to height velocity."""
        return np.einsum("ij,ij->i", self.sigma.normal, self.interface.normal)

    @cached_property
    def solution(self):
        return self.operator.solve(self.curvature)

    @cached_property
    def normal_velocity(self):
        return self.solution.jump

    @cached_property
    def velocity(self):
        return self.normal_velocity / self.metric

    def with_heights(self, values) -> "MsState":
        return MsState(self.rho.with_values(values), self.container)


def ms_state(sigma: ReferenceCurve, heights=None, container=None) -> MsState:
    values = np.zeros(sigma.n) if heights is None else np.asarray(heights, dtype=float)
    return MsState(HeightField(sigma, values), container)


def ms_vector_field(state: MsState) -> np.ndarray:
    return state.velocity


def ms_equilibrium_residual(state: MsState) -> float:
    return float(np.max(np.abs(state.velocity)))


class MsProblem(QuasilinearProblem):
    """Height equation rho' = -A(rho)rho + F(rho) over a fixed circle.

    A(v)u = (1/c) M_v (a2 u''),  F(v) = (1/c) M_v Q(v), with M_v the DtN
    jump matrix of the interface realized from v, c = nu_Sigma . nu_Gamma and
    curvature = -a2 rho'' + Q.  Dense matrices; n is a few hundred at most.
    """

    def __init__(self, sigma: ReferenceCurve, container=None, p=6.0, mu=None, cache_size=8):
        if sigma.circle is None:
            raise UnsupportedBase("Mullins-Sekerka problem needs a circular reference curve")
        self.sigma = sigma
        self.container = container or sigma.container
        self.dim = sigma.n
        mu0 = compute_mu0(2, p, "mullins_sekerka")
        mu = default_weight(mu0) if mu is None else mu
        check_weight(mu, mu0)
        self.norms = NormSuite(1.0 - 1.0 / p, 4.0 - 1.0 / p, p, mu, "periodic")
        self.d2 = fr.derivative(np.eye(sigma.n), 2)
        self._cache = OrderedDict()
        self._cache_size = cache_size

    def state(self, v) -> MsState:
        v = np.asarray(v, dtype=float)
        key = v.tobytes()
        st = self._cache.get(key)
        if st is None:
            st = ms_state(self.sigma, v, self.container)
            self._cache[key] = st
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(key)
        return st

    def check_state(self, v):
        a = self.sigma.tube.a
        sup = float(np.max(np.abs(v)))
        if not np.isfinite(sup) or sup >= a:
            raise ConstraintViolation(f"|rho|_inf = {sup:.3e} reached the tube half-width {a:.3e}")

    def operator(self, v):
        st = self.state(v)
        return (st.dtn / st.metric[:, None]) @ (st.split.second_order_coeff[:, None] * self.d2)

    def apply_A(self, v, u):
        st = self.state(v)
        return st.dtn @ (st.split.second_order_coeff * fr.derivative(u, 2)) / st.metric

    def apply_F(self, v):
        st = self.state(v)
        return st.dtn @ st.split.lower_order / st.metric

    def vector_field(self, v):
        return self.state(v).velocity


def ms_problem(container: Optional[Container], sigma: ReferenceCurve, p=6.0, mu=None) -> MsProblem:
    return MsProblem(sigma, container, p, mu)


def offset_circle_heights(sigma: ReferenceCurve, center, radius):
    """Heights over a circular base of the circle with given center and radius."""
    if sigma.circle is None:
        raise UnsupportedBase("closed form needs a circular base")
    cx, cy, r0 = sigma.circle
    dx, dy = center[0] - cx, center[1] - cy
    t = sigma.theta
    proj = dx * np.cos(t) + dy * np.sin(t)
    disc = radius**2 - (dx * dx + dy * dy) + proj**2
    if np.min(disc) < 0:
        raise TubeViolation("offset circle does not cross every normal ray")
    return proj + np.sqrt(disc) - r0


def rough_heights(theta, amplitude, decay=2.2, seed=0, k_min=2):
    """sum_k amplitude k^{-decay} cos(k theta + phase_k) over the resolved modes.

    Phases come from a seeded generator and do not depend on the node
    count, so refinements of the same data agree on the shared modes.
    """
    n = np.asarray(theta).size
    ks = np.arange(k_min, n // 2)
    phases = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, 1 << 14)[: ks.size]
    return amplitude * (ks[:, None] ** -decay * np.cos(np.outer(ks, theta) + phases[:, None])).sum(axis=0)
