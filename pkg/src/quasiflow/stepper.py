"""Time integration for quasilinear problems  u' + A(u)u = F(u).

Weighted grids and norms, the frozen-coefficient Picard construction on a
window, continuation by gluing windows, and a semi-implicit marcher for
long runs.  Time discretization is backward Euler throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.fft import dst, idst
from scipy.linalg import lu_factor, lu_solve

from .errors import (
    ConstraintViolation,
    FiniteTimeBreakdown,
    GridMismatch,
    NoContraction,
    NonPositiveCoefficient,
    ParameterOutOfRange,
)

MAX_HALVINGS = 20


def _check_p_mu(p, mu):
    if not p > 1.0:
        raise ParameterOutOfRange(f"p must exceed 1, got {p}")
    if not (1.0 / p < mu <= 1.0):
        raise ParameterOutOfRange(f"mu must lie in (1/p, 1] = ({1.0 / p:.6g}, 1], got {mu}")


def default_grading(mu, p):
    return max(1.0, 2.0 / (mu - 1.0 / p))


@dataclass(frozen=True)
class WeightedGrid:
    """Nodes t_j = T (j/N)^q on [0, T] carrying the weight t^{(1-mu)p}."""

    T: float
    n_steps: int
    mu: float = 1.0
    p: float = 2.0
    q: Optional[float] = None

    def __post_init__(self):
        _check_p_mu(self.p, self.mu)
        if not self.T > 0:
            raise ParameterOutOfRange(f"horizon must be positive, got {self.T}")
        if int(self.n_steps) < 1:
            raise ParameterOutOfRange("need at least one time step")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        if self.q is None:
            object.__setattr__(self, "q", default_grading(self.mu, self.p))
        elif self.q < 1.0:
            raise ParameterOutOfRange(f"grading exponent must be >= 1, got {self.q}")

    @classmethod
    def uniform(cls, T, n_steps, p=2.0):
        return cls(T, n_steps, 1.0, p, 1.0)

    @property
    def nodes(self):
        return self.T * (np.arange(self.n_steps + 1) / self.n_steps) ** self.q

    @property
    def steps(self):
        return np.diff(self.nodes)

    def halved(self):
        return WeightedGrid(0.5 * self.T, self.n_steps, self.mu, self.p, self.q)

    @property
    def exponent(self):
        return (1.0 - self.mu) * self.p

    def quadrature_weights(self):
        """Product-trapezoid weights for int_0^T t^beta f(t) dt with f piecewise linear."""
        t = self.nodes
        b = self.exponent
        a0, a1 = t[:-1], t[1:]
        m0 = (a1 ** (b + 1) - a0 ** (b + 1)) / (b + 1)
        m1 = (a1 ** (b + 2) - a0 ** (b + 2)) / (b + 2)
        h = a1 - a0
        left = (a1 * m0 - m1) / h
        right = (m1 - a0 * m0) / h
        w = np.zeros(t.size)
        w[:-1] += left
        w[1:] += right
        return w, right[0], m0[0]


def sigma_factor(T, p, mu):
    """sigma(T) = (1 + (1-mu)p)^{-1/p} T^{1/p + 1 - mu}, the weighted L_p norm of 1 on [0, T]."""
    _check_p_mu(p, mu)
    if not T > 0:
        raise ParameterOutOfRange(f"T must be positive, got {T}")
    return (1.0 + (1.0 - mu) * p) ** (-1.0 / p) * T ** (1.0 / p + 1.0 - mu)


def time_derivative(traj, grid: WeightedGrid):
    """Backward differences; the first node reuses the first one-sided difference."""
    traj = np.asarray(traj, dtype=float)
    d = np.diff(traj, axis=0) / grid.steps.reshape((-1,) + (1,) * (traj.ndim - 1))
    return np.concatenate([d[:1], d], axis=0)


def weighted_norm(traj, grid: WeightedGrid, norm: Optional[Callable] = None, derivative=False):
    """Discrete (int_0^T t^{(1-mu)p} |u(t)|^p dt)^{1/p}.

    ``traj`` holds one state (or scalar) per grid node, ``norm`` maps a
    state to its spatial norm (absolute value / Euclidean norm if omitted).
    With ``derivative`` the H^1 variant |u|_{L_{p,mu}} + |u'|_{L_{p,mu}} is
    returned.  A non-finite value at t = 0 (singular data) is handled by a
    right-endpoint rule on the first interval.
    """
    traj = np.asarray(traj, dtype=float)
    if traj.shape[0] != grid.n_steps + 1:
        raise GridMismatch(f"trajectory has {traj.shape[0]} samples, grid has {grid.n_steps + 1} nodes")
    if norm is None:
        vals = np.abs(traj) if traj.ndim == 1 else np.sqrt(np.sum(traj.reshape(len(traj), -1) ** 2, axis=1))
    else:
        vals = np.array([norm(u) for u in traj])
    out = _integrate(vals, grid)
    if derivative:
        out += weighted_norm(time_derivative(traj, grid), grid, norm)
    return out


def _integrate(vals, grid):
    p = grid.p
    w, right0, first = grid.quadrature_weights()
    f = np.abs(vals) ** p
    if np.isfinite(f[0]):
        total = float(np.dot(w, f))
    else:
        total = float(np.dot(w[1:], f[1:]) + (first - right0) * f[1])
    return total ** (1.0 / p)


class NormSuite:
    """Bessel-potential norms |(1 - d^2)^{s/2} u|_{L_p} standing in for the scale X_0, X_1.

    ``kind`` is "periodic" (nodal values on [0, 2 pi)) or "dirichlet"
    (interior nodes of a uniform mesh of (0, 1), zero boundary values).
    """

    def __init__(self, s0, s1, p, mu, kind="periodic"):
        _check_p_mu(p, mu)
        if kind not in ("periodic", "dirichlet"):
            raise ValueError(f"unknown norm kind {kind!r}")
        self.s0, self.s1, self.p, self.mu, self.kind = float(s0), float(s1), float(p), float(mu), kind

    def order(self, which):
        if which == "x0":
            return self.s0
        if which == "x1":
            return self.s1
        if which == "xgm":
            return self.s0 + (self.s1 - self.s0) * (self.mu - 1.0 / self.p)
        if which == "xg":
            return self.s0 + (self.s1 - self.s0) * (1.0 - 1.0 / self.p)
        raise ValueError(f"unknown space {which!r}")

    def sobolev(self, u, s):
        u = np.asarray(u, dtype=float)
        n = u.size
        if self.kind == "periodic":
            k = np.fft.rfftfreq(n, 1.0 / n)
            v = np.fft.irfft(np.fft.rfft(u) * (1.0 + k * k) ** (0.5 * s), n)
            h = 2.0 * np.pi / n
        else:
            k = np.pi * np.arange(1, n + 1)
            v = idst(dst(u, type=1) * (1.0 + k * k) ** (0.5 * s), type=1)
            h = 1.0 / (n + 1)
        return float((h * np.sum(np.abs(v) ** self.p)) ** (1.0 / self.p))

    def x0(self, u):
        return self.sobolev(u, self.s0)

    def x1(self, u):
        return self.sobolev(u, self.s1)

    def xgm(self, u):
        return self.sobolev(u, self.order("xgm"))

    def xg(self, u):
        return self.sobolev(u, self.order("xg"))

    def grid(self, T, n_steps, q=None):
        return WeightedGrid(T, n_steps, self.mu, self.p, q)

    def e0(self, traj, grid):
        return weighted_norm(traj, grid, self.x0)

    def e1(self, traj, grid):
        return weighted_norm(traj, grid, self.x0, derivative=True) + weighted_norm(traj, grid, self.x1)


class QuasilinearProblem:
    """Interface for u' + A(v)u = F(v) with frozen-coefficient implicit steps.

    Subclasses provide ``operator(v)`` (a dense matrix) or override
    ``apply_A`` and ``linear_solver``.
    """

    dim: int
    norms: NormSuite

    def operator(self, v):
        raise NotImplementedError

    def apply_A(self, v, u):
        return self.operator(v) @ u

    def apply_F(self, v):
        raise NotImplementedError

    def check_state(self, v):
        """Raise ConstraintViolation if v leaves the admissible set."""

    def vector_field(self, v):
        return -self.apply_A(v, v) + self.apply_F(v)

    def linear_solver(self, v0, dt):
        """Return a solver for (I + dt A(v0)) u = rhs."""
        lu = lu_factor(np.eye(self.dim) + dt * self.operator(v0))
        return lambda rhs: lu_solve(lu, rhs)

    def linear_solve(self, v0, dt, rhs):
        return self.linear_solver(v0, dt)(rhs)


class ConstantProblem(QuasilinearProblem):
    """u' + A u = F with A, F independent of the state."""

    def __init__(self, matrix, forcing=None, norms: Optional[NormSuite] = None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.dim = self.matrix.shape[0]
        self.forcing = np.zeros(self.dim) if forcing is None else np.asarray(forcing, dtype=float)
        self.norms = norms or NormSuite(0.0, 0.0, 2.0, 1.0)

    def operator(self, v):
        return self.matrix

    def apply_F(self, v):
        return self.forcing.copy()


class ShiftedProblem(QuasilinearProblem):
    """A + shift*I and F + shift*id: same solutions, shifted spectrum."""

    def __init__(self, base: QuasilinearProblem, shift):
        self.base, self.shift = base, float(shift)
        self.dim, self.norms = base.dim, base.norms

    def operator(self, v):
        return self.base.operator(v) + self.shift * np.eye(self.dim)

    def apply_A(self, v, u):
        return self.base.apply_A(v, u) + self.shift * np.asarray(u)

    def apply_F(self, v):
        return self.base.apply_F(v) + self.shift * np.asarray(v)

    def check_state(self, v):
        self.base.check_state(v)

    def linear_solver(self, v0, dt):
        scale = 1.0 + self.shift * dt
        inner = self.base.linear_solver(v0, dt / scale)
        return lambda rhs: inner(np.asarray(rhs) / scale)


def spectral_shift(problem: QuasilinearProblem, shift) -> QuasilinearProblem:
    if shift < 0:
        raise ParameterOutOfRange(f"shift must be nonnegative, got {shift}")
    if shift == 0:
        return problem
    return ShiftedProblem(problem, shift)


def compute_mu0(n, p, kind="secondorder"):
    """Critical weight: data in the trace space of order mu0 embed into C^1 (resp. C^2)."""
    if kind == "secondorder":
        if not p > n + 2:
            raise ParameterOutOfRange(f"second-order problems need p > n + 2 = {n + 2}, got p = {p}")
        return 0.5 + (n + 2) / (2.0 * p)
    if kind == "mullins_sekerka":
        if not p > (n + 3) / 2.0:
            raise ParameterOutOfRange(f"Mullins-Sekerka needs p > (n + 3)/2 = {(n + 3) / 2}, got p = {p}")
        return 1.0 / 3.0 + (n + 3) / (3.0 * p)
    raise ValueError(f"unknown problem kind {kind!r}")


def check_weight(mu, mu0):
    if not (mu0 < mu <= 1.0):
        raise ParameterOutOfRange(f"mu = {mu} must lie in (mu0, 1] = ({mu0:.6g}, 1]")


@dataclass
class ContractionDiagnostics:
    kappa: float                 # largest ratio of successive Picard increments
    lip_A: float                 # sup |A(u)u - A(w)u|_X0 / (|u - w|_Xgm |u|_X1)
    lip_F: float                 # sup |F(u) - F(w)|_X0 / |u - w|_Xgm
    c_hat: float                 # 1 / (1 - kappa), the Banach bound on data dependence
    T: float
    radius: float                # E_1 distance of the fixed point from the reference solution
    ball: float                  # sup_t |u(t) - u(0)|_Xgm
    iterations: int
    halvings: int
    increments: List[float] = field(default_factory=list)


@dataclass
class WindowResult:
    times: np.ndarray
    states: np.ndarray
    grid: WeightedGrid
    diagnostics: ContractionDiagnostics


def _solvers(problem, u0, grid):
    cache = {}
    out = []
    for dt in grid.steps:
        key = round(float(dt), 15)
        if key not in cache:
            cache[key] = problem.linear_solver(u0, dt)
        out.append(cache[key])
    return out


def reference_solution(problem, u0, grid, solvers=None):
    """Backward Euler for w' + A(u0)w = 0, w(0) = u0."""
    solvers = solvers or _solvers(problem, u0, grid)
    w = np.empty((grid.n_steps + 1, problem.dim))
    w[0] = u0
    for j, solve in enumerate(solvers):
        w[j + 1] = solve(w[j])
    return w


def picard_map(problem, u0, v, grid, solvers=None):
    """One application of the frozen-coefficient map: v -> u with
    (u_{j+1} - u_j)/dt + A(u0)u_{j+1} = F(v_{j+1}) + (A(u0) - A(v_{j+1}))v_{j+1}."""
    solvers = solvers or _solvers(problem, u0, grid)
    u = np.empty_like(v)
    u[0] = u0
    for j, (dt, solve) in enumerate(zip(grid.steps, solvers)):
        vj = v[j + 1]
        rhs = problem.apply_F(vj) + problem.apply_A(u0, vj) - problem.apply_A(vj, vj)
        u[j + 1] = solve(u[j] + dt * rhs)
    return u


def _one_window(problem, u0, grid, tol, max_iter):
    norms = problem.norms
    solvers = _solvers(problem, u0, grid)
    ref = reference_solution(problem, u0, grid, solvers)
    v = ref
    increments = []
    kappa = 0.0
    for it in range(1, max_iter + 1):
        for state in v[1:]:
            problem.check_state(state)
        u = picard_map(problem, u0, v, grid, solvers)
        if not np.all(np.isfinite(u)):
            return None, increments, np.inf
        inc = norms.e1(u - v, grid)
        increments.append(inc)
        if len(increments) >= 2 and increments[-2] > 0:
            kappa = max(kappa, inc / increments[-2])
        scale = max(1.0, norms.e1(u, grid))
        v = u
        if inc <= tol * scale:
            for state in u[1:]:
                problem.check_state(state)
            return u, increments, kappa
        if kappa >= 1.0 and len(increments) >= 3:
            return None, increments, kappa
    return None, increments, max(kappa, 1.0)


def picard_window(problem: QuasilinearProblem, u1, grid: WeightedGrid, tol=1e-10, max_iter=60,
                  halve=True) -> WindowResult:
    """Fixed point of the frozen-coefficient map on [0, T].

    Starts from the reference solution; on failure to contract the window is
    halved (up to 20 times) before NoContraction is raised.
    """
    u1 = np.asarray(u1, dtype=float)
    problem.check_state(u1)
    halvings = 0
    history = []
    while True:
        traj, increments, kappa = _one_window(problem, u1, grid, tol, max_iter)
        history.append((grid.T, kappa))
        if traj is not None:
            break
        if not halve or halvings >= MAX_HALVINGS:
            raise NoContraction(
                f"no contraction on a window of length {grid.T:.3e} (kappa = {kappa:.3g})",
                diagnostics={"history": history, "increments": increments},
            )
        grid = grid.halved()
        halvings += 1
    return WindowResult(grid.nodes, traj, grid, _diagnostics(problem, traj, grid, increments, kappa, halvings))


def _diagnostics(problem, u, grid, increments, kappa, halvings):
    norms = problem.norms
    ref = reference_solution(problem, u[0], grid)
    lip_A = lip_F = 0.0
    for uj, wj in zip(u[1:], ref[1:]):
        d = norms.xgm(uj - wj)
        if d <= 1e-14 * max(1.0, norms.xgm(uj)):
            continue
        da = norms.x0(problem.apply_A(uj, uj) - problem.apply_A(wj, uj))
        lip_A = max(lip_A, da / (d * max(norms.x1(uj), 1e-300)))
        lip_F = max(lip_F, norms.x0(problem.apply_F(uj) - problem.apply_F(wj)) / d)
    ball = max(norms.xgm(uj - u[0]) for uj in u)
    return ContractionDiagnostics(
        kappa=float(kappa),
        lip_A=float(lip_A),
        lip_F=float(lip_F),
        c_hat=float(1.0 / (1.0 - kappa)) if kappa < 1 else float("inf"),
        T=float(grid.T),
        radius=float(norms.e1(u - ref, grid)),
        ball=float(ball),
        iterations=len(increments),
        halvings=halvings,
        increments=[float(x) for x in increments],
    )


@dataclass
class ContinuationResult:
    times: np.ndarray
    states: np.ndarray
    status: str                     # "horizon" or "breakdown"
    t_last: float
    windows: List[ContractionDiagnostics]
    cause: Optional[str] = None


def continue_solution(problem: QuasilinearProblem, u0, horizon, window, n_steps=20, tol=1e-10,
                      blowup=1e3, max_windows=100000, q=None) -> ContinuationResult:
    """Glue Picard windows until ``horizon``.

    The first window uses the graded weighted grid of the problem's norm
    suite (grading exponent ``q``, default from mu and p); later windows
    start from smooth data and use uniform grids.
    A window that cannot be made to contract, or a state whose sup norm
    exceeds ``blowup``, ends the run with FiniteTimeBreakdown carrying the
    partial result.
    """
    u0 = np.asarray(u0, dtype=float)
    norms = problem.norms
    times, states, diags = [0.0], [u0], []
    t = 0.0
    first = True
    while t < horizon * (1 - 1e-12) and len(diags) < max_windows:
        T = min(window, horizon - t)
        if first:
            grid = WeightedGrid(T, n_steps, norms.mu, norms.p, q)
        else:
            grid = WeightedGrid.uniform(T, n_steps, norms.p)
        try:
            res = picard_window(problem, states[-1], grid, tol)
        except NoContraction as exc:
            _raise_breakdown(times, states, diags, f"no contraction: {exc}")
        except (ConstraintViolation, NonPositiveCoefficient) as exc:
            _raise_breakdown(times, states, diags, f"constraint: {exc}")
        first = False
        diags.append(res.diagnostics)
        for tj, uj in zip(res.times[1:], res.states[1:]):
            times.append(t + tj)
            states.append(uj)
            if np.max(np.abs(uj)) > blowup:
                _raise_breakdown(times, states, diags, f"sup norm exceeded {blowup:g}")
        t += res.grid.T
        if res.grid.T < T:
            window = res.grid.T
    return ContinuationResult(np.array(times), np.array(states), "horizon", t, diags)


def _raise_breakdown(times, states, diags, cause):
    partial = ContinuationResult(np.array(times), np.array(states), "breakdown", times[-1], diags, cause)
    raise FiniteTimeBreakdown(f"breakdown at t = {times[-1]:.6g}: {cause}", times[-1], cause, partial)


def march_semi_implicit(problem: QuasilinearProblem, u0, times, callback=None):
    """(u^{n+1} - u^n)/dt + A(u^n)u^{n+1} = F(u^n) on the given time nodes."""
    times = np.asarray(times, dtype=float)
    u = np.asarray(u0, dtype=float)
    out = [u]
    for n, dt in enumerate(np.diff(times)):
        problem.check_state(u)
        u = problem.linear_solve(u, dt, u + dt * problem.apply_F(u))
        out.append(u)
        if callback is not None:
            callback(times[n + 1], u)
    return np.array(out)
