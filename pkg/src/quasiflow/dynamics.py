"""Driving the flow and analysing where it goes.

Evolution with monitors (perimeter, area, ball radius, residual, trace-norm
proxy, tube margin, Dirichlet energy), re-centering of the reference circle,
Ljapunov bookkeeping, circle fits, rate fits and linearization at circles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import least_squares

from .elliptic import concentric_jump_eigenvalue, dirichlet_energy
from .errors import (
    BallConditionBreach,
    ConstraintViolation,
    FiniteTimeBreakdown,
    NonPositiveSeries,
    NormBlowup,
    NotAnEquilibrium,
    QuasiflowError,
)
from .geometry import CircleSpec, Container, ReferenceCurve, bundle_distance, build_reference_curve
from .hanzawa import HEIGHT_MARGIN, realize_interface, reparameterize
from .models import MsProblem, MsState, offset_circle_heights
from .stepper import QuasilinearProblem, WeightedGrid, continue_solution, march_semi_implicit, picard_window

CHANNELS = ("perimeter", "area", "residual", "ball_radius", "eta", "xgamma_norm", "energy")


@dataclass
class Thresholds:
    norm_max: float = 1e3        # M: bound on the trace-norm proxy
    ball_min: float = 0.05       # r: smallest admissible ball radius
    eta_fraction: float = 0.05   # eta floor as a fraction of the tube half-width


def dispersion_eigenvalue(k, radius, wall_radius):
    """Decay rate of mode k for a circle of given radius centred in a disk."""
    return -concentric_jump_eigenvalue(k, radius, wall_radius) * (k * k - 1) / radius**2


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    states: list = field(default_factory=list)       # HeightField (MS) or arrays (1D)
    channels: dict = field(default_factory=lambda: {c: [] for c in CHANNELS})
    events: list = field(default_factory=list)       # (t, description)
    status: str = "running"                          # horizon | breakdown
    cause: Optional[str] = None
    container: Optional[Container] = None

    def record(self, t, state, values):
        if self.times and not t > self.times[-1]:
            raise ValueError("trajectory times must increase strictly")
        self.times.append(float(t))
        self.states.append(state)
        for c in CHANNELS:
            self.channels[c].append(float(values.get(c, np.nan)))

    def channel(self, name):
        return np.asarray(self.channels[name])

    @property
    def t(self):
        return np.asarray(self.times)

    @property
    def t_last(self):
        return self.times[-1] if self.times else 0.0

    def interface(self, i=-1) -> ReferenceCurve:
        return realize_interface(self.states[i], check=False)


def ms_monitors(state: MsState, problem: Optional[MsProblem] = None):
    gamma = state.interface
    tube = gamma.tube
    values = {
        "perimeter": gamma.length,
        "area": gamma.area,
        # normal velocity, not height velocity: it does not change when the chart is re-centred
        "residual": float(np.max(np.abs(state.normal_velocity))),
        "ball_radius": tube.r_ball,
        "eta": state.sigma.tube.a - state.rho.sup,
        "energy": dirichlet_energy(state.solution),
    }
    if problem is not None:
        values["xgamma_norm"] = problem.norms.xg(state.rho.values)
    return values


def maybe_reparameterize(state: MsState, margin=HEIGHT_MARGIN) -> MsState:
    """Re-centre the reference circle when the heights leave the comfort zone."""
    if state.rho.within_margin(margin):
        return state
    gamma = state.interface
    fit = fit_equilibrium(gamma)
    sigma = build_reference_curve(CircleSpec(fit.radius, tuple(fit.center)), state.container, state.sigma.n)
    rho = reparameterize(gamma, sigma, margin=1.0)
    return MsState(rho, state.container)


def _ms_step_semi(problem, v, dt):
    return problem.linear_solve(v, dt, v + dt * problem.apply_F(v))


def evolve(initial, horizon, dt, mode="semi_implicit", thresholds: Optional[Thresholds] = None,
           problem: Optional[QuasilinearProblem] = None, p=6.0, mu=None, window_steps=20,
           picard_tol=1e-10, record_every=1, raise_on_breakdown=False, q=None) -> Trajectory:
    """Run the flow from ``initial`` up to ``horizon``.

    ``initial`` is an MsState, or an initial vector together with a 1D
    ``problem``.  In semi-implicit mode each step solves
    (I + dt A(u^n)) u^{n+1} = u^n + dt F(u^n); in picard mode windows of
    ``window_steps`` steps are solved by the contraction construction (the
    first on the graded grid with exponent ``q``).  Monitor breaches end the run with status
    "breakdown"; with ``raise_on_breakdown`` a FiniteTimeBreakdown carrying
    the partial trajectory is raised instead.
    """
    thresholds = thresholds or Thresholds()
    if isinstance(initial, MsState):
        traj = _evolve_ms(initial, horizon, dt, mode, thresholds, p, mu, window_steps, picard_tol, record_every, q)
    else:
        traj = _evolve_vector(problem, np.asarray(initial, dtype=float), horizon, dt, mode, thresholds,
                              window_steps, picard_tol, q)
    if traj.status == "breakdown" and raise_on_breakdown:
        raise FiniteTimeBreakdown(f"breakdown at t = {traj.t_last:.6g}: {traj.cause}", traj.t_last, traj.cause, traj)
    return traj


def _check_monitors(values, sigma_a, thresholds):
    if not np.isfinite(values["residual"]):
        raise NormBlowup("velocity is not finite")
    if values.get("xgamma_norm", 0.0) > thresholds.norm_max:
        raise NormBlowup(f"trace-norm proxy {values['xgamma_norm']:.3e} exceeds {thresholds.norm_max:g}")
    if values["ball_radius"] < thresholds.ball_min:
        raise BallConditionBreach(f"ball radius {values['ball_radius']:.3e} below {thresholds.ball_min:g}")
    if values["eta"] < thresholds.eta_fraction * sigma_a:
        raise ConstraintViolation(f"tube margin {values['eta']:.3e} below {thresholds.eta_fraction}*a")


def _evolve_ms(state, horizon, dt, mode, thresholds, p, mu, window_steps, tol, record_every, q):
    traj = Trajectory(container=state.container)
    problem = MsProblem(state.sigma, state.container, p, mu)
    t = 0.0
    n_steps = max(1, int(round(horizon / dt)))
    dt = horizon / n_steps
    step = 0
    first_window = True
    try:
        values = ms_monitors(state, problem)
        _check_monitors(values, state.sigma.tube.a, thresholds)
        traj.record(t, state.rho, values)
        while step < n_steps:
            if mode == "semi_implicit":
                new = [(t + dt, _ms_step_semi(problem, state.rho.values, dt))]
            elif mode == "picard":
                m = min(window_steps, n_steps - step)
                if first_window:
                    grid = problem.norms.grid(m * dt, m, q)
                else:
                    grid = WeightedGrid.uniform(m * dt, m, problem.norms.p)
                res = picard_window(problem, state.rho.values, grid, tol, halve=False)
                first_window = False
                new = list(zip(t + res.times[1:], res.states[1:]))
            else:
                raise ValueError(f"unknown mode {mode!r}")
            for tk, v in new:
                step += 1
                state = state.with_heights(v)
                if step % record_every == 0 or step == n_steps:
                    values = ms_monitors(state, problem)
                    _check_monitors(values, state.sigma.tube.a, thresholds)
                    traj.record(tk, state.rho, values)
            t = step * dt
            moved = maybe_reparameterize(state)
            if moved is not state:
                traj.events.append((t, f"reparameterized: new centre ({moved.sigma.circle[0]:.6g}, "
                                       f"{moved.sigma.circle[1]:.6g}), radius {moved.sigma.circle[2]:.6g}"))
                state = moved
                problem = MsProblem(state.sigma, state.container, p, mu)
        traj.status = "horizon"
    except (QuasiflowError, np.linalg.LinAlgError) as exc:
        traj.status = "breakdown"
        traj.cause = f"{type(exc).__name__}: {exc}"
    return traj


def _evolve_vector(problem, u0, horizon, dt, mode, thresholds, window_steps, tol, q):
    if problem is None:
        raise ValueError("a vector initial state needs a problem")
    traj = Trajectory()
    norms = problem.norms

    def values(u):
        return {"residual": float(np.max(np.abs(problem.vector_field(u)))), "xgamma_norm": norms.xg(u)}

    try:
        if mode == "picard":
            try:
                res = continue_solution(problem, u0, horizon, window_steps * dt, window_steps, tol,
                                        blowup=thresholds.norm_max, q=q)
            except FiniteTimeBreakdown as exc:
                res = exc.partial
                traj.cause = exc.cause
            times, states = res.times, res.states
        elif mode == "semi_implicit":
            n = max(1, int(round(horizon / dt)))
            times = np.linspace(0.0, horizon, n + 1)
            states = march_semi_implicit(problem, u0, times)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        for t, u in zip(times, states):
            traj.record(t, u, values(u))
            if np.max(np.abs(u)) > thresholds.norm_max:
                raise NormBlowup(f"sup norm exceeds {thresholds.norm_max:g}")
        traj.status = "breakdown" if traj.cause else "horizon"
    except (QuasiflowError, np.linalg.LinAlgError) as exc:
        traj.status = "breakdown"
        traj.cause = f"{type(exc).__name__}: {exc}"
    return traj


# --------------------------------------------------------------------------- Ljapunov

@dataclass
class LjapunovTrace:
    times: np.ndarray
    perimeter: np.ndarray
    max_increase: float
    nonincreasing: bool
    rate: np.ndarray          # forward differences of the perimeter
    dissipation: np.ndarray   # -(Dirichlet energy), averaged over each step
    consistency: float        # max |rate - dissipation|


def ljapunov_trace(traj: Trajectory, tol=1e-8) -> LjapunovTrace:
    t = traj.t
    phi = traj.channel("perimeter")
    energy = traj.channel("energy")
    dphi = np.diff(phi)
    rate = dphi / np.diff(t)
    diss = -0.5 * (energy[1:] + energy[:-1])
    inc = float(dphi.max()) if dphi.size else 0.0
    return LjapunovTrace(
        times=t,
        perimeter=phi,
        max_increase=inc,
        nonincreasing=bool(inc <= tol),
        rate=rate,
        dissipation=diss,
        consistency=float(np.max(np.abs(rate - diss))) if rate.size else 0.0,
    )


# --------------------------------------------------------------------------- circle fits

@dataclass(frozen=True)
class EquilibriumFit:
    center: np.ndarray
    radius: float
    residual: float

    def curve(self, n=128, container=None) -> ReferenceCurve:
        return build_reference_curve(CircleSpec(self.radius, tuple(self.center)), container, n, check=False)

    @property
    def area(self):
        return np.pi * self.radius**2


def fit_equilibrium(gamma: ReferenceCurve) -> EquilibriumFit:
    """Least-squares circle through the nodes: algebraic start, geometric refinement."""
    x, y = gamma.xy[:, 0], gamma.xy[:, 1]
    lhs = np.column_stack([x, y, np.ones_like(x)])
    sol, *_ = np.linalg.lstsq(lhs, x * x + y * y, rcond=None)
    c0 = 0.5 * sol[:2]
    r0 = np.sqrt(sol[2] + c0 @ c0)

    def resid(z):
        return np.hypot(x - z[0], y - z[1]) - z[2]

    out = least_squares(resid, np.array([c0[0], c0[1], r0]), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    z = out.x
    return EquilibriumFit(np.array(z[:2]), float(z[2]), float(np.max(np.abs(resid(z)))))


# --------------------------------------------------------------------------- rates

@dataclass(frozen=True)
class RateFit:
    rate: float
    quality: float
    converging: bool
    n_points: int


def exponential_rate(times, values, last_decade=True, min_points=10) -> RateFit:
    """Least-squares slope of log d(t); quality is the coefficient of determination.

    With ``last_decade`` only the samples within a factor 10 of the final
    value enter the fit.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(values, dtype=float)
    if np.any(~(d > 0)):
        raise NonPositiveSeries("distance series must be strictly positive on the fit window")
    if last_decade:
        keep = np.zeros(d.size, dtype=bool)
        i = d.size - 1
        while i >= 0 and d[i] <= 10.0 * d[-1]:
            keep[i] = True
            i -= 1
        if keep.sum() < min_points:
            keep[-min_points:] = True
        t, d = t[keep], d[keep]
    if t.size < min_points:
        raise ValueError(f"need at least {min_points} samples, got {t.size}")
    y = np.log(d)
    slope, icpt = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    quality = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    rate = -float(slope) if ss_tot > 0 else 0.0
    span = t[-1] - t[0]
    converging = bool(rate * span > 1e-9 and quality >= 0.9)
    return RateFit(rate, float(quality), converging, int(t.size))


def dominant_mode(values, k_min=2):
    c = np.abs(np.fft.rfft(np.asarray(values)))
    c[:k_min] = 0.0
    return int(np.argmax(c))


# --------------------------------------------------------------------------- linearization

@dataclass
class LinearizationReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray            # sorted by real part
    mode_eigenvalues: dict             # k -> eigenvalues of the (cos k, sin k) block
    kernel_candidates: dict            # name -> |A0 e| / |A0|
    kernel_dim: int
    leakage: float                     # off-block mass relative to |A0|
    verdict: str                       # normally-stable | not-normally-stable
    residual: float
    modes: int


def mode_basis(theta, K):
    cols = [np.ones_like(theta)]
    for k in range(1, K + 1):
        cols += [np.cos(k * theta), np.sin(k * theta)]
    return np.column_stack(cols)


def linearize_at(state: MsState, h=1e-5, K=None, kernel_tol=1e-6, candidate_tol=1e-4) -> LinearizationReport:
    """Central differences of the negated vector field along Fourier modes 0..K."""
    residual = float(np.max(np.abs(state.velocity)))
    if residual >= 1e-6:
        raise NotAnEquilibrium(f"equilibrium residual {residual:.3e} is not below 1e-6")
    n = state.sigma.n
    K = n // 4 if K is None else K
    basis = mode_basis(state.sigma.theta, K)
    pinv = np.linalg.pinv(basis)
    rho0 = state.rho.values
    dim = basis.shape[1]
    A0 = np.empty((dim, dim))
    for j in range(dim):
        plus = state.with_heights(rho0 + h * basis[:, j]).velocity
        minus = state.with_heights(rho0 - h * basis[:, j]).velocity
        A0[:, j] = -pinv @ ((plus - minus) / (2.0 * h))
    eig = np.linalg.eigvals(A0)
    eig = eig[np.argsort(eig.real, kind="stable")]
    norm = float(np.linalg.norm(A0, 2))
    spectral_radius = float(np.max(np.abs(eig)))
    kernel_dim = int(np.sum(np.abs(eig) < kernel_tol * spectral_radius))

    blocks = {0: np.array([A0[0, 0]])}
    mask = np.zeros_like(A0, dtype=bool)
    mask[0, 0] = True
    for k in range(1, K + 1):
        sl = slice(2 * k - 1, 2 * k + 1)
        blocks[k] = np.sort_complex(np.linalg.eigvals(A0[sl, sl]))
        mask[sl, sl] = True
    leakage = float(np.linalg.norm(np.where(mask, 0.0, A0)) / np.linalg.norm(A0))

    candidates = {}
    for name, vec in _tangent_fields(state, basis, pinv).items():
        candidates[name] = float(np.linalg.norm(A0 @ vec) / (norm * np.linalg.norm(vec)))
    others = np.abs(eig) >= kernel_tol * spectral_radius
    stable = (
        kernel_dim == 3
        and all(v <= candidate_tol for v in candidates.values())
        and bool(np.all(eig[others].real > 0))
    )
    return LinearizationReport(
        matrix=A0,
        eigenvalues=eig,
        mode_eigenvalues=blocks,
        kernel_candidates=candidates,
        kernel_dim=kernel_dim,
        leakage=leakage,
        verdict="normally-stable" if stable else "not-normally-stable",
        residual=residual,
        modes=K,
    )


def _tangent_fields(state, basis, pinv, step=1e-6):
    """Mode coordinates of d(heights)/d(centre x, centre y, radius) along the circle family."""
    fit = fit_equilibrium(state.interface)
    sigma = state.sigma
    out = {}
    names = ("centre_x", "centre_y", "radius")
    for i, name in enumerate(names):
        e = np.zeros(3)
        e[i] = step
        z = np.array([fit.center[0], fit.center[1], fit.radius])
        zp, zm = z + e, z - e
        hp = offset_circle_heights(sigma, zp[:2], zp[2])
        hm = offset_circle_heights(sigma, zm[:2], zm[2])
        out[name] = pinv @ ((hp - hm) / (2.0 * step))
    return out


# --------------------------------------------------------------------------- omega limit

@dataclass
class OmegaLimitReport:
    fit: Optional[EquilibriumFit]
    rate: Optional[RateFit]
    distances: np.ndarray
    times: np.ndarray
    verdict: str                 # converged | in-progress | non-convergent
    cause: Optional[str] = None


def distance_series(traj: Trajectory, limit: ReferenceCurve, order=2, stride=1):
    idx = np.arange(0, len(traj.times), stride)
    if idx[-1] != len(traj.times) - 1:
        idx = np.append(idx, len(traj.times) - 1)
    d = np.array([bundle_distance(traj.interface(i), limit, order) for i in idx])
    return traj.t[idx], d


def omega_limit_report(traj: Trajectory, tol=1e-6, stride=1, floor=1e-11) -> OmegaLimitReport:
    if traj.status != "horizon" or not traj.states:
        return OmegaLimitReport(None, None, np.array([]), np.array([]), "non-convergent", traj.cause)
    gamma = traj.interface()
    fit = fit_equilibrium(gamma)
    limit = fit.curve(max(64, gamma.n), traj.container)
    times, dist = distance_series(traj, limit, 2, stride)
    keep = dist > floor
    rate = None
    if keep.sum() >= 10:
        try:
            rate = exponential_rate(times[keep], dist[keep])
        except (NonPositiveSeries, ValueError):
            rate = None
    if fit.residual <= tol:
        verdict = "converged"
    elif rate is not None and rate.converging:
        verdict = "in-progress"
    else:
        verdict = "non-convergent"
    return OmegaLimitReport(fit, rate, dist, times, verdict)
