"""Self-check suites run by ``quasiflow verify``.

Every check compares a computed number with a closed form or an invariant
and a fixed tolerance.  Reports contain no timings, so reruns with the same
seed are byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .dynamics import (
    dispersion_eigenvalue,
    exponential_rate,
    fit_equilibrium,
    linearize_at,
    maybe_reparameterize,
)
from .elliptic import TwoPhaseOperator, concentric_jump_eigenvalue, dirichlet_energy, solve_two_phase
from .errors import FiniteTimeBreakdown
from .geometry import (
    CircleSpec,
    Container,
    EllipseSpec,
    FourierSpec,
    bundle_distance,
    build_reference_curve,
    signed_distance_project,
)
from .hanzawa import realize_interface, reparameterize
from .models import make_second_order, ms_state, offset_circle_heights
from .stepper import (
    ConstantProblem,
    WeightedGrid,
    compute_mu0,
    continue_solution,
    picard_window,
    sigma_factor,
    spectral_shift,
    weighted_norm,
)

SUITES = ("geometry", "elliptic", "stepper", "dynamics")


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


def _check(name, error, tol):
    error = float(error)
    return Check(name, error, tol, bool(np.isfinite(error) and error <= tol))


def _rel(a, b):
    return abs(a - b) / abs(b)


# --------------------------------------------------------------------------- geometry

def geometry_checks(seed) -> List[Check]:
    out = []
    c = build_reference_curve(CircleSpec(0.4), n=64)
    out.append(_check("circle R=0.4 curvature = 2.5", np.max(np.abs(c.curvature - 2.5)), 1e-10))
    out.append(_check("circle R=0.4 tube half-width = 0.36", abs(c.tube.a - 0.36), 1e-10))
    e = build_reference_curve(EllipseSpec(0.5, 0.4), n=128)
    out.append(_check("ellipse (0.5, 0.4) tube half-width = 0.288", abs(e.tube.a - 0.288), 1e-8))
    out.append(_check("Gauss-Bonnet on ellipse", abs(np.sum(e.curvature * e.weights) - 2 * np.pi), 1e-10))
    rng = np.random.default_rng(seed)
    star = build_reference_curve(
        FourierSpec(cos=(0.45, 0.03 * rng.uniform(-1, 1), 0.02 * rng.uniform(-1, 1)),
                    sin=(0.0, 0.03 * rng.uniform(-1, 1), 0.02 * rng.uniform(-1, 1))), n=128)
    out.append(_check("Gauss-Bonnet on random star", abs(np.sum(star.curvature * star.weights) - 2 * np.pi), 1e-10))
    half = build_reference_curve(CircleSpec(0.5), n=64)
    proj = signed_distance_project(half, np.array([0.8, 0.0]))
    out.append(_check("projection of (0.8, 0) onto R=0.5 circle: d = 0.3", abs(proj.d - 0.3), 1e-12))
    d = rng.uniform(-0.9, 0.9, 32) * e.tube.a
    th = rng.uniform(0, 2 * np.pi, 32)
    pts = e.point(th) + d[:, None] * e.normal_at(th)
    back = signed_distance_project(e, pts)
    out.append(_check("tube coordinates round trip", np.max(np.abs(back.d - d)), 1e-10))
    inner = build_reference_curve(CircleSpec(0.4), n=64)
    out.append(_check("bundle distance of concentric circles 0.4/0.5", abs(bundle_distance(inner, half) - 0.1), 1e-10))
    offset = build_reference_curve(CircleSpec(0.5, (0.05, 0.0)), n=64)
    rho = reparameterize(offset, half)
    exact = offset_circle_heights(half, (0.05, 0.0), 0.5)
    out.append(_check("height of offset circle matches closed form", np.max(np.abs(rho.values - exact)), 1e-12))
    again = realize_interface(rho)
    out.append(_check("height round trip reproduces the interface",
                      np.max(np.abs(again.xy - offset.point(signed_distance_project(offset, again.xy).theta))), 1e-12))
    return out


# --------------------------------------------------------------------------- elliptic

def elliptic_checks(seed) -> List[Check]:
    out = []
    container = Container()
    errs = {n: concentric_error(n) for n in (16, 32, 64, 256)}
    out.append(_check("concentric jump = -128/17 cos 2theta at N=256", errs[256], 1e-8))
    ratio = max(errs[2 * n] / errs[n] for n in (16, 32) if errs[n] > 1e-11)
    out.append(_check("N-doubling shrinks the concentric error tenfold", ratio, 0.1))
    g = build_reference_curve(CircleSpec(0.5), n=64)
    op = TwoPhaseOperator(g, container)
    sol = op.solve(np.cos(2 * g.theta))
    out.append(_check("Dirichlet energy = 64 pi/17", _rel(dirichlet_energy(sol), 64 * np.pi / 17), 1e-10))
    out.append(_check("constant data gives zero jump", np.max(np.abs(op.solve(np.ones(g.n)).jump)), 1e-10))
    rng = np.random.default_rng(seed)
    star = build_reference_curve(
        FourierSpec(cos=(0.45, 0.04 * rng.uniform(-1, 1), 0.03 * rng.uniform(-1, 1), 0.02 * rng.uniform(-1, 1)),
                    sin=(0.0, 0.04 * rng.uniform(-1, 1), 0.03 * rng.uniform(-1, 1), 0.02 * rng.uniform(-1, 1))),
        n=128)
    data = sum(rng.normal() * np.cos(k * star.theta) + rng.normal() * np.sin(k * star.theta) for k in range(1, 6))
    s = solve_two_phase(container, star, data)
    out.append(_check("compatibility: flux of the jump vanishes",
                      abs(np.sum(s.jump * star.weights)) / np.max(np.abs(data)), 1e-9))
    m = op.dtn_matrix
    basis = np.column_stack([np.cos(k * g.theta) for k in range(1, 17)] + [np.sin(k * g.theta) for k in range(1, 17)])
    coef = np.linalg.lstsq(basis, m @ basis, rcond=None)[0]
    off = coef - np.diag(np.diag(coef))
    out.append(_check("DtN jump matrix is Fourier-diagonal on circles", np.max(np.abs(off)) / np.max(np.abs(coef)), 1e-8))
    jks = [concentric_jump_eigenvalue(k, 0.5, 1.0) for k in range(1, 17)]
    out.append(_check("computed jump eigenvalues negative for 1 <= k <= N/4",
                      max(0.0, max(coef[k, k] for k in range(16))), 0.0))
    out.append(_check("jump eigenvalues match series for 1 <= k <= N/4",
                      max(_rel(coef[k - 1, k - 1], jks[k - 1]) for k in range(1, 17)), 1e-8))
    return out


def concentric_error(n, radius=0.5, wall_radius=1.0, k=2):
    """Relative error of the computed jump for g = cos(k theta) on concentric circles."""
    g = build_reference_curve(CircleSpec(radius), n=n)
    jump = solve_two_phase(Container(wall_radius), g, np.cos(k * g.theta), n_outer=n).jump
    exact = concentric_jump_eigenvalue(k, radius, wall_radius)
    return float(np.max(np.abs(jump - exact * np.cos(k * g.theta))) / abs(exact))


# --------------------------------------------------------------------------- stepper

def stepper_checks(seed) -> List[Check]:
    out = []
    out.append(_check("sigma(1; p=2, mu=3/4) = 1/sqrt(1.5)", abs(sigma_factor(1.0, 2.0, 0.75) - 1 / np.sqrt(1.5)), 1e-15))
    grid = WeightedGrid(1.0, 2000, 0.75, 2.0)
    t = grid.nodes
    sing = np.concatenate([[np.inf], t[1:] ** -0.25])
    out.append(_check("weighted norm of t^(-1/4), p=2, mu=3/4", abs(weighted_norm(sing, grid) - 1.0), 1e-5))
    g2 = WeightedGrid(2.0, 10, 0.7, 3.0)
    out.append(_check("weighted norm of 1 equals sigma(T)",
                      _rel(weighted_norm(np.ones(11), g2), sigma_factor(2.0, 3.0, 0.7)), 1e-13))
    out.append(_check("mu0 second order n=1 p=4 is 7/8", abs(compute_mu0(1, 4, "secondorder") - 7 / 8), 0.0))
    out.append(_check("mu0 Mullins-Sekerka n=2 p=6 is 11/18",
                      abs(compute_mu0(2, 6, "mullins_sekerka") - 11 / 18), 1e-15))
    heat = make_second_order(lambda u, ux: 1.0, None, m=63)
    u0 = np.sin(np.pi * heat.x)
    errs = []
    for n in (50, 100):
        res = picard_window(heat, u0, WeightedGrid.uniform(0.1, n, 4.0))
        errs.append(np.max(np.abs(res.states[-1] - np.exp(-np.pi**2 * 0.1) * u0)))
    out.append(_check("heat decay error halves with dt (first order)", abs(errs[1] / errs[0] - 0.5), 0.05))
    lin = ConstantProblem(np.array([[2.0, -1.0], [-1.0, 2.0]]), np.array([1.0, 0.5]))
    res = picard_window(lin, np.array([1.0, -1.0]), WeightedGrid.uniform(1.0, 10))
    out.append(_check("linear problem: second Picard increment vanishes", res.diagnostics.increments[1], 0.0))
    r_plain = picard_window(heat, u0, WeightedGrid.uniform(0.05, 10, 4.0), tol=1e-13)
    r_shift = picard_window(spectral_shift(heat, 1.0), u0, WeightedGrid.uniform(0.05, 10, 4.0), tol=1e-13)
    out.append(_check("spectral shift leaves the trajectory unchanged",
                      np.max(np.abs(r_plain.states - r_shift.states)), 1e-8))
    nl = make_second_order(lambda u, ux: 1.0 + u * u, None, m=63)
    data = 0.1 * np.sin(np.pi * nl.x) + 0.5 * np.sin(2 * np.pi * nl.x)
    kappas = [picard_window(nl, data, nl.norms.grid(T, 20)).diagnostics.kappa for T in (0.2, 0.1, 0.05)]
    out.append(_check("contraction factor below 1 and shrinking as T halves",
                      0.0 if (kappas[0] < 1 and kappas[0] > kappas[1] > kappas[2]) else 1.0, 0.0))
    react = make_second_order(lambda u, ux: 1.0, lambda u, ux: u * u, m=31)
    try:
        continue_solution(react, 50.0 * np.ones(31), 1.0, 0.005, 20, blowup=1e3)
        t_break = np.inf
    except FiniteTimeBreakdown as exc:
        t_break = exc.t_last
    out.append(_check("reaction blowup time within 20% of 1/u0", _rel(t_break, 0.02), 0.2))
    return out


# --------------------------------------------------------------------------- dynamics

def dynamics_checks(seed) -> List[Check]:
    out = []
    sigma = build_reference_curve(CircleSpec(0.5), n=64)
    rep = linearize_at(ms_state(sigma))
    out.append(_check("mode-2 eigenvalue = 1536/17", _rel(rep.mode_eigenvalues[2].real.mean(), 1536 / 17), 0.01))
    worst = max(_rel(rep.mode_eigenvalues[k].real.max(), dispersion_eigenvalue(k, 0.5, 1.0)) for k in range(2, 17))
    out.append(_check("modes 2..16 match the dispersion relation", worst, 0.02))
    out.append(_check("kernel dimension is 3", abs(rep.kernel_dim - 3), 0))
    out.append(_check("kernel residuals for translations and dilation",
                      max(rep.kernel_candidates.values()), 1e-4))
    out.append(_check("linearization block-diagonal over modes", rep.leakage, 1e-6))
    eps = 1e-4
    st = ms_state(sigma, eps * np.cos(2 * sigma.theta))
    out.append(_check("mode-2 velocity = -(1536/17) rho",
                      np.max(np.abs(st.velocity + 1536 / 17 * st.rho.values)) / (1536 / 17 * eps), 0.01))
    off = ms_state(sigma, offset_circle_heights(sigma, (0.04, -0.03), 0.5))
    out.append(_check("offset circle is an equilibrium", np.max(np.abs(off.velocity)), 1e-8))
    out.append(_check("enclosed area rate vanishes",
                      abs(np.sum(st.normal_velocity * st.interface.weights)) / st.interface.length, 1e-9))
    out.append(_check("circle fit residual on exact circle", fit_equilibrium(sigma).residual, 1e-10))
    out.append(_check("ellipse circle-fit residual >= 0.04",
                      max(0.0, 0.04 - fit_equilibrium(build_reference_curve(EllipseSpec(0.5, 0.4), n=128)).residual), 0.0))
    t = np.linspace(0, 2, 50)
    fit = exponential_rate(t, 3 * np.exp(-2 * t), last_decade=False)
    out.append(_check("synthetic rate 2 recovered", abs(fit.rate - 2.0) + abs(1 - fit.quality), 1e-10))
    drift = ms_state(sigma, offset_circle_heights(sigma, (0.31 * sigma.tube.a, 0.0), 0.5))
    moved = maybe_reparameterize(drift)
    out.append(_check("re-centering an offset circle removes its heights", moved.rho.sup, 1e-6))
    return out


_SUITE_FUNCS: Dict[str, Callable] = {
    "geometry": geometry_checks,
    "elliptic": elliptic_checks,
    "stepper": stepper_checks,
    "dynamics": dynamics_checks,
}


def run_suite(suite, seed=0):
    """Return {suite name: [Check, ...]} for one suite or "all"."""
    names = SUITES if suite == "all" else (suite,)
    for name in names:
        if name not in _SUITE_FUNCS:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return {name: _SUITE_FUNCS[name](seed) for name in names}


def format_report(results, seed) -> str:
    lines = [f"verification report (seed {seed})", ""]
    total = failed = 0
    for suite, checks in results.items():
        lines.append(f"[{suite}]")
        for c in checks:
            total += 1
            failed += not c.passed
            lines.append(f"  {'PASS' if c.passed else 'FAIL'}  {c.name:<58s} value={c.value:.3e} tol={c.tolerance:.1e}")
        lines.append("")
    lines.append(f"{total - failed}/{total} checks passed")
    return "\n".join(lines) + "\n"
