import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasiflow.errors import FiniteTimeBreakdown, GridMismatch, NoContraction, ParameterOutOfRange
from quasiflow.models import make_second_order
from quasiflow.stepper import (
    ConstantProblem,
    NormSuite,
    WeightedGrid,
    compute_mu0,
    continue_solution,
    march_semi_implicit,
    picard_window,
    sigma_factor,
    spectral_shift,
    weighted_norm,
)


# --- grids and weighted norms ---

def test_grid_nodes():
    g = WeightedGrid(2.0, 10, mu=0.75, p=2.0)
    assert g.q == pytest.approx(8.0)
    t = g.nodes
    assert t[0] == 0.0 and t[-1] == 2.0
    assert np.all(np.diff(t) > 0)
    assert WeightedGrid.uniform(1.0, 4).q == 1.0


def test_grid_rejects_bad_weight():
    with pytest.raises(ParameterOutOfRange):
        WeightedGrid(1.0, 10, mu=0.4, p=2.0)
    with pytest.raises(ParameterOutOfRange):
        WeightedGrid(1.0, 10, mu=1.2, p=2.0)


def test_weighted_norm_of_one():
    g = WeightedGrid(1.0, 16, mu=1.0, p=2.0)
    assert weighted_norm(np.ones(17), g) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("T,p,mu", [(1.0, 2.0, 0.75), (0.3, 4.0, 0.9), (2.5, 3.0, 0.6)])
def test_weighted_norm_of_constant_is_sigma(T, p, mu):
    g = WeightedGrid(T, 7, mu=mu, p=p)
    assert weighted_norm(np.full(8, 1.0), g) == pytest.approx(sigma_factor(T, p, mu), rel=1e-13)


def test_weight_cancels_singularity():
    errs = []
    for n in (40, 80, 160):
        g = WeightedGrid(1.0, n, mu=0.75, p=2.0)
        with np.errstate(divide="ignore"):
            u = g.nodes ** -0.25
        errs.append(abs(weighted_norm(u, g) - 1.0))
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@settings(max_examples=40, deadline=None)
@given(lam=st.one_of(st.just(0.0), st.floats(1e-6, 1e3), st.floats(-1e3, -1e-6)), seed=st.integers(0, 1000))
def test_weighted_norm_homogeneous(lam, seed):
    g = WeightedGrid(1.0, 12, mu=0.8, p=3.0)
    u = np.random.default_rng(seed).standard_normal((13, 5))
    assert weighted_norm(lam * u, g) == pytest.approx(abs(lam) * weighted_norm(u, g), rel=1e-12, abs=1e-300)


def test_weighted_norm_grid_mismatch():
    with pytest.raises(GridMismatch):
        weighted_norm(np.ones(5), WeightedGrid(1.0, 8))


def test_sigma_factor_examples():
    assert sigma_factor(0.37, 3.0, 1.0) == pytest.approx(0.37 ** (1 / 3), rel=1e-15)
    assert sigma_factor(1.0, 2.0, 0.75) == pytest.approx(1 / np.sqrt(1.5), rel=1e-15)
    Ts = np.logspace(0, -8, 20)
    vals = [sigma_factor(T, 2.0, 0.75) for T in Ts]
    assert np.all(np.diff(vals) < 0) and vals[-1] < 1e-5
    with pytest.raises(ParameterOutOfRange):
        sigma_factor(1.0, 1.0, 0.9)


def test_compute_mu0():
    assert compute_mu0(1, 4.0, "secondorder") == pytest.approx(7 / 8)
    assert compute_mu0(2, 6.0, "mullins_sekerka") == pytest.approx(11 / 18)
    with pytest.raises(ParameterOutOfRange):
        compute_mu0(2, 4.0, "secondorder")
    with pytest.raises(ParameterOutOfRange):
        compute_mu0(2, 2.5, "mullins_sekerka")


def test_norm_suite_properties(rng):
    ns = NormSuite(1 - 1 / 6, 4 - 1 / 6, 6.0, 0.8)
    u = rng.standard_normal(32)
    assert ns.x0(u) > 0 and ns.x0(np.zeros(32)) == 0.0
    assert ns.x0(u) <= ns.xgm(u) <= ns.xg(u) <= ns.x1(u)
    assert ns.x1(-3 * u) == pytest.approx(3 * ns.x1(u), rel=1e-13)
    g = ns.grid(0.1, 10)
    traj = np.outer(np.linspace(1, 2, 11), u)
    assert ns.e1(traj, g) >= ns.e0(traj, g)


# --- Picard windows ---

def heat(m=63):
    return make_second_order(lambda u, ux: 1.0, None, m=m, p=4.0)


def test_constant_problem_one_iteration():
    A = np.array([[2.0, -1.0], [-1.0, 2.0]])
    prob = ConstantProblem(A, forcing=np.array([1.0, 0.5]))
    res = picard_window(prob, np.array([0.3, -0.2]), WeightedGrid(0.5, 10, mu=0.8, p=2.0))
    incs = res.diagnostics.increments
    assert len(incs) == 2 and incs[-1] == 0.0


def test_heat_matches_eigen_decay_first_order():
    prob = heat(127)
    h = prob.h
    lam_h = 4 / h**2 * np.sin(np.pi * h / 2) ** 2
    u0 = np.sin(np.pi * prob.x)
    T = 0.05
    errs = []
    for n in (20, 40, 80):
        res = picard_window(prob, u0, WeightedGrid.uniform(T, n, p=4.0))
        discrete = (1 + lam_h * T / n) ** (-n) * u0
        assert np.max(np.abs(res.states[-1] - discrete)) < 1e-12
        errs.append(np.max(np.abs(res.states[-1] - np.exp(-np.pi**2 * T) * u0)))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 1.7 < r1 < 2.3 and 1.7 < r2 < 2.3


def quasilinear():
    prob = make_second_order(lambda u, ux: 1.0 + u * u, None, m=63, p=4.0)
    u0 = 0.1 * np.sin(np.pi * prob.x) + 0.5 * np.sin(2 * np.pi * prob.x)
    return prob, u0


def test_contraction_factor_shrinks_with_window():
    prob, u0 = quasilinear()
    kappas = []
    for T in (0.2, 0.1, 0.05, 0.025):
        res = picard_window(prob, u0, prob.norms.grid(T, 20), halve=False)
        d = res.diagnostics
        assert 0 <= d.kappa < 1
        assert d.c_hat == pytest.approx(1 / (1 - d.kappa))
        assert d.lip_A > 0
        kappas.append(d.kappa)
    assert all(a > b for a, b in zip(kappas, kappas[1:]))


def test_window_halves_when_not_contracting():
    prob = make_second_order(lambda u, ux: 1.0 + u * u, lambda u, ux: 5.0 * u * u, m=31, p=4.0)
    u0 = 3.0 * np.sin(np.pi * prob.x)
    res = picard_window(prob, u0, prob.norms.grid(1.0, 10), max_iter=30)
    assert res.diagnostics.halvings >= 1
    assert res.diagnostics.kappa < 1
    assert res.grid.T == pytest.approx(2.0 ** -res.diagnostics.halvings)


def test_no_contraction_raised_without_halving():
    prob = make_second_order(lambda u, ux: 1.0 + u * u, lambda u, ux: 5.0 * u * u, m=31, p=4.0)
    u0 = 3.0 * np.sin(np.pi * prob.x)
    with pytest.raises(NoContraction):
        picard_window(prob, u0, prob.norms.grid(1.0, 10), max_iter=30, halve=False)


# --- continuation ---

def test_heat_reaches_horizon():
    prob = heat()
    res = continue_solution(prob, np.sin(np.pi * prob.x), 1.0, 0.1, 20)
    assert res.status == "horizon" and res.t_last == pytest.approx(1.0)
    # backward Euler with dt = 0.005 decays a little slower than the exact e^{-pi^2}
    assert np.exp(-np.pi**2) < np.max(np.abs(res.states[-1])) < 1.5 * np.exp(-np.pi**2)


def test_zero_data_stays_zero():
    prob = make_second_order(lambda u, ux: 1.0 + u * u, lambda u, ux: u * u, m=31)
    res = continue_solution(prob, np.zeros(31), 0.5, 0.1, 10)
    assert np.all(res.states == 0.0)


def test_reaction_blows_up_near_ode_time():
    prob = make_second_order(lambda u, ux: 1.0, lambda u, ux: u * u, m=31)
    u0 = 50.0
    with pytest.raises(FiniteTimeBreakdown) as info:
        continue_solution(prob, u0 * np.ones(31), 1.0, 0.002, 20, blowup=1e3)
    exc = info.value
    assert exc.partial.status == "breakdown"
    assert abs(exc.t_last - 1 / u0) <= 0.2 / u0


def test_two_windows_equal_one():
    prob = heat()
    u0 = np.sin(np.pi * prob.x) + 0.3 * np.sin(3 * np.pi * prob.x)
    two = continue_solution(prob, u0, 0.2, 0.1, 10, q=1.0)
    one = picard_window(prob, u0, WeightedGrid.uniform(0.2, 20, p=4.0))
    assert np.max(np.abs(two.states[-1] - one.states[-1])) < 1e-8
    assert len(two.windows) == 2


# --- spectral shift ---

def test_shift_zero_is_identity():
    prob = heat()
    assert spectral_shift(prob, 0.0) is prob
    with pytest.raises(ParameterOutOfRange):
        spectral_shift(prob, -1.0)


def test_shift_preserves_trajectory():
    prob = heat()
    u0 = np.sin(np.pi * prob.x)
    grid = WeightedGrid.uniform(0.1, 20, p=4.0)
    a = picard_window(prob, u0, grid).states
    b = picard_window(spectral_shift(prob, 1.0), u0, grid).states
    assert np.max(np.abs(a - b)) < 1e-8


def test_shift_stabilizes_negative_operator():
    prob = ConstantProblem([[-0.5]])
    shifted = spectral_shift(prob, 1.0)
    dt = 0.1
    assert abs(prob.linear_solve(None, dt, np.array([1.0]))[0]) > 1.0
    assert abs(shifted.linear_solve(None, dt, np.array([1.0]))[0]) < 1.0
    assert np.allclose(shifted.operator(None), [[0.5]])


# --- semi-implicit marching ---

def test_semi_implicit_agrees_with_picard_at_first_order():
    prob, u0 = quasilinear()
    T = 0.05
    diffs = []
    for n in (25, 50, 100):
        grid = WeightedGrid.uniform(T, n, p=4.0)
        pic = picard_window(prob, u0, grid).states[-1]
        semi = march_semi_implicit(prob, u0, grid.nodes)[-1]
        diffs.append(np.max(np.abs(pic - semi)))
    assert diffs[0] / diffs[1] > 1.7 and diffs[1] / diffs[2] > 1.7


def test_apply_A_is_linear(rng):
    prob, _ = quasilinear()
    v, u, w = (0.3 * rng.standard_normal(prob.dim) for _ in range(3))
    lhs = prob.apply_A(v, 2.0 * u - w)
    assert np.allclose(lhs, 2.0 * prob.apply_A(v, u) - prob.apply_A(v, w), rtol=1e-12, atol=1e-9)
