import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasiflow import _fourier as fr
from quasiflow.elliptic import concentric_jump_eigenvalue
from quasiflow.errors import ConstraintViolation, NonPositiveCoefficient, TubeViolation, UnsupportedBase
from quasiflow.geometry import CircleSpec, Container, build_reference_curve
from quasiflow.hanzawa import realize_interface
from quasiflow.models import (
    ms_equilibrium_residual,
    ms_problem,
    ms_state,
    ms_vector_field,
    make_second_order,
    offset_circle_heights,
    rough_heights,
)
from quasiflow.stepper import WeightedGrid, picard_window

UNIT = Container(1.0)
LAMBDA2 = 1536 / 17


def sigma(R=0.5, n=64, center=(0.0, 0.0)):
    return build_reference_curve(CircleSpec(R, center), UNIT, n=n)


# --- 1D second-order problem ---

def test_linear_reaction_decay_rate():
    prob = make_second_order(lambda u, ux: 1.0, lambda u, ux: u, m=127)
    u0 = np.sin(np.pi * prob.x)
    T, n = 0.1, 400
    res = picard_window(prob, u0, WeightedGrid.uniform(T, n, p=4.0))
    rate = -np.log(np.max(res.states[-1]) / np.max(u0)) / T
    assert rate == pytest.approx(np.pi**2 - 1, rel=1e-2)


def test_quasilinear_decays_in_x0():
    prob = make_second_order(lambda u, ux: 1.0 + u * u, None, m=63)
    u0 = 0.1 * np.sin(np.pi * prob.x)
    res = picard_window(prob, u0, WeightedGrid.uniform(0.2, 40, p=4.0))
    x0 = [prob.norms.x0(u) for u in res.states]
    assert np.all(np.diff(x0) < 0)


def test_boundary_values_are_zero():
    prob = make_second_order(lambda u, ux: 1.0, None, m=15)
    u = np.ones(15)
    # the stencil sees the zero boundary values
    assert prob.dxx(u)[0] == pytest.approx(-1.0 / prob.h**2)
    assert prob.dxx(u)[7] == 0.0


def test_nonpositive_coefficient_detected():
    prob = make_second_order(lambda u, ux: 1.0 - u * u, None, m=31)
    with pytest.raises(NonPositiveCoefficient):
        prob.check_state(2.0 * np.sin(np.pi * prob.x))


def test_banded_solver_matches_dense(rng):
    prob = make_second_order(lambda u, ux: 1.0 + u * u, None, m=31)
    v = 0.5 * rng.standard_normal(31)
    rhs = rng.standard_normal(31)
    dense = np.linalg.solve(np.eye(31) + 0.01 * prob.operator(v), rhs)
    assert np.allclose(prob.linear_solve(v, 0.01, rhs), dense, rtol=1e-12, atol=1e-12)


# --- Mullins-Sekerka vector field ---

@pytest.mark.parametrize("R,c", [(0.5, 0.0), (0.3, 0.05), (0.45, -0.1)])
def test_constant_heights_are_stationary(R, c):
    st_ = ms_state(sigma(R), np.full(64, c))
    assert np.max(np.abs(ms_vector_field(st_))) < 1e-10


def test_mode_two_dispersion():
    s = sigma(0.5, 64)
    eps = 1e-4
    rho = eps * np.cos(2 * s.theta)
    v = ms_vector_field(ms_state(s, rho))
    assert LAMBDA2 == pytest.approx(-concentric_jump_eigenvalue(2, 0.5, 1.0) * 3 / 0.25, rel=1e-14)
    assert np.max(np.abs(v + LAMBDA2 * rho)) <= 1e-2 * LAMBDA2 * eps


def test_residual_examples():
    s = sigma(0.5, 64)
    assert ms_equilibrium_residual(ms_state(s)) <= 1e-9
    eps = 1e-3
    r = ms_equilibrium_residual(ms_state(s, eps * np.cos(2 * s.theta)))
    assert r == pytest.approx(LAMBDA2 * eps, rel=1e-2)
    off = offset_circle_heights(s, (0.1, -0.15), 0.5)
    assert ms_equilibrium_residual(ms_state(s, off)) <= 1e-8


def perturbed(seed, n=64, amp=0.01):
    s = sigma(0.45, n)
    rng = np.random.default_rng(seed)
    th = s.theta
    rho = sum(amp / k**2 * (rng.uniform(-1, 1) * np.cos(k * th) + rng.uniform(-1, 1) * np.sin(k * th))
              for k in range(1, 7))
    return ms_state(s, rho)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_normal_velocity_has_zero_mean(seed):
    state = perturbed(seed)
    gamma = state.interface
    assert abs(np.sum(state.normal_velocity * gamma.weights)) <= 1e-9 * gamma.length


def test_rotation_equivariance():
    state = perturbed(7)
    n = state.sigma.n
    for shift in (5, 17):
        rotated = state.with_heights(np.roll(state.rho.values, shift))
        assert np.max(np.abs(ms_vector_field(rotated) - np.roll(ms_vector_field(state), shift))) < 1e-9
    phi = 0.3
    rotated = state.with_heights(fr.shift(state.rho.values, phi))
    expected = fr.shift(ms_vector_field(state), phi)
    assert np.max(np.abs(ms_vector_field(rotated) - expected)) < 1e-6 * np.max(np.abs(expected))


def test_perimeter_derivative_is_minus_energy():
    state = perturbed(3)
    v = state.velocity
    h = 1e-6
    plus = realize_interface(state.rho.with_values(state.rho.values + h * v)).length
    minus = realize_interface(state.rho.with_values(state.rho.values - h * v)).length
    from quasiflow.elliptic import dirichlet_energy
    energy = dirichlet_energy(state.solution)
    assert (plus - minus) / (2 * h) == pytest.approx(-energy, rel=1e-6)


def test_problem_reassembles_vector_field(rng):
    s = sigma(0.5, 64)
    prob = ms_problem(UNIT, s)
    v = perturbed(11, amp=0.02).rho.values
    assert np.max(np.abs(-prob.apply_A(v, v) + prob.apply_F(v) - prob.vector_field(v))) < 1e-10
    assert np.allclose(prob.operator(v) @ v, prob.apply_A(v, v), rtol=1e-10, atol=1e-10)
    u, w = rng.standard_normal(64), rng.standard_normal(64)
    lhs = prob.apply_A(v, 3 * u - w)
    assert np.allclose(lhs, 3 * prob.apply_A(v, u) - prob.apply_A(v, w), rtol=1e-10, atol=1e-8)


def test_frozen_operator_at_circle_is_diagonal():
    R = 0.5
    s = sigma(R, 64)
    prob = ms_problem(UNIT, s)
    th = s.theta
    for k in range(0, 16):
        u = np.cos(k * th)
        expected = -concentric_jump_eigenvalue(k, R, 1.0) * k * k / R**2
        assert np.max(np.abs(prob.apply_A(np.zeros(64), u) - expected * u)) <= 1e-8 * max(1.0, abs(expected))


def test_problem_constraints():
    s = sigma(0.5, 64)
    prob = ms_problem(UNIT, s)
    with pytest.raises(ConstraintViolation):
        prob.check_state(np.full(64, s.tube.a))
    ell = build_reference_curve(CircleSpec(0.5), UNIT, n=64)
    object.__setattr__(ell, "circle", None)
    with pytest.raises(UnsupportedBase):
        ms_problem(UNIT, ell)
    with pytest.raises(UnsupportedBase):
        ms_state(ell)


def test_default_weight_is_admissible():
    prob = ms_problem(UNIT, sigma(0.5, 64))
    assert 11 / 18 < prob.norms.mu <= 1.0


def test_offset_circle_heights():
    s = sigma(0.25, 64)
    th = s.theta
    e, R = 0.05, 0.3
    expected = e * np.cos(th) + np.sqrt(R**2 - e**2 * np.sin(th) ** 2) - 0.25
    assert np.allclose(offset_circle_heights(s, (e, 0.0), R), expected, atol=1e-15)
    with pytest.raises(TubeViolation):
        offset_circle_heights(s, (0.5, 0.0), 0.1)


def test_rough_heights_shared_modes_agree():
    coarse = rough_heights(fr.nodes(64), 0.002, 2.2, seed=7)
    fine = rough_heights(fr.nodes(128), 0.002, 2.2, seed=7)
    c = np.fft.rfft(coarse) / 64
    f = np.fft.rfft(fine) / 128
    assert np.allclose(c[:32], f[:32], atol=1e-15)
    assert np.array_equal(coarse, rough_heights(fr.nodes(64), 0.002, 2.2, seed=7))
