import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from qfsource.single_mode import (DriveFunction, InitialState, cnumber_phase, evolve_mean_P,
                                  evolve_mean_Q, kick_phase, symmetrized_covariance,
                                  uncertainty_product, variance_P, variance_Q)

omegas = st.floats(0.2, 5.0)
hbars = st.floats(0.5, 2.0)
times = st.floats(0.0, 20.0)


def test_vacuum_variance():
    v = variance_Q(InitialState.fock(0), 2.0, np.linspace(0, 5, 7))
    np.testing.assert_allclose(v, 0.25, rtol=1e-15)


def test_superposition_example_value():
    w = 1.0
    v = variance_Q(InitialState.superposition01(), w, math.pi / (2 * w))
    assert math.isclose(v, 1.0, rel_tol=1e-14)  # hbar (2 - 0)/(2 w)


def test_constant_drive_displacement():
    # Q(t) = f0 (1 - cos wt)/w^2 from rest
    w, f0, t = 1.3, 0.7, 2.1
    got = evolve_mean_Q(InitialState.fock(0), w, DriveFunction.constant(f0), t)
    assert math.isclose(got, f0 * (1 - math.cos(w * t)) / w**2, rel_tol=1e-13)


def test_quadrature_path_matches_closed_form():
    w, f0, t = 1.3, 0.7, 2.1
    generic = DriveFunction(lambda s: f0 + 0.0 * np.asarray(s))
    st0 = InitialState.coherent(0.4 - 0.2j)
    for fn in (evolve_mean_Q, evolve_mean_P):
        a = fn(st0, w, generic, t)
        b = fn(st0, w, DriveFunction.constant(f0), t)
        assert math.isclose(a, b, rel_tol=1e-11)


def test_negative_time_and_frequency_rejected():
    with pytest.raises(ValueError):
        evolve_mean_Q(InitialState.fock(0), 1.0, DriveFunction.zero(), -1.0)
    with pytest.raises(ValueError):
        variance_Q(InitialState.fock(0), 0.0, 1.0)
    with pytest.raises(ValueError):
        InitialState.fock(-1)


def test_two_kick_phase_bch():
    w = 1.7
    kicks = [(0.3, 0.8), (1.1, -0.5)]
    assert math.isclose(kick_phase(w, kicks), 0.8 * -0.5 * math.sin(w * 0.8), rel_tol=1e-15)


def test_phase_against_truncated_fock_evolution():
    """Time-ordered exponential of H_I on a truncated Fock space versus exp(i phi) e^{-i int H_I}."""
    w, hbar, T, nsteps, dim = 1.3, 1.0, 2.0, 4000, 40
    g = lambda t: 0.4 * math.sin(2.1 * t) + 0.1
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    ad = a.T
    U = np.eye(dim, dtype=complex)
    dt = T / nsteps
    for i in range(nsteps):
        tm = (i + 0.5) * dt
        H = g(tm) * (a * np.exp(-1j * w * tm) + ad * np.exp(1j * w * tm))
        U = expm(-1j * H * dt / hbar) @ U
    # Magnus first term with the exact integral of g e^{-i w t}
    ts = (np.arange(nsteps) + 0.5) * dt
    z = np.sum(np.array([g(t) for t in ts]) * np.exp(-1j * w * ts)) * dt
    M1 = z * a + np.conj(z) * ad
    V = expm(-1j * M1 / hbar)
    phi = cnumber_phase(w, g, T, hbar)
    ratio = (U[0, 0] / V[0, 0])
    assert abs(ratio / abs(ratio) - np.exp(1j * phi / hbar)) < 1e-5


@given(omegas, hbars, st.floats(0.0, 3.0), st.floats(-math.pi, math.pi), times)
def test_coherent_variance_constant(w, hbar, r, th, t):
    s = InitialState.coherent(r * complex(math.cos(th), math.sin(th)))
    assert math.isclose(float(variance_Q(s, w, t, hbar)), hbar / (2 * w), rel_tol=1e-12)
    assert math.isclose(float(variance_P(s, w, t, hbar)), hbar * w / 2, rel_tol=1e-12)


@given(omegas, hbars, st.integers(0, 30), times)
def test_fock_variance(w, hbar, n, t):
    s = InitialState.fock(n)
    assert math.isclose(float(variance_Q(s, w, t, hbar)), (n + 0.5) * hbar / w, rel_tol=1e-12)


@given(omegas, hbars, times)
def test_superposition_variance(w, hbar, t):
    got = float(variance_Q(InitialState.superposition01(), w, t, hbar))
    want = hbar * (2 - math.cos(w * t) ** 2) / (2 * w)
    assert math.isclose(got, want, rel_tol=1e-12)


@given(omegas, hbars, times, st.sampled_from(["coherent", "fock", "superposition01"]))
def test_uncertainty_relation(w, hbar, t, kind):
    s = {"coherent": InitialState.coherent(0.5 + 1j), "fock": InitialState.fock(3),
         "superposition01": InitialState.superposition01()}[kind]
    assert float(uncertainty_product(s, w, t, hbar)) >= hbar**2 / 4 * (1 - 1e-12)


@given(omegas, st.floats(-2, 2), st.floats(0.0, 10.0))
def test_mean_is_linear_in_force(w, f0, t):
    # <Q> for drive f is the free mean plus the driven response; doubling f doubles the response
    s = InitialState.coherent(0.3)
    free = evolve_mean_Q(s, w, DriveFunction.zero(), t)
    one = evolve_mean_Q(s, w, DriveFunction.constant(f0), t) - free
    two = evolve_mean_Q(s, w, DriveFunction.constant(2 * f0), t) - free
    assert math.isclose(two, 2 * one, rel_tol=1e-9, abs_tol=1e-12)


@given(omegas, times)
def test_covariance_of_minimum_states_stays_zero_for_fock(w, t):
    assert abs(float(symmetrized_covariance(InitialState.fock(2), w, t))) < 1e-12 * 2.5 / w + 1e-14


@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.1, 3), st.floats(-0.5, 0.5))
def test_from_moments_round_trip(mq, mp, vq, vp, cov):
    s = InitialState.from_moments(mq, mp, vq, vp, cov, omega=1.7, hbar=0.9)
    m = s.moments(1.7, 0.9)
    for key, val in zip(("mean_Q", "mean_P", "var_Q", "var_P", "sym_cov"), (mq, mp, vq, vp, cov)):
        assert math.isclose(m[key], val, rel_tol=1e-12, abs_tol=1e-15)
