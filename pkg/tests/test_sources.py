import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfsource.core import SingularPointError, UnitSystem
from qfsource.quadrature import ShellSpec
from qfsource.sources import (GaussianDipole, GaussianLoop, TimeProfile, check_conservation,
                              coulomb_field, longitudinal_current, make_switched_dipole,
                              make_uniform_charge, scalar_potential, smootherstep,
                              source_from_dict, time_reverse, transverse_current,
                              transverse_project)

coord = st.floats(-0.15, 0.15)
point = st.tuples(coord, coord, coord).map(np.array)
kcomp = st.floats(-60, 60)
kvec = st.tuples(kcomp, kcomp, kcomp).map(np.array)


def _fourier_by_quadrature(src, k, t, n=72):
    # direct int d^3x e^{ikx} j on a tensor Gauss grid
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.45 * x
    wr = 0.45 * w
    X = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    W = np.einsum("i,j,k->ijk", wr, wr, wr).ravel()
    j = src.current(X, t)
    return (W * np.exp(1j * X @ k)) @ j


def test_smootherstep_endpoints():
    s, ds, d2s = smootherstep(np.array([0.0, 1.0]))
    np.testing.assert_array_equal(s, [0, 1])
    np.testing.assert_array_equal(ds, [0, 0])
    np.testing.assert_array_equal(d2s, [0, 0])


def test_switch_on_initial_conditions(dipole):
    pts = np.random.default_rng(0).normal(scale=0.05, size=(20, 3))
    assert np.all(dipole.charge(pts, 0.0) == 0)
    assert np.all(dipole.current(pts, 0.0) == 0)
    assert np.all(dipole.current_dt(pts, 0.0) == 0)


def test_zero_ramp_rejected():
    with pytest.raises(ValueError):
        make_switched_dipole((0, 0, 1), 1.0, 0.0)


def test_profile_derivatives_by_finite_differences():
    for prof in (TimeProfile("switched", 5.0, 0.1, 0.3), TimeProfile("pulse", 3.0, 0.0, 0.2, 0.4),
                 TimeProfile("bipolar", 4.0, tau=0.3, asym=0.4)):
        t = np.linspace(-0.5, 1.2, 37)
        h = 1e-5
        for order in (1, 2):
            fd = (prof(t + h, order - 1) - prof(t - h, order - 1)) / (2 * h)
            np.testing.assert_allclose(prof(t, order), fd, atol=1e-4 * np.abs(fd).max())


@pytest.mark.parametrize("make", [
    lambda: make_switched_dipole((0.2, -0.1, 1.0), 9.0, 0.2),
    lambda: GaussianLoop(np.array([0.0, 1.0, 0.5]), TimeProfile("switched", 7.0, 0.0, 0.2), 0.05),
    lambda: make_uniform_charge(1.0, (0.3, 0.0, 0.4), 0.05),
])
def test_continuity(make):
    src = make()
    pts = np.random.default_rng(1).normal(scale=0.05, size=(30, 3))
    rep = check_conservation(src, pts, [0.1, 0.25, 0.4], rel=1e-6)
    assert rep.passed, rep.to_dict()


def test_charge_conservation_detects_violation():
    class Broken(GaussianDipole):
        def charge(self, x, t):
            return 2 * super().charge(x, t)

    src = Broken(np.array([0.0, 0, 1]), TimeProfile("switched", 5.0, 0.0, 0.2), 0.05)
    pts = np.random.default_rng(2).normal(scale=0.05, size=(10, 3))
    assert not check_conservation(src, pts, [0.3]).passed


@given(kvec, st.floats(0.05, 0.6))
def test_dipole_fourier_matches_quadrature(k, t):
    src = make_switched_dipole((0.2, -0.1, 1.0), 9.0, 0.2, center=(0.02, 0.0, -0.01))
    got = src.current_fourier(k[None, :], t)[0]
    want = _fourier_by_quadrature(src, k, t)
    assert np.abs(got - want).max() <= 1e-8 * max(1.0, np.abs(want).max())


@given(kvec)
def test_loop_fourier_transverse_and_matches_quadrature(k):
    src = GaussianLoop(np.array([0.0, 1.0, 0.5]), TimeProfile("switched", 7.0, 0.0, 0.2), 0.05)
    jk = src.current_fourier(k[None, :], 0.3)[0]
    assert abs(jk @ k) <= 1e-12 * (1 + np.linalg.norm(jk) * np.linalg.norm(k))
    want = _fourier_by_quadrature(src, k, 0.3)
    assert np.abs(jk - want).max() <= 1e-8 * max(1.0, np.abs(want).max())


@given(kvec, st.floats(0.05, 0.6))
def test_fourier_continuity(k, t):
    # d rho/dt = -div j  <=>  d rho_k/dt = i k . j_k with the e^{+ikx} transform
    src = make_switched_dipole((0.2, -0.1, 1.0), 9.0, 0.2)
    h = 1e-6
    drho = (src.charge_fourier(k[None], t + h) - src.charge_fourier(k[None], t - h))[0] / (2 * h)
    rhs = 1j * k @ src.current_fourier(k[None], t)[0]
    assert abs(drho - rhs) <= 1e-6 * (1 + abs(rhs))


def test_uniform_charge_transform_phase():
    # x(t) = v t: transform picks up exp(+i k.v dt) between two times
    src = make_uniform_charge(1.0, (0.5, 0.0, 0.0), 0.01)
    k = np.array([[3.0, 1.0, 0.0]])
    r = src.charge_fourier(k, 0.7)[0] / src.charge_fourier(k, 0.2)[0]
    assert abs(r - np.exp(1j * 3.0 * 0.5 * 0.5)) < 1e-14


def test_uniform_charge_superluminal_and_singular():
    with pytest.raises(ValueError):
        make_uniform_charge(1.0, (1.2, 0, 0))
    src = make_uniform_charge(1.0, (0.5, 0, 0), 0.0)
    assert src.steady
    with pytest.raises(SingularPointError):
        src.charge(np.zeros(3), 0.0)
    with pytest.raises(SingularPointError):
        longitudinal_current(src, np.array([0.1, 0, 0]), 0.0)


@given(kvec.filter(lambda k: np.linalg.norm(k) > 1e-3))
def test_transverse_projection_properties(k):
    khat = k / np.linalg.norm(k)
    j = np.array([0.3 + 1j, -2.0, 0.5j])
    jt = transverse_project(j, khat)
    assert abs(jt @ khat) < 1e-12
    np.testing.assert_allclose(transverse_project(jt, khat), jt, atol=1e-12)


def test_transverse_project_needs_unit_vector():
    with pytest.raises(ValueError):
        transverse_project(np.ones(3), np.array([1.0, 1.0, 0.0]))


def test_helmholtz_split_of_loop_is_transverse():
    src = GaussianLoop(np.array([0.0, 0.0, 1.0]), TimeProfile("switched", 7.0, 0.0, 0.2), 0.05)
    x = np.array([0.03, -0.02, 0.01])
    j = src.current(x, 0.3)
    assert np.abs(longitudinal_current(src, x, 0.3)).max() < 1e-14
    assert np.abs(transverse_current(src, x, 0.3) - j).max() < 1e-6 * np.abs(j).max()


@pytest.mark.parametrize("x", [[0.03, -0.02, 0.01], [0.3, 0.1, -0.2]])
def test_helmholtz_split_reassembles_dipole_current(x):
    src = make_switched_dipole((0.2, -0.1, 1.0), 9.0, 0.2)
    x = np.array(x)
    tot = longitudinal_current(src, x, 0.3) + transverse_current(src, x, 0.3)
    j = src.current(x, 0.3)
    scale = np.abs(src.current(np.zeros(3), 0.3)).max()
    assert np.abs(tot - j).max() < 1e-6 * scale


def test_coulomb_field_far_from_dipole():
    # static dipole far field: E = (3 (p.rhat) rhat - p)/(4 pi eps0 r^3)
    prof = TimeProfile("switched", 0.0, 0.0, 0.1)
    src = GaussianDipole(np.array([0.0, 0.0, 1.0]), prof, 0.02)
    x = np.array([0.3, 0.2, 0.4])
    r = np.linalg.norm(x)
    rh = x / r
    p = np.array([0.0, 0.0, 1.0])
    want = (3 * (p @ rh) * rh - p) / (4 * math.pi * r**3)
    np.testing.assert_allclose(coulomb_field(src, x, 1.0), want, rtol=1e-8)
    assert math.isclose(scalar_potential(src, x, 1.0), (p @ rh) / (4 * math.pi * r**2), rel_tol=1e-8)


def test_time_reverse_involution_and_sign(dipole):
    rev = time_reverse(dipole)
    assert time_reverse(rev) is dipole
    x = np.array([[0.01, 0.02, -0.01]])
    np.testing.assert_allclose(rev.current(x, -0.3), -dipole.current(x, 0.3))
    np.testing.assert_allclose(rev.charge(x, -0.3), dipole.charge(x, 0.3))


@pytest.mark.parametrize("d", [
    {"kind": "switched_dipole", "p0": [0, 0, 1], "omega_d": 3.0, "ramp": 0.2},
    {"kind": "loop", "m0": [0, 1, 0], "profile": {"kind": "pulse", "omega_d": 2.0, "ramp": 0.1, "hold": 0.3}},
    {"kind": "uniform_charge", "q": 1.0, "v": [0.5, 0, 0], "width": 0.05},
])
def test_source_dict_round_trip(d):
    src = source_from_dict(d)
    back = source_from_dict(src.to_dict())
    x = np.array([[0.02, -0.01, 0.03]])
    np.testing.assert_allclose(back.current(x, 0.25), src.current(x, 0.25))


def test_unknown_source_kind():
    with pytest.raises(ValueError):
        source_from_dict({"kind": "quasar"})
