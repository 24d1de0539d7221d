import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from qfsource import field_dynamics as fd
from qfsource import retarded_reference as rr
from qfsource.core import SingularPointError, UnitSystem
from qfsource.mode_basis import build_lattice
from qfsource.quadrature import ShellSpec, panel_nodes
from qfsource.sources import (GaussianDipole, GaussianLoop, TimeProfile, make_switched_dipole,
                              make_uniform_charge)

from conftest import T_OBS


class _Null(GaussianDipole):
    pass


def _zero_source():
    return make_switched_dipole((0.0, 0.0, 0.0), 3.0, 0.2)


def test_vacuum_fields_vanish():
    lat = build_lattice(1.0, 3)
    amps = fd.ModeAmplitudeSet.vacuum(lat)
    x = fd.box_grid(1.0, 3)
    assert np.all(fd.expectation_A(amps, lat, x) == 0)
    assert np.all(fd.expectation_B_modesum(amps, lat, x) == 0)
    assert np.all(fd.expectation_E_modesum(amps, lat, _zero_source(), x) == 0)
    assert fd.field_energy(amps) == 0.0


def test_zero_source_keeps_vacuum():
    lat = build_lattice(1.0, 3)
    amps = fd.evolve_amplitudes(lat, _zero_source(), 0.7)
    assert np.all(amps.alphas == 0)


def test_single_mode_energy_is_hbar_omega():
    lat = build_lattice(1.0, 2, UnitSystem.si(hbar=2.0, c=3.0))
    amps = fd.ModeAmplitudeSet.vacuum(lat)
    i = lat.index_of((1, 0, 0))
    amps.alphas[i, 0] = np.exp(0.3j)
    assert math.isclose(fd.field_energy(amps), 2.0 * lat.omega[i], rel_tol=1e-15)


def test_single_mode_amplitude_quadrature_oracle(dipole):
    """One mode's amplitude against scipy quad of the defining time integral."""
    lat = build_lattice(1.0, 2)
    amps = fd.evolve_amplitudes(lat, dipole, 0.37)
    for n in [(1, 0, 0), (1, 2, -1), (0, 0, 2)]:
        i = lat.index_of(n)
        k, w = lat.k[i], lat.omega[i]
        for lam in (0, 1):
            eps = lat.eps[i, lam]
            f = lambda t: np.exp(1j * w * t) * np.conj(dipole.current_fourier(k[None], t)[0]) @ eps
            re = integrate.quad(lambda t: f(t).real, 0, 0.37, limit=200, epsabs=0, epsrel=1e-13)[0]
            im = integrate.quad(lambda t: f(t).imag, 0, 0.37, limit=200, epsabs=0, epsrel=1e-13)[0]
            want = 1j * math.sqrt(1 / (2 * lat.volume * w)) * (re + 1j * im)
            assert abs(amps.alphas[i, lam] - want) <= 1e-10 * abs(want) + 1e-16


def test_generic_and_factorized_paths_agree(dipole):
    class Unfactorized(GaussianDipole):
        def factorized(self):
            return None

    twin = Unfactorized(dipole.p0, dipole.profile, dipole.width)
    lat = build_lattice(1.0, 3)
    a = fd.evolve_amplitudes(lat, dipole, 0.4)
    b = fd.evolve_amplitudes(lat, twin, 0.4)
    assert np.abs(a.alphas - b.alphas).max() <= 1e-10 * np.abs(a.alphas).max()


def test_incremental_history_matches_direct(dipole):
    lat = build_lattice(1.0, 4)
    hist = fd.amplitude_history(lat, dipole, [0.1, 0.25, 0.4])
    direct = fd.evolve_amplitudes(lat, dipole, 0.4)
    assert np.abs(hist[-1].alphas - direct.alphas).max() <= 1e-12 * np.abs(direct.alphas).max()
    np.testing.assert_allclose(hist[-1].q0, direct.q0, rtol=1e-12, atol=1e-15)


def test_history_must_increase(dipole):
    with pytest.raises(ValueError):
        fd.amplitude_history(build_lattice(1.0, 2), dipole, [0.3, 0.1])


def test_fused_sum_is_real_full_sum(dipole):
    lat = build_lattice(1.0, 5)
    amps = fd.evolve_amplitudes(lat, dipole, 0.3)
    x = np.random.default_rng(3).uniform(-0.5, 0.5, (16, 3))
    full = fd.expectation_A_complex(amps, lat, x)
    assert np.abs(full.imag).max() <= 1e-12 * np.abs(full.real).max()
    fused = fd.expectation_A(amps, lat, x) - fd._zero_A(amps)
    np.testing.assert_allclose(fused, full.real, atol=1e-12 * np.abs(full).max())


def test_threads_do_not_change_results(dipole):
    lat = build_lattice(1.0, 6)
    amps = fd.evolve_amplitudes(lat, dipole, 0.3)
    x = fd.box_grid(1.0, 9)
    a = fd.expectation_E_modesum(amps, lat, dipole, x, threads=1)
    b = fd.expectation_E_modesum(amps, lat, dipole, x, threads=3)
    assert np.array_equal(a, b)


def test_magnetic_field_divergence_free(dipole_runs, box_points):
    lat, amps = dipole_runs(8)
    divB = fd.divergence(lat, fd.coefficients(amps)["B"], box_points)
    B = fd.expectation_B_modesum(amps, lat, box_points)
    kmax = np.linalg.norm(lat.k, axis=1).max()
    assert np.abs(divB).max() <= 1e-12 * np.abs(B).max() * kmax


def test_single_mode_B_amplitude():
    lat = build_lattice(1.0, 2)
    amps = fd.ModeAmplitudeSet.vacuum(lat)
    i = lat.index_of((0, 1, 0))
    amps.alphas[i, 0] = 1.0
    co = fd.coefficients(amps)
    h = np.flatnonzero(lat.half == i)[0]
    k = lat.k[i]
    np.testing.assert_allclose(np.abs(co["B"][h]), np.linalg.norm(k) * np.abs(np.cross(lat.khat[i], co["A"][h])),
                               rtol=1e-14)


def test_point_charge_field_is_singular():
    src = make_uniform_charge(1.0, (0.5, 0, 0), 0.0)
    lat = build_lattice(1.0, 2)
    with pytest.raises(SingularPointError):
        fd.expectation_E_modesum(fd.ModeAmplitudeSet.vacuum(lat), lat, src, np.zeros(3))


def test_far_zone_B_equals_E_over_c():
    # radiation zone of a fast dipole: |B| ~ |E|/c away from the Coulomb near field
    src = make_switched_dipole((0.0, 0.0, 1.0), 2 * math.pi * 12, 0.1, width=0.01)
    pts = np.array([[0.55, 0.0, 0.0], [0.0, 0.6, 0.0], [0.4, 0.4, 0.1]])
    for p in pts:
        f = rr.retarded_fields(src, p, 0.8, ShellSpec(32, 16, 16))
        assert abs(np.linalg.norm(f.B) / np.linalg.norm(f.E) - 1) < 0.05


def test_energy_matches_continuum_larmor_integral():
    """Lattice sum of hbar w |alpha|^2 for a finished pulse against the free-space spectrum."""
    w_src = 0.05
    prof = TimeProfile("pulse", 2 * math.pi * 4, 0.0, 0.1, 0.1)
    src = GaussianDipole(np.array([0.0, 0.0, 1.0]), prof, w_src)
    lat = build_lattice(1.0, 16)
    end = prof.breakpoints[-1]
    energy = fd.field_energy(fd.evolve_amplitudes(lat, src, end + 0.05))
    # Gauss panels split at the C2 joints of the envelope
    ts, ws = panel_nodes(np.linspace(0.0, end, 31), 40)
    pdot = prof(ts, 1)

    def spec(om):
        return abs(np.sum(ws * pdot * np.exp(1j * om * ts))) ** 2

    val = integrate.quad(lambda om: om**2 * spec(om) * math.exp(-(om * w_src) ** 2), 0, 12 / w_src,
                         limit=800, epsrel=1e-12)[0]
    larmor = val / (6 * math.pi**2)
    assert math.isclose(energy, larmor, rel_tol=1e-11)


def test_energy_nondecreasing_after_switch_off():
    prof = TimeProfile("pulse", 2 * math.pi * 4, 0.0, 0.1, 0.1)
    src = GaussianDipole(np.array([0.0, 0.0, 1.0]), prof, 0.05)
    lat = build_lattice(1.0, 8)
    end = prof.breakpoints[-1]
    e = [fd.field_energy(a) for a in fd.amplitude_history(lat, src, [end, end + 0.3, end + 0.9])]
    assert e[0] > 0 and e[1] >= e[0] * (1 - 1e-12) and e[2] >= e[1] * (1 - 1e-12)


def test_wave_residual_vacuum_and_validation(dipole):
    lat = build_lattice(1.0, 3)
    hist = [fd.ModeAmplitudeSet.vacuum(lat, t) for t in 0.1 * np.arange(5)]
    res = fd.wave_equation_residual(hist, lat, _zero_source(), np.zeros((2, 3)))
    assert res["max_abs"] == 0
    with pytest.raises(ValueError):
        fd.wave_equation_residual(hist[:3], lat, dipole, np.zeros(3))


def test_wave_residual_small_for_dipole(dipole):
    lat = build_lattice(1.0, 12)
    hist = fd.amplitude_history(lat, dipole, 0.3 + 1e-3 * np.arange(-2, 3))
    r = np.linspace(-0.08, 0.08, 3)
    pts = np.stack(np.meshgrid(r, r, r, indexing="ij"), -1).reshape(-1, 3)
    assert fd.wave_equation_residual(hist, lat, dipole, pts)["relative"] < 1e-3


def test_larmor_power_scaling():
    """Hold-phase power against p0^2 w^4 e^{-w^2 w_s^2}/(12 pi) at two drive frequencies."""
    width = 0.02
    out = []
    for wd in (2 * math.pi * 5, 2 * math.pi * 10):
        src = make_switched_dipole((0, 0, 1.0), wd, 0.1, width=width)
        lat = build_lattice(1.0, 16)
        a, b = fd.amplitude_history(lat, src, [0.2, 0.8])
        P = (fd.field_energy(b) - fd.field_energy(a)) / 0.6
        larmor = wd**4 / (12 * math.pi) * math.exp(-(wd * width) ** 2)
        assert math.isclose(P, larmor, rel_tol=1e-3)
        out.append(P / math.exp(-(wd * width) ** 2))
    assert math.isclose(out[1] / out[0], 16.0, rel_tol=1e-3)


def test_snapshot_formats_round_trip(tmp_path, dipole):
    lat = build_lattice(1.0, 4)
    amps = fd.evolve_amplitudes(lat, dipole, 0.3)
    snap = fd.snapshot(amps, lat, dipole, fd.box_grid(1.0, 3), dims=(3, 3, 3))
    snap.to_binary(tmp_path / "s.bin")
    back = fd.FieldSnapshot.from_binary(tmp_path / "s.bin")
    assert np.array_equal(back.table(), snap.table()) and back.dims == (3, 3, 3)
    snap.to_csv(tmp_path / "s.csv")
    tab = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert np.array_equal(tab, snap.table())
    E = fd.expectation_E_modesum(amps, lat, dipole, snap.grid)
    np.testing.assert_allclose(snap.E, E, rtol=0, atol=1e-12 * np.abs(E).max())


@given(st.floats(0.5, 2.0), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_displacement_adds_free_field(scale, bx, by, bz):
    """A coherent offset adds its own free field; the driven part is unchanged."""
    lat = build_lattice(1.0, 2)
    src = make_switched_dipole((0.0, 0.0, scale), 7.0, 0.2)
    amps = fd.evolve_amplitudes(lat, src, 0.3)
    beta = np.zeros((lat.size, 2), complex)
    beta[:, 0] = bx + 1j * by
    beta[:, 1] = bz
    x = np.array([[0.1, -0.2, 0.3]])
    both = fd.expectation_A(amps.displaced(beta), lat, x)
    free = fd.ModeAmplitudeSet(lat, 0.3, beta, zero_mode=False)
    np.testing.assert_allclose(both, fd.expectation_A(amps, lat, x) + fd.expectation_A(free, lat, x),
                               atol=1e-12 * (1 + np.abs(both).max()))


@given(st.floats(0.1, 0.6), st.floats(0.5, 3.0))
def test_amplitudes_linear_in_source(t, s):
    lat = build_lattice(1.0, 2)
    a = fd.evolve_amplitudes(lat, make_switched_dipole((0.0, 0.3, 1.0), 9.0, 0.2), t)
    b = fd.evolve_amplitudes(lat, make_switched_dipole((0.0, 0.3 * s, s), 9.0, 0.2), t)
    assert np.abs(b.alphas - s * a.alphas).max() <= 1e-12 * s * (1 + np.abs(a.alphas).max())


def test_solenoidal_loop_has_no_coulomb_part():
    src = GaussianLoop(np.array([0.0, 0.0, 1.0]), TimeProfile("switched", 7.0, 0.0, 0.2), 0.05)
    lat = build_lattice(1.0, 4)
    assert np.abs(fd.coulomb_coefficients(lat, src, 0.3)).max() == 0


def test_negative_time_mode_sum_converges_to_oracle(bipolar):
    pts = np.array([[0.1, 0.05, 0.2], [0.15, -0.1, 0.0], [-0.05, 0.1, -0.1]])
    Eo, _ = rr.retarded_grid(bipolar, pts, -0.3, ShellSpec(32, 24, 24))
    errs = []
    for n in (8, 16):
        lat = build_lattice(1.0, n)
        E = fd.expectation_E_modesum(fd.evolve_amplitudes(lat, bipolar, -0.3), lat, bipolar, pts)
        errs.append(np.linalg.norm(E - Eo) / np.linalg.norm(Eo))
    assert errs[1] < 1e-5 and errs[0] / errs[1] > 1.5
