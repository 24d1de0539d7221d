"""Dipole emission rates and Vavilov-Cherenkov radiation.

The hydrogen 2p -> 1s matrix element is derived from the hydrogenic
wavefunctions with exact rational arithmetic:

    R_10 = 2 a^{-3/2} e^{-r/a},   R_21 = (2 sqrt 6)^{-1} a^{-3/2} (r/a) e^{-r/2a}
    <R_10 | r | R_21> = (1/sqrt 6) int_0^inf rho^4 e^{-3 rho/2} d rho a = (1/sqrt 6) 4! (2/3)^5 a
    <Y_00 | cos theta | Y_10> = 1/sqrt 3

so |<1s| z |2p, m=0>|^2 = (4!)^2 (2/3)^10 / 18 a^2 = 2^15 / 3^10 a^2. Summing
the three Cartesian components over the final 1s state gives the same
value for every m of the initial 2p level.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.constants as const
from scipy import optimize, special

from .core import (BOHR_RADIUS, ELECTRON_MASS, ELEMENTARY_CHARGE, ThresholdError,
                   UnitMode, UnitSystem, fine_structure_constant)
from .mode_basis import linear_polarizations
from .quadrature import gauss_legendre

# --------------------------------------------------------------- dipole rate


def _laguerre_moment(n: int, beta: Fraction) -> Fraction:
    """int_0^inf r^n e^{-beta r} dr = n! / beta^(n+1)."""
    return Fraction(math.factorial(n)) / beta ** (n + 1)


def hydrogen_2p1s_dipole_squared() -> Fraction:
    """|<1s| x |2p>|^2 in units of a_B^2, summed over Cartesian components."""
    radial_sq = _laguerre_moment(4, Fraction(3, 2)) ** 2 / 6  # 2 * (2 sqrt 6)^-1 squared = 1/6
    angular_sq = Fraction(1, 3)
    return radial_sq * angular_sq


def hydrogen_2p1s_frequency_ratio() -> Fraction:
    """omega_if in units of alpha c / a_B: (1 - 1/4) / 2."""
    return Fraction(3, 8)


@dataclass(frozen=True)
class DipoleTransition:
    """Emission i -> f with angular frequency ``omega_if`` and <f|x|i> (complex)."""

    omega_if: float
    matrix_element: np.ndarray
    charge: float = ELEMENTARY_CHARGE

    def __post_init__(self):
        if not self.omega_if > 0:
            raise ValueError("emission needs omega_if > 0")
        object.__setattr__(self, "matrix_element", np.asarray(self.matrix_element, dtype=complex))

    def scaled(self, s: float) -> "DipoleTransition":
        return DipoleTransition(self.omega_if, s * self.matrix_element, self.charge)


def hydrogen_2p1s(u: UnitSystem | None = None) -> DipoleTransition:
    """2p(m=0) -> 1s of hydrogen with the exact matrix element along z."""
    u = u or UnitSystem.si()
    alpha = fine_structure_constant(u)
    omega = float(hydrogen_2p1s_frequency_ratio()) * alpha * u.c / BOHR_RADIUS
    d = math.sqrt(float(hydrogen_2p1s_dipole_squared())) * BOHR_RADIUS
    return DipoleTransition(omega, np.array([0.0, 0.0, d]))


def golden_rule_rate(tr: DipoleTransition, u: UnitSystem, occupation: float = 0.0,
                     n_theta: int = 16, n_phi: int = 16) -> float:
    """(2 pi / hbar^2) sum_{k lam} delta(w_k - w_if) |<i|H_I(0)|f>|^2 (1 + n).

    The mode sum becomes V/(2 pi)^3 int d^3k, the delta fixes |k| = w_if/c,
    and the remaining solid-angle integral over sum_lam |eps . d|^2 is done on
    a Gauss-Legendre x uniform grid (exact for this quadratic integrand). The
    box volume cancels and is not an argument.
    """
    w = tr.omega_if
    x, wx = gauss_legendre(n_theta)
    phi = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1 - x**2)
    khat = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                     np.outer(x, np.ones(n_phi))], axis=-1).reshape(-1, 3)
    wang = np.repeat(wx, n_phi) * (2 * math.pi / n_phi)
    e1, e2 = linear_polarizations(khat)
    d = tr.matrix_element
    pol = np.abs(e1 @ d) ** 2 + np.abs(e2 @ d) ** 2
    angular = float(wang @ pol)
    # |<i|H_I|f>|^2 = q^2 (hbar w / 2 eps0 V) |eps . d|^2 ; density V w^2 / ((2 pi)^3 c^3)
    density = w**2 / ((2 * math.pi) ** 3 * u.c**3)
    element = tr.charge**2 * u.hbar * w / (2 * u.epsilon0)
    return 2 * math.pi / u.hbar**2 * density * element * angular * (1.0 + occupation)


def dipole_rate(tr: DipoleTransition, u: UnitSystem, occupation: float = 0.0) -> float:
    """Closed form q^2 w^3 |d|^2 / (3 pi eps0 hbar c^3) times (1 + n)."""
    d2 = float(np.sum(np.abs(tr.matrix_element) ** 2))
    return (tr.charge**2 * tr.omega_if**3 * d2 / (3 * math.pi * u.epsilon0 * u.hbar * u.c**3)
            * (1.0 + occupation))


def dipole_rate_2p1s(u: UnitSystem | None = None, assemble: bool = False) -> float:
    """(2/3)^8 alpha^4 c / a_B.

    In natural mode the dimensionless coefficient (2/3)^8 alpha^4 is
    returned (c / a_B set to one). ``assemble=True`` evaluates the golden
    rule from the derived matrix element instead (SI only).
    """
    u = u or UnitSystem.si()
    if u.mode is UnitMode.NATURAL:
        if assemble:
            raise ValueError("golden-rule assembly needs SI constants")
        return float(Fraction(2, 3) ** 8) * const.fine_structure**4
    if assemble:
        return golden_rule_rate(hydrogen_2p1s(u), u)
    alpha = fine_structure_constant(u)
    return float(Fraction(2, 3) ** 8) * alpha**4 * u.c / BOHR_RADIUS


# -------------------------------------------------------------------- media


@dataclass(frozen=True)
class DielectricMedium:
    """Transparent medium with refractive index n(omega) on (0, omega_c)."""

    index: Callable[[float], float]
    omega_c: float = math.inf
    name: str = "medium"

    def n(self, omega):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega >= self.omega_c) or np.any(omega <= 0):
            raise ValueError("frequency outside the transparent band (0, omega_c)")
        return self.index(omega)

    def in_band(self, omega) -> np.ndarray:
        omega = np.asarray(omega, dtype=float)
        return (omega > 0) & (omega < self.omega_c)

    def omega_of_k(self, k: float, c: float = 1.0) -> float:
        """Solve w n(w) = c k for w by bracketing root search."""
        if not k > 0:
            raise ValueError("wavenumber must be positive")
        f = lambda w: w * float(self.index(w)) - c * k
        hi = c * k
        lo = hi / 1e6
        while f(hi) < 0:
            hi *= 2
        if hi >= self.omega_c:
            hi = min(hi, self.omega_c * (1 - 1e-12))
            if f(hi) < 0:
                raise ValueError("no propagating mode with this wavenumber below omega_c")
        return optimize.brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)

    @classmethod
    def constant(cls, n: float, omega_c: float = math.inf) -> "DielectricMedium":
        if not n >= 1:
            raise ValueError("refractive index must be >= 1")
        return cls(lambda w: n + 0.0 * np.asarray(w), omega_c, f"n={n}")

    @classmethod
    def sellmeier(cls, strengths: Sequence[float], resonances: Sequence[float],
                  omega_c: Optional[float] = None) -> "DielectricMedium":
        """n^2 = 1 + sum_i B_i w_i^2 / (w_i^2 - w^2); cutoff at the lowest resonance."""
        B = np.asarray(strengths, dtype=float)
        W = np.asarray(resonances, dtype=float)
        if B.shape != W.shape or np.any(W <= 0):
            raise ValueError("need matching positive resonance table")
        wc = float(W.min()) if omega_c is None else omega_c

        def index(w):
            w = np.asarray(w, dtype=float)
            return np.sqrt(1 + np.sum(B * W**2 / (W**2 - w[..., None] ** 2), axis=-1))

        return cls(index, wc, "sellmeier")

    def to_dict(self) -> dict:
        return {"name": self.name, "omega_c": self.omega_c}


def medium_from_dict(d: dict) -> DielectricMedium:
    kind = d.get("kind", "constant")
    wc = d.get("omega_c", math.inf)
    if kind == "constant":
        return DielectricMedium.constant(d["n"], wc if wc is not None else math.inf)
    if kind == "sellmeier":
        return DielectricMedium.sellmeier(d["strengths"], d["resonances"], d.get("omega_c"))
    raise ValueError(f"unknown medium kind {kind!r}")


# ---------------------------------------------------------------- Cherenkov


def cherenkov_angle(v: float, n: float, c: float = 1.0) -> float:
    beta_n = n * v / c
    if not beta_n > 1:
        raise ThresholdError(f"no Cherenkov emission: n v / c = {beta_n:.6g} <= 1")
    return math.acos(1.0 / beta_n)


def quantum_correction(v: float, n: float, omega: float, m: float, u: UnitSystem) -> float:
    """hbar w (n^2 - 1) sqrt(1 - v^2/c^2) / (2 m c^2)."""
    return u.hbar * omega * (n * n - 1) * math.sqrt(1 - (v / u.c) ** 2) / (2 * m * u.c**2)


def cherenkov_angle_quantum(v: float, n: float, omega: float, m: float = ELECTRON_MASS,
                            u: UnitSystem | None = None) -> float:
    """Angle including the photon-recoil correction of the emitting charge."""
    u = u or UnitSystem.si()
    if not n * v / u.c > 1:
        raise ThresholdError("below the Cherenkov threshold")
    cos = u.c / (n * v) * (1 + quantum_correction(v, n, omega, m, u))
    if not -1 <= cos <= 1:
        raise ThresholdError(f"recoil pushes cos(theta) to {cos:.6g}: kinematic cutoff")
    return math.acos(cos)


def cherenkov_power_spectrum(q: float, v: float, medium: DielectricMedium, omegas,
                             u: UnitSystem | None = None) -> np.ndarray:
    """P(w) = (q^2 / 4 pi eps0 c)(v/c) w (1 - c^2/n^2 v^2), zero below threshold."""
    u = u or UnitSystem.natural()
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    band = medium.in_band(w)
    P = np.zeros_like(w)
    if band.any():
        n = np.asarray(medium.n(w[band]), dtype=float)
        cos2 = (u.c / (n * v)) ** 2
        P[band] = np.where(cos2 < 1, q * q / (4 * math.pi * u.epsilon0 * u.c) * (v / u.c)
                           * w[band] * (1 - cos2), 0.0)
    if not np.any(P > 0):
        raise ThresholdError("no frequency in the grid lies in the emission band")
    return P


def window_integral(delta, T: float):
    """int_0^T exp(i delta t) dt = (e^{i delta T} - 1)/(i delta), T at delta = 0."""
    d = np.asarray(delta, dtype=float)
    small = np.abs(d * T) < 1e-8
    safe = np.where(small, 1.0, d)
    out = (np.exp(1j * safe * T) - 1) / (1j * safe)
    return np.where(small, T * (1 + 0.5j * d * T), out)


def cherenkov_amplitude(k, lam: int, v, q: float, medium: DielectricMedium, T: float,
                        u: UnitSystem | None = None, volume: float = 1.0) -> complex:
    """Coherent amplitude of mode (k, lam) after a charge crosses for time T.

    The medium replaces eps0 by n^2 eps0 and w = c|k|/n. The current
    transform is q v exp(i k.v t), so the time integral is the window of
    Delta = w - k.v.
    """
    if not T > 0:
        raise ValueError("duration must be positive")
    u = u or UnitSystem.natural()
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    kn = float(np.linalg.norm(k))
    w = medium.omega_of_k(kn, u.c)
    n = float(medium.n(w))
    e1, e2 = linear_polarizations(k[None, :])
    eps = (e1 if lam == 1 else e2)[0]
    pref = 1j / u.hbar * math.sqrt(u.hbar / (2 * volume * n * n * u.epsilon0 * w))
    return complex(pref * q * (v @ eps) * window_integral(w - k @ v, T))


def _window_angular(mu_c: float, b: float) -> float:
    """int_{-1}^{1} dmu (1 - mu^2) sin^2(b (mu - mu_c)) / (mu - mu_c)^2, closed form."""
    A0, A1, A2 = 1 - mu_c * mu_c, -2 * mu_c, -1.0

    def F(u):
        si, ci = special.sici(2 * b * abs(u))
        si = math.copysign(si, u)
        f0 = -math.sin(b * u) ** 2 / u + b * si
        f1 = 0.5 * (math.log(abs(u)) - ci)
        f2 = u / 2 - math.sin(2 * b * u) / (4 * b)
        return A0 * f0 + A1 * f1 + A2 * f2

    return F(1 - mu_c) - F(-1 - mu_c)


def _window_angular_quad(mu_c: float, b: float, n: int = 4000) -> float:
    """Same integral by composite Gauss-Legendre, for cross-checks."""
    from .quadrature import panel_nodes
    edges = np.unique(np.concatenate([np.linspace(-1, 1, n // 16 + 1), [mu_c]]))
    edges = edges[(edges >= -1) & (edges <= 1)]
    x, w = panel_nodes(edges, 16)
    u = x - mu_c
    return float(w @ ((1 - x**2) * np.sin(b * u) ** 2 / u**2))


def cherenkov_energy_spectrum(q: float, v: float, medium: DielectricMedium, omegas, T,
                              u: UnitSystem | None = None, method: str = "analytic") -> np.ndarray:
    """Field energy per unit frequency after time T, from the mode amplitudes.

    sum_{k lam} hbar w |alpha|^2 -> V int d^3k/(2 pi)^3 with the
    polarization sum |v|^2 (1 - mu^2) and the sin^2 window in mu integrated
    over the emission directions. The box volume cancels. ``T`` may be a
    scalar or one duration per frequency.
    """
    u = u or UnitSystem.natural()
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    Ts = np.broadcast_to(np.asarray(T, dtype=float), w.shape)
    out = np.zeros_like(w)
    for i, (om, TT) in enumerate(zip(w, Ts)):
        n = float(medium.n(om))
        k = n * om / u.c
        dk_dw = n / u.c  # index treated as locally constant
        mu_c = u.c / (n * v)
        b = k * v * TT / 2
        ang = _window_angular(mu_c, b) if method == "analytic" else _window_angular_quad(mu_c, b)
        # hbar w |alpha|^2 with |alpha|^2 = (1/hbar^2)(hbar / 2 V n^2 eps0 w) q^2 |v.eps|^2 |W|^2
        per_mode = u.hbar * om * (1 / u.hbar**2) * (u.hbar / (2 * n * n * u.epsilon0 * om)) * q * q
        window = 4 / (k * v) ** 2
        out[i] = per_mode * v * v * window * ang * 2 * math.pi * k * k * dk_dw / (2 * math.pi) ** 3
    return out


def cherenkov_power_amplitude_route(q: float, v: float, medium: DielectricMedium, omegas,
                                    periods: float = 200.0, u: UnitSystem | None = None,
                                    method: str = "analytic") -> np.ndarray:
    """<H_0>/T spectrum with T equal to ``periods`` optical periods of each w."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    T = periods * 2 * math.pi / w
    return cherenkov_energy_spectrum(q, v, medium, w, T, u, method) / T


def shell_sum_amplitudes(q: float, v: float, medium: DielectricMedium, k: float, T: float,
                         u: UnitSystem | None = None, n_mu: int = 2000, n_phi: int = 8) -> float:
    """sum_lam int dOmega |alpha(k, lam)|^2 at fixed |k| with v along z, by direct sampling."""
    u = u or UnitSystem.natural()
    from .quadrature import panel_nodes
    mu, wmu = panel_nodes(np.linspace(-1, 1, n_mu // 16 + 1), 16)
    phi = 2 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    vv = np.array([0.0, 0.0, v])
    total = 0.0
    for m, wm in zip(mu, wmu):
        s = math.sqrt(max(0.0, 1 - m * m))
        for p in phi:
            kv = k * np.array([s * math.cos(p), s * math.sin(p), m])
            a = sum(abs(cherenkov_amplitude(kv, lam, vv, q, medium, T, u)) ** 2 for lam in (1, 2))
            total += wm * (2 * math.pi / n_phi) * a
    return total


def spectrum_table(q: float, v: float, medium: DielectricMedium, omegas, u: UnitSystem | None = None,
                   mass: Optional[float] = None, periods: float = 200.0) -> list[dict]:
    u = u or UnitSystem.natural()
    P = cherenkov_power_spectrum(q, v, medium, omegas, u)
    rows = []
    for om, p in zip(np.atleast_1d(omegas), P):
        n = float(medium.n(om))
        row = {"omega": float(om), "P": float(p), "theta_C": math.nan, "theta_C_quantum": math.nan}
        if n * v / u.c > 1:
            row["theta_C"] = cherenkov_angle(v, n, u.c)
            if mass is not None:
                row["theta_C_quantum"] = cherenkov_angle_quantum(v, n, float(om), mass, u)
        rows.append(row)
    amp = cherenkov_power_amplitude_route(q, v, medium, omegas, periods, u)
    for r, a in zip(rows, amp):
        r["P_amplitude_route"] = float(a)
    return rows


def write_spectrum_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: repr(float(v)) for k, v in r.items()})
