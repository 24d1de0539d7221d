"""Electric-field variances: pointwise (cutoff divergent) and Gaussian-smeared.

For a displaced Fock state each mode contributes hbar w (n + 1/2)/(eps0 V)
to <E^2> - <E>^2. Smearing over a Gaussian of width sigma_s in space and
sigma_t in time multiplies the field of each mode by
exp(-sigma_s^2 k^2/2 - sigma_t^2 w^2/2), so the variance picks up the
square of that factor.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .core import UnitSystem
from .mode_basis import Mode, ModeLattice


@dataclass(frozen=True)
class SmearingKernel:
    sigma_s: float = 0.0
    sigma_t: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_t < 0:
            raise ValueError("smearing scales must be non-negative")

    @property
    def sigma(self) -> float:
        """Combined length scale, sigma^2 = sigma_s^2 + c^2 sigma_t^2."""
        return math.hypot(self.sigma_s, self.c * self.sigma_t)

    @property
    def pointwise(self) -> bool:
        return self.sigma == 0.0

    def weight(self, k, omega):
        k = np.asarray(k, dtype=float)
        omega = np.asarray(omega, dtype=float)
        return np.exp(-0.5 * self.sigma_s**2 * k**2 - 0.5 * self.sigma_t**2 * omega**2)


@dataclass(frozen=True)
class OccupationSpec:
    """Mode occupations: vacuum, Fock (scalar or per mode/polarization) or thermal."""

    kind: str = "vacuum"
    n: object = 0.0
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind not in ("vacuum", "fock", "thermal"):
            raise ValueError(f"unknown occupation kind {self.kind!r}")
        if self.kind == "thermal" and not self.temperature > 0:
            raise ValueError("thermal occupation needs T > 0")
        if self.kind == "fock" and np.any(np.asarray(self.n) < 0):
            raise ValueError("occupations must be non-negative")

    @classmethod
    def vacuum(cls):
        return cls()

    @classmethod
    def fock(cls, n):
        return cls("fock", n)

    @classmethod
    def thermal(cls, T: float):
        return cls("thermal", temperature=T)

    def sigma_T(self, u: UnitSystem) -> float:
        return u.hbar * u.c / (u.k_B * self.temperature)

    def occupations(self, omega, u: UnitSystem) -> np.ndarray:
        """n per (mode, polarization), shape (M, 2)."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "vacuum":
            return np.zeros(omega.shape + (2,))
        if self.kind == "fock":
            return np.broadcast_to(np.asarray(self.n, dtype=float), omega.shape + (2,)).copy()
        x = u.hbar * omega / (u.k_B * self.temperature)
        n = 1.0 / np.expm1(x)
        return np.repeat(n[..., None], 2, axis=-1)


def _sum(lattice: ModeLattice, occ: OccupationSpec, weight2) -> float:
    u = lattice.units
    n = occ.occupations(lattice.omega, u)
    terms = lattice.omega[:, None] * (n + 0.5) * np.asarray(weight2)[..., None]
    return float(u.hbar / (lattice.volume * u.epsilon0) * terms.sum())


def variance_pointwise(lattice: ModeLattice, occ: OccupationSpec = OccupationSpec()) -> float:
    """(hbar / V eps0) sum_{k lam} w (n + 1/2); grows without bound with the cutoff."""
    return _sum(lattice, occ, np.ones(lattice.size))


def smeared_mode_weight(mode: Mode, kernel: SmearingKernel) -> float:
    """Field damping factor of one mode under the smearing kernel."""
    return float(kernel.weight(np.linalg.norm(mode.k), mode.omega))


def variance_smeared(lattice: ModeLattice, occ: OccupationSpec, kernel: SmearingKernel) -> float:
    if kernel.pointwise:
        raise ValueError("sigma = 0 is the divergent pointwise case; use variance_pointwise")
    k = np.linalg.norm(lattice.k, axis=1)
    return _sum(lattice, occ, kernel.weight(k, lattice.omega) ** 2)


def variance_from_moments(lattice: ModeLattice, kernel: Optional[SmearingKernel], n, alpha,
                          x=(0.0, 0.0, 0.0), t: float = 0.0) -> float:
    """<E^2> - <E>^2 summed over components, built from state moments.

    For a displaced number state <a> = alpha, <a^2> = alpha^2 and
    <a a* + a* a> = 2 n + 1 + 2 |alpha|^2; the alpha terms cancel between
    <E^2> and <E>^2 mode by mode.
    """
    u = lattice.units
    w = lattice.omega
    kn = np.linalg.norm(lattice.k, axis=1)
    damp = np.ones_like(w) if kernel is None or kernel.pointwise else kernel.weight(kn, w)
    c2 = u.hbar * w / (2 * u.epsilon0 * lattice.volume) * damp**2
    alpha = np.broadcast_to(np.asarray(alpha, dtype=complex), (lattice.size, 2))
    n = np.broadcast_to(np.asarray(n, dtype=float), (lattice.size, 2))
    theta = (lattice.k @ np.asarray(x, dtype=float) - w * t)[:, None]
    ph = np.exp(1j * theta)
    # X = i (a e^{i theta} - a* e^{-i theta}); unit polarization, so components sum to X^2
    second = -(alpha**2 * ph**2 + np.conj(alpha) ** 2 * np.conj(ph) ** 2 - (2 * n + 1 + 2 * np.abs(alpha) ** 2))
    mean = 1j * (alpha * ph - np.conj(alpha) * np.conj(ph))
    return float(np.sum(c2[:, None] * (second.real - (mean**2).real)))


def localized_energy(kernel: SmearingKernel, u: UnitSystem | None = None) -> float:
    """E_sigma = (1/(2 pi)^3) 2 pi hbar c / sigma."""
    u = u or UnitSystem.natural()
    if kernel.pointwise:
        raise ValueError("E_sigma needs sigma > 0")
    return 2 * math.pi * u.hbar * u.c / kernel.sigma / (2 * math.pi) ** 3


def continuum_vacuum_variance(kernel: SmearingKernel, u: UnitSystem | None = None) -> float:
    """(hbar/eps0) int d^3k/(2 pi)^3 2 (c k / 2) e^{-sigma^2 k^2} = hbar c / (4 pi^2 eps0 sigma^4)."""
    u = u or UnitSystem.natural()
    s = kernel.sigma
    if s == 0:
        raise ValueError("pointwise vacuum variance diverges")
    return u.hbar * u.c / (4 * math.pi**2 * u.epsilon0 * s**4)


def continuum_thermal_excess(kernel: SmearingKernel, T: float, u: UnitSystem | None = None) -> float:
    """eps0 sigma^3 times the Planck part of the smeared variance.

    (hbar c sigma^3 / pi^2) int_0^inf k^3 e^{-sigma^2 k^2} / (e^{k sigma_T} - 1) dk.
    """
    u = u or UnitSystem.natural()
    s = kernel.sigma
    sT = u.hbar * u.c / (u.k_B * T)
    # dimensionless q = k sigma
    def f(q):
        if q <= 0:
            return 0.0
        x = q * sT / s
        return q**3 * math.exp(-q * q - x) / -math.expm1(-x)

    val = integrate.quad(f, 0, math.inf, epsabs=0, epsrel=1e-12, limit=400)[0]
    return u.hbar * u.c / (math.pi**2 * s) * val


def thermal_variance_regimes(kernel: SmearingKernel, T: float, u: UnitSystem | None = None) -> dict:
    """Full Planck-weighted eps0 sigma^3 (Delta E_sigma)^2 and the two asymptotic branches."""
    u = u or UnitSystem.natural()
    if not T > 0:
        raise ValueError("temperature must be positive")
    s = kernel.sigma
    sT = u.hbar * u.c / (u.k_B * T)
    Es = localized_energy(kernel, u)
    full = Es + continuum_thermal_excess(kernel, T, u)
    small = Es * (1 + 4 * math.pi**4 * (s / sT) ** 4 / 15)
    large = u.k_B * T * (1 + (sT / s) ** 2 / 8) / (4 * math.pi**1.5)
    ratio = s / sT
    regime = "quantum" if ratio < 1 else "thermal"
    branch = small if regime == "quantum" else large
    return {"value": full, "branch": branch, "regime": regime, "sigma_over_sigma_T": ratio,
            "branch_small_sigma": small, "branch_large_sigma": large,
            "relative_error": abs(branch / full - 1)}


def measured_vacuum_constant(lattice: ModeLattice, kernel: SmearingKernel) -> float:
    """eps0 sigma^3 (Delta E_sigma)^2 / E_sigma on the lattice."""
    u = lattice.units
    var = variance_smeared(lattice, OccupationSpec(), kernel)
    return u.epsilon0 * kernel.sigma**3 * var / localized_energy(kernel, u)


def sweep_sigma(lattice: ModeLattice, sigmas, occ: OccupationSpec = OccupationSpec()) -> list[dict]:
    u = lattice.units
    rows = []
    for s in sigmas:
        ker = SmearingKernel(s, 0.0, u.c)
        var = variance_smeared(lattice, occ, ker)
        rows.append({"sigma": float(s), "variance": var,
                     "eps0_sigma3_var": u.epsilon0 * s**3 * var,
                     "E_sigma": localized_energy(ker, u),
                     "continuum": continuum_vacuum_variance(ker, u)})
    return rows


def sweep_temperature(kernel: SmearingKernel, temperatures, u: UnitSystem | None = None) -> list[dict]:
    rows = []
    for T in temperatures:
        r = thermal_variance_regimes(kernel, float(T), u)
        rows.append({"T": float(T), **{k: v for k, v in r.items() if k != "regime"},
                     "regime": r["regime"]})
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(float(v)) if isinstance(v, (int, float)) else v) for k, v in r.items()})

