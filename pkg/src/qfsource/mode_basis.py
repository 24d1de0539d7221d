"""Periodic-box plane-wave lattice with transverse linear polarizations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import UnitSystem, DEFAULT_TOLERANCES

_ZHAT = np.array([0.0, 0.0, 1.0])
_XHAT = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Mode:
    k: np.ndarray
    omega: float
    eps1: np.ndarray
    eps2: np.ndarray

    @property
    def khat(self) -> np.ndarray:
        return self.k / np.linalg.norm(self.k)


def _is_positive_half(n: np.ndarray) -> np.ndarray:
    """Lexicographic half-space selector: exactly one of n, -n is chosen."""
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    return (nx > 0) | ((nx == 0) & (ny > 0)) | ((nx == 0) & (ny == 0) & (nz > 0))


def linear_polarizations(k: np.ndarray, n: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic real polarization pair for an array of wavevectors.

    eps1 is parallel to z x k_h where k_h is the representative of the pair
    {k, -k} in the positive half space, so that eps1(-k) = eps1(k) and
    eps2(-k) = -eps2(k). Wavevectors along z use x as eps1.
    """
    k = np.atleast_2d(np.asarray(k, dtype=float))
    if n is None:
        n = k
    khat = k / np.linalg.norm(k, axis=1)[:, None]
    sign = np.where(_is_positive_half(np.asarray(n)), 1.0, -1.0)
    kh = khat * sign[:, None]
    e1 = np.cross(_ZHAT, kh)
    norm = np.linalg.norm(e1, axis=1)
    along_z = norm < 1e-12
    e1[along_z] = _XHAT
    norm[along_z] = 1.0
    e1 /= norm[:, None]
    e2 = np.cross(khat, e1)
    return e1, e2


@dataclass(frozen=True, eq=False)
class ModeLattice:
    """All wavevectors 2 pi n / L with |n_i| <= n_max, k = 0 excluded.

    Arrays are stored column-wise for vectorized mode sums:
    ``n`` (M, 3) integer, ``k`` (M, 3), ``omega`` (M,), ``eps`` (M, 2, 3).
    """

    L: float
    n_max: int
    units: UnitSystem
    n: np.ndarray
    k: np.ndarray
    omega: np.ndarray
    eps: np.ndarray

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def size(self) -> int:
        return len(self.omega)

    @cached_property
    def khat(self) -> np.ndarray:
        return self.k / np.linalg.norm(self.k, axis=1)[:, None]

    @cached_property
    def half(self) -> np.ndarray:
        """Indices of modes in the positive half space."""
        return np.flatnonzero(_is_positive_half(self.n))

    @cached_property
    def partner(self) -> np.ndarray:
        """partner[i] is the index of the mode with wavevector -k_i."""
        side = 2 * self.n_max + 1
        flat = lambda m: ((m[:, 0] + self.n_max) * side + (m[:, 1] + self.n_max)) * side + (m[:, 2] + self.n_max)
        lookup = np.full(side**3, -1, dtype=np.int64)
        lookup[flat(self.n)] = np.arange(self.size)
        return lookup[flat(-self.n)]

    @cached_property
    def unique_omega(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct frequencies and the inverse index map onto modes."""
        n2 = np.einsum("ij,ij->i", self.n, self.n)
        vals, inverse = np.unique(n2, return_inverse=True)
        return self.units.c * 2 * math.pi * np.sqrt(vals) / self.L, inverse

    @property
    def modes(self) -> list[Mode]:
        return [Mode(self.k[i], float(self.omega[i]), self.eps[i, 0], self.eps[i, 1])
                for i in range(self.size)]

    def mode(self, i: int) -> Mode:
        return Mode(self.k[i], float(self.omega[i]), self.eps[i, 0], self.eps[i, 1])

    def index_of(self, n) -> int:
        hit = np.flatnonzero((self.n == np.asarray(n)).all(axis=1))
        if hit.size == 0:
            raise KeyError(f"mode {tuple(n)} not on lattice")
        return int(hit[0])

    def spec(self) -> dict:
        return {"L": self.L, "n_max": self.n_max, "units": self.units.mode.value}

    def to_json(self) -> str:
        return json.dumps(self.spec())

    @classmethod
    def from_json(cls, text: str, units: UnitSystem | None = None) -> "ModeLattice":
        data = json.loads(text)
        if units is None:
            units = UnitSystem.from_name(data.get("units", "natural"))
        return build_lattice(data["L"], data["n_max"], units)


def build_lattice(L: float, n_max: int, u: UnitSystem | None = None) -> ModeLattice:
    if u is None:
        u = UnitSystem.natural()
    if not L > 0:
        raise ValueError("box length must be positive")
    if int(n_max) != n_max or n_max < 1:
        raise ValueError("n_max must be an integer >= 1 (n_max = 0 leaves an empty lattice)")
    n_max = int(n_max)
    r = np.arange(-n_max, n_max + 1)
    n = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    n = n[(n != 0).any(axis=1)]
    k = 2 * math.pi * n / L
    omega = u.c * np.linalg.norm(k, axis=1)
    e1, e2 = linear_polarizations(k, n)
    eps = np.stack([e1, e2], axis=1)
    for arr in (n, k, omega, eps):
        arr.setflags(write=False)
    return ModeLattice(float(L), n_max, u, n, k, omega, eps)


def polarization_sum(mode: Mode) -> np.ndarray:
    """Sum over the polarization pair of conj(eps_i) eps_j."""
    eps = np.stack([mode.eps1, mode.eps2]).astype(complex)
    return np.real(np.einsum("li,lj->ij", eps.conj(), eps))


def _check_orthonormal(e1, e2, tol):
    gram = np.array([[np.vdot(a, b) for b in (e1, e2)] for a in (e1, e2)])
    if not np.allclose(gram, np.eye(2), atol=tol, rtol=0):
        raise ValueError("polarization pair is not orthonormal")


def to_circular(eps1, eps2, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Helicity vectors (eps1 +/- i eps2)/sqrt(2)."""
    e1 = np.asarray(eps1, dtype=complex)
    e2 = np.asarray(eps2, dtype=complex)
    _check_orthonormal(e1, e2, tol)
    s = 1 / math.sqrt(2)
    return s * (e1 + 1j * e2), s * (e1 - 1j * e2)


def amplitude_to_circular(a1, a2) -> tuple[complex, complex]:
    """Annihilation amplitudes in the helicity basis: (a1 -/+ i a2)/sqrt(2)."""
    s = 1 / math.sqrt(2)
    return s * (a1 - 1j * a2), s * (a1 + 1j * a2)


def transverse_projector(khat: np.ndarray) -> np.ndarray:
    khat = np.asarray(khat, dtype=float)
    return np.eye(3) - np.einsum("...i,...j->...ij", khat, khat)


def check_lattice(lattice: ModeLattice, rel: float = DEFAULT_TOLERANCES.rel) -> dict:
    """Numerical audit of the lattice invariants; returns the worst residuals."""
    eps = lattice.eps
    P = np.einsum("mli,mlj->mij", eps, eps)
    proj_err = np.abs(P - transverse_projector(lattice.khat)).max()
    trans_err = np.abs(np.einsum("mi,mli->ml", lattice.khat, eps)).max()
    p = lattice.partner
    parity_err = max(np.abs(eps[p, 0] - eps[:, 0]).max(), np.abs(eps[p, 1] + eps[:, 1]).max())
    return {
        "projector": float(proj_err),
        "transversality": float(trans_err),
        "parity": float(parity_err),
        "closed_under_negation": bool((p >= 0).all()),
        "ok": bool(proj_err < rel and trans_err < rel and parity_err < rel and (p >= 0).all()),
    }
