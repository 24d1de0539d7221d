"""Coherent mode amplitudes driven by a classical current, and the field
expectation values rebuilt from them as lattice mode sums.

Amplitudes follow

    alpha_kl(t) = (i/hbar) sqrt(hbar / 2 V eps0 w_k) int_0^t dt' exp(i w_k t') j*(k, t') . eps_kl

and the transverse potential is 2 Re sum_k sqrt(hbar/2 V eps0 w) eps alpha exp(i(k.x - w t)).
The spatially uniform component (k = 0) of the current is not a lattice
mode; its potential is carried separately through two running moments of
the total current so that the box solution stays causal.
"""
from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import QuadratureError, SingularPointError
from .mode_basis import ModeLattice
from .quadrature import panel_nodes, split_edges
from .sources import CurrentSource, UniformCharge


@dataclass(frozen=True)
class QuadratureSpec:
    """Time quadrature: Gauss-Legendre panels, refined by halving until stable."""

    n_per_panel: int = 16
    panels_per_period: float = 1.0
    rel: float = 1e-12
    max_refine: int = 6
    mode_chunk: int = 4096


@dataclass
class ModeAmplitudeSet:
    """alpha[m, lam] for every lattice mode at time ``t``.

    ``q0`` and ``q1`` are int J dt' and int t' J dt' of the total current J,
    which fix the uniform (k = 0) part of the potential.
    """

    lattice: ModeLattice
    t: float
    alphas: np.ndarray
    q0: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q1: np.ndarray = field(default_factory=lambda: np.zeros(3))
    zero_mode: bool = True

    @classmethod
    def vacuum(cls, lattice: ModeLattice, t: float = 0.0) -> "ModeAmplitudeSet":
        return cls(lattice, t, np.zeros((lattice.size, 2), dtype=complex))

    def displaced(self, beta) -> "ModeAmplitudeSet":
        """Add a free coherent offset beta (given at t = 0, interaction picture)."""
        return ModeAmplitudeSet(self.lattice, self.t, self.alphas + np.asarray(beta),
                                self.q0.copy(), self.q1.copy(), self.zero_mode)

    def copy(self) -> "ModeAmplitudeSet":
        return ModeAmplitudeSet(self.lattice, self.t, self.alphas.copy(), self.q0.copy(),
                                self.q1.copy(), self.zero_mode)


# ------------------------------------------------------------ time integrals


def _time_edges(source: CurrentSource, t1: float, t2: float, omega_max: float,
                spec: QuadratureSpec, level: int) -> np.ndarray:
    lo, hi = min(t1, t2), max(t1, t2)
    scales = [2 * math.pi / omega_max / spec.panels_per_period]
    prof = getattr(source, "profile", None) or getattr(getattr(source, "inner", None), "profile", None)
    if prof is not None:
        if getattr(prof, "omega_d", 0):
            scales.append(2 * math.pi / prof.omega_d)
        if getattr(prof, "kind", "") == "bipolar":
            scales.append(prof.tau / 2)
        else:
            scales.append(getattr(prof, "ramp", math.inf) / 2)
    width = min(scales) / 2**level
    edges = split_edges(lo, hi, source.breakpoints, width)
    return edges if t2 >= t1 else edges[::-1]


def _nodes(source, t1, t2, omega_max, spec, level):
    edges = _time_edges(source, t1, t2, omega_max, spec, level)
    if len(edges) < 2 or t1 == t2:
        return np.zeros(0), np.zeros(0)
    return panel_nodes(edges, spec.n_per_panel)


def _refine(compute, spec: QuadratureSpec, what: str):
    """Halve panels until successive results agree.

    ``compute(level)`` returns (value, bound) where bound is the integral of
    the absolute integrand; it sets the scale when the value cancels.
    """
    prev, _ = compute(0)
    for level in range(1, spec.max_refine + 1):
        cur, bound = compute(level)
        scale = max(np.abs(bound).max(initial=0.0), 1e-300)
        if np.abs(cur - prev).max(initial=0.0) <= spec.rel * scale:
            return cur
        prev = cur
    raise QuadratureError(f"{what}: no convergence after {spec.max_refine} halvings")


def _zero_mode_moments(source, t1, t2, omega_max, spec):
    def compute(level):
        tn, wn = _nodes(source, t1, t2, omega_max, spec, level)
        if tn.size == 0:
            return np.zeros((2, 3)), np.zeros((2, 3))
        J = np.stack([source.total_current(t) for t in tn])
        aw = np.abs(wn)
        return (np.stack([wn @ J, (wn * tn) @ J]),
                np.stack([aw @ np.abs(J), (aw * np.abs(tn)) @ np.abs(J)]))

    return _refine(compute, spec, "zero-mode moments")


def _window_integrals(source, profile, omegas, t1, t2, spec):
    """int_{t1}^{t2} exp(i w t) s(t) dt for each unique frequency."""
    def compute(level):
        tn, wn = _nodes(source, t1, t2, omegas.max(), spec, level)
        if tn.size == 0:
            return np.zeros(len(omegas), dtype=complex), np.zeros(1)
        s = np.asarray(profile(tn), dtype=float) * wn
        out = np.empty(len(omegas), dtype=complex)
        for a in range(0, len(omegas), 256):
            out[a:a + 256] = np.exp(1j * np.outer(omegas[a:a + 256], tn)) @ s
        return out, np.abs(s).sum(keepdims=True)

    return _refine(compute, spec, "mode time integrals")


def _generic_integrals(source, lattice, t1, t2, spec):
    """int exp(i w t) conj(j(k, t)) dt for every mode, shape (M, 3)."""
    k, w = lattice.k, lattice.omega

    def compute(level):
        tn, wn = _nodes(source, t1, t2, w.max(), spec, level)
        out = np.zeros((lattice.size, 3), dtype=complex)
        bound = np.zeros((lattice.size, 3))
        for a in range(0, lattice.size, spec.mode_chunk):
            sl = slice(a, a + spec.mode_chunk)
            for t, wt in zip(tn, wn):
                jk = source.current_fourier(k[sl], t)
                out[sl] += wt * np.exp(1j * w[sl] * t)[:, None] * np.conj(jk)
                bound[sl] += abs(wt) * np.abs(jk)
        return out, bound

    return _refine(compute, spec, "generic mode integrals")


def _increment(lattice: ModeLattice, source: CurrentSource, t1: float, t2: float,
               spec: QuadratureSpec) -> np.ndarray:
    u = lattice.units
    pref = 1j / u.hbar * np.sqrt(u.hbar / (2 * lattice.volume * u.epsilon0 * lattice.omega))
    fac = source.factorized()
    if fac is not None:
        shape, profile = fac
        omegas, inverse = lattice.unique_omega
        win = _window_integrals(source, profile, omegas, t1, t2, spec)[inverse]
        vec = np.conj(shape(lattice.k)) * win[:, None]
    else:
        vec = _generic_integrals(source, lattice, t1, t2, spec)
    return pref[:, None] * np.einsum("mi,mli->ml", vec, lattice.eps)


def evolve_amplitudes(lattice: ModeLattice, source: CurrentSource, t: float,
                      spec: QuadratureSpec = QuadratureSpec(),
                      start: Optional[ModeAmplitudeSet] = None,
                      zero_mode: bool = True) -> ModeAmplitudeSet:
    """Amplitudes at ``t``, either from the vacuum at 0 or continued from ``start``.

    Negative ``t`` is allowed and keeps the int_0^t orientation, which is what
    the time-reversal checks need.
    """
    if start is None:
        start = ModeAmplitudeSet.vacuum(lattice, 0.0)
        start.zero_mode = zero_mode
    if start.lattice is not lattice and start.alphas.shape[0] != lattice.size:
        raise ValueError("amplitude set and lattice disagree on the mode set")
    t1 = start.t
    out = start.copy()
    out.t = float(t)
    if t == t1:
        return out
    out.alphas = out.alphas + _increment(lattice, source, t1, t, spec)
    if out.zero_mode:
        m = _zero_mode_moments(source, t1, t, float(lattice.omega.max()), spec)
        out.q0 = out.q0 + m[0]
        out.q1 = out.q1 + m[1]
    return out


def amplitude_history(lattice: ModeLattice, source: CurrentSource, times: Sequence[float],
                      spec: QuadratureSpec = QuadratureSpec()) -> list[ModeAmplitudeSet]:
    """Amplitudes at increasing ``times``, each continued from the previous one."""
    times = list(times)
    if any(b < a for a, b in zip(times[:-1], times[1:])):
        raise ValueError("history times must be non-decreasing")
    out, cur = [], None
    for t in times:
        cur = evolve_amplitudes(lattice, source, t, spec, start=cur)
        out.append(cur)
    return out


# ------------------------------------------------------------- mode sums


def _a_vectors(amps: ModeAmplitudeSet) -> np.ndarray:
    lat = amps.lattice
    u = lat.units
    norm = np.sqrt(u.hbar / (2 * lat.volume * u.epsilon0 * lat.omega))
    a = np.einsum("ml,mli->mi", amps.alphas, lat.eps)
    return (norm * np.exp(-1j * lat.omega * amps.t))[:, None] * a


def _fuse_real_part(lat: ModeLattice, c: np.ndarray) -> np.ndarray:
    """Half-lattice coefficients F with 2 Re sum_all c e^{ikx} = Re sum_half F e^{ikx}."""
    h, p = lat.half, lat.partner[lat.half]
    return 2 * (c[h] + np.conj(c[p]))


def _fuse_symmetric(lat: ModeLattice, c: np.ndarray) -> np.ndarray:
    """Half-lattice F with sum_all c e^{ikx} = Re sum_half F e^{ikx} (c_{-k} = conj c_k)."""
    h, p = lat.half, lat.partner[lat.half]
    return c[h] + np.conj(c[p])


class _PhaseSum:
    """Re sum_half F_m exp(i k_m . x) for many points, built from 1-D phase tables."""

    def __init__(self, lattice: ModeLattice, points, threads: int = 1, chunk: int = 256):
        self.lat = lattice
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.threads = max(1, int(threads))
        self.chunk = chunk
        nm = lattice.n_max
        self.idx = lattice.n[lattice.half] + nm
        self.kq = 2 * math.pi * np.arange(-nm, nm + 1) / lattice.L

    def _phases(self, pts):
        tab = [np.exp(1j * np.outer(pts[:, d], self.kq)) for d in range(3)]
        i = self.idx
        return tab[0][:, i[:, 0]] * tab[1][:, i[:, 1]] * tab[2][:, i[:, 2]]

    def __call__(self, F: np.ndarray) -> np.ndarray:
        F = np.asarray(F)
        flat = F.reshape(F.shape[0], -1)
        n = len(self.points)
        starts = list(range(0, n, self.chunk))

        def work(a):
            return np.real(self._phases(self.points[a:a + self.chunk]) @ flat)

        if self.threads > 1 and len(starts) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                parts = list(ex.map(work, starts))
        else:
            parts = [work(a) for a in starts]
        out = np.concatenate(parts, axis=0) if parts else np.zeros((0, flat.shape[1]))
        return out.reshape((n,) + F.shape[1:])


def _zero_A(amps):
    if not amps.zero_mode:
        return np.zeros(3)
    u = amps.lattice.units
    return (amps.t * amps.q0 - amps.q1) / (u.epsilon0 * amps.lattice.volume)


def _zero_E(amps):
    if not amps.zero_mode:
        return np.zeros(3)
    u = amps.lattice.units
    return -amps.q0 / (u.epsilon0 * amps.lattice.volume)


def coefficients(amps: ModeAmplitudeSet) -> dict:
    """Fused half-lattice coefficients of A_T, E_T = -dA_T/dt and B = curl A_T."""
    lat = amps.lattice
    a = _a_vectors(amps)
    return {
        "A": _fuse_real_part(lat, a),
        "E_T": _fuse_real_part(lat, 1j * lat.omega[:, None] * a),
        "B": _fuse_real_part(lat, 1j * np.cross(lat.k, a)),
    }


def coulomb_coefficients(lattice: ModeLattice, source: CurrentSource, t: float) -> np.ndarray:
    """Fused coefficients of -grad phi for the periodic Coulomb potential."""
    u = lattice.units
    rho = source.charge_fourier(lattice.k, t)
    k2 = np.einsum("mi,mi->m", lattice.k, lattice.k)
    c = -1j * lattice.k * (np.conj(rho) / (u.epsilon0 * k2 * lattice.volume))[:, None]
    return _fuse_symmetric(lattice, c)


def _check_singular(source, points):
    if isinstance(source, UniformCharge) and source.width == 0:
        raise SingularPointError("field of an ideal point charge is singular at its position")


def expectation_A(amps: ModeAmplitudeSet, lattice: ModeLattice, x, threads: int = 1) -> np.ndarray:
    """<A_T>(x, t) as a real (N, 3) array, or (3,) for a single point."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = _PhaseSum(lattice, pts, threads)(coefficients(amps)["A"]) + _zero_A(amps)
    return out[0] if np.ndim(x) == 1 else out


def expectation_A_complex(amps: ModeAmplitudeSet, lattice: ModeLattice, x) -> np.ndarray:
    """Unfused full-lattice sum; its imaginary part measures pair cancellation."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    a = _a_vectors(amps)
    c = a + np.conj(a[lattice.partner])
    return np.exp(1j * pts @ lattice.k.T) @ c


def expectation_E_modesum(amps: ModeAmplitudeSet, lattice: ModeLattice, source: CurrentSource,
                          x, threads: int = 1, coulomb: bool = True) -> np.ndarray:
    """<E> = -d<A_T>/dt - grad phi, both parts on the same lattice."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if coulomb:
        _check_singular(source, pts)
    F = coefficients(amps)["E_T"]
    if coulomb:
        F = F + coulomb_coefficients(lattice, source, amps.t)
    out = _PhaseSum(lattice, pts, threads)(F) + _zero_E(amps)
    return out[0] if np.ndim(x) == 1 else out


def expectation_B_modesum(amps: ModeAmplitudeSet, lattice: ModeLattice, x, threads: int = 1) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    out = _PhaseSum(lattice, pts, threads)(coefficients(amps)["B"])
    return out[0] if np.ndim(x) == 1 else out


def divergence(lattice: ModeLattice, F: np.ndarray, x, threads: int = 1) -> np.ndarray:
    """Analytic divergence of a fused vector mode sum."""
    k = lattice.k[lattice.half]
    return _PhaseSum(lattice, x, threads)(1j * np.einsum("mi,mi->m", k, F))


def field_energy(amps: ModeAmplitudeSet, lattice: ModeLattice | None = None) -> float:
    """sum hbar w |alpha|^2 over lattice modes, zero-point energy dropped."""
    lat = lattice or amps.lattice
    return float(lat.units.hbar * np.sum(lat.omega[:, None] * np.abs(amps.alphas) ** 2))


# --------------------------------------------------------- wave equation


def lattice_longitudinal_current(lattice: ModeLattice, source: CurrentSource, x, t: float,
                                 threads: int = 1) -> np.ndarray:
    """k (k . j) / k^2 summed over the truncated lattice (periodic j_L)."""
    jk = source.current_fourier(lattice.k, t)
    kh = lattice.khat
    c = kh * np.einsum("mi,mi->m", kh, np.conj(jk))[:, None] / lattice.volume
    return _PhaseSum(lattice, x, threads)(_fuse_symmetric(lattice, c))


def wave_equation_residual(history: Sequence[ModeAmplitudeSet], lattice: ModeLattice,
                           source: CurrentSource, x, t: Optional[float] = None,
                           threads: int = 1) -> dict:
    """d^2<A_T>/dt^2 - c^2 lap <A_T> - j_T/eps0 at the points ``x``.

    The time derivative is a 5-point central difference over an equally
    spaced ``history`` centred on ``t``; the Laplacian is applied mode by mode.
    j_T is the real-space current minus the lattice longitudinal part.
    """
    hist = list(history)
    if len(hist) < 5:
        raise ValueError("wave residual needs at least five equally spaced amplitude sets")
    if t is None:
        t = hist[len(hist) // 2].t
    ts = np.array([h.t for h in hist])
    i = int(np.argmin(np.abs(ts - t)))
    if i < 2 or i + 2 >= len(hist):
        raise ValueError("amplitude history does not bracket t with two samples on each side")
    sub = hist[i - 2:i + 3]
    h = np.diff([s.t for s in sub])
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ValueError("amplitude history must be equally spaced around t")
    h = h[0]
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    ps = _PhaseSum(lattice, pts, threads)
    A = [ps(coefficients(s)["A"]) + _zero_A(s) for s in sub]
    d2 = (-A[0] + 16 * A[1] - 30 * A[2] + 16 * A[3] - A[4]) / (12 * h * h)
    k2 = np.einsum("mi,mi->m", lattice.k[lattice.half], lattice.k[lattice.half])
    lap = ps(-k2[:, None] * coefficients(sub[2])["A"])
    u = lattice.units
    jT = source.current(pts, sub[2].t) - lattice_longitudinal_current(lattice, source, pts, sub[2].t, threads)
    res = d2 - u.c**2 * lap - jT / u.epsilon0
    scale = float(np.abs(jT / u.epsilon0).max())
    worst = float(np.abs(res).max())
    return {"residual": res, "max_abs": worst, "scale": scale,
            "relative": worst / scale if scale > 0 else worst, "t": sub[2].t}


# ------------------------------------------------------------- snapshots


def box_grid(L: float, n: int, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """n^3 points spanning [-L/2, L/2] in each direction, x fastest varying last."""
    r = np.linspace(-L / 2, L / 2, n)
    g = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    return g + np.asarray(center, dtype=float)


@dataclass
class FieldSnapshot:
    t: float
    grid: np.ndarray
    A: np.ndarray
    E: np.ndarray
    B: np.ndarray
    dims: Optional[tuple] = None

    COLUMNS = ("x", "y", "z", "Ax", "Ay", "Az", "Ex", "Ey", "Ez", "Bx", "By", "Bz")

    def table(self) -> np.ndarray:
        return np.hstack([self.grid, self.A, self.E, self.B])

    def to_csv(self, path) -> None:
        np.savetxt(path, self.table(), delimiter=",", header=",".join(self.COLUMNS),
                   comments="", fmt="%.17g")

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "dims": self.dims,
                           **{k: getattr(self, k).tolist() for k in ("grid", "A", "E", "B")}})

    def to_binary(self, path) -> None:
        """uint32 header length, JSON header (t, dims, columns, rows), then little-endian float64 rows."""
        tab = np.ascontiguousarray(self.table(), dtype="<f8")
        head = json.dumps({"t": self.t, "dims": self.dims, "columns": list(self.COLUMNS),
                           "rows": len(tab)}).encode()
        with open(path, "wb") as fh:
            fh.write(struct.pack("<I", len(head)))
            fh.write(head)
            fh.write(tab.tobytes())

    @classmethod
    def from_binary(cls, path) -> "FieldSnapshot":
        with open(path, "rb") as fh:
            (n,) = struct.unpack("<I", fh.read(4))
            head = json.loads(fh.read(n))
            tab = np.frombuffer(fh.read(), dtype="<f8").reshape(head["rows"], len(head["columns"]))
        dims = tuple(head["dims"]) if head["dims"] else None
        return cls(head["t"], tab[:, 0:3], tab[:, 3:6], tab[:, 6:9], tab[:, 9:12], dims)


def snapshot(amps: ModeAmplitudeSet, lattice: ModeLattice, source: CurrentSource, grid,
             threads: int = 1, dims=None) -> FieldSnapshot:
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    _check_singular(source, pts)
    co = coefficients(amps)
    F = np.stack([co["A"], co["E_T"] + coulomb_coefficients(lattice, source, amps.t), co["B"]], axis=1)
    out = _PhaseSum(lattice, pts, threads)(F)
    return FieldSnapshot(amps.t, pts, out[:, 0] + _zero_A(amps), out[:, 1] + _zero_E(amps),
                         out[:, 2], dims)
