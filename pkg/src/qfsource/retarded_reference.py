"""Retarded-integral oracle for <E> and <B>, plus causality and time-reversal verdicts.

The oracle never touches the mode lattice. Fields are shell quadratures
around the field point x with the source evaluated at t' = t - R/c; the
stored analytic derivatives of the source (dj/dt, grad rho, curl j) are
used directly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOLERANCES, SingularPointError, UnitSystem
from .quadrature import ShellSpec, gauss_legendre, shell_nodes
from .sources import CurrentSource, UniformCharge, time_reverse

KERNELS = ("causal", "advanced")


# ------------------------------------------------------------ Green function


@dataclass(frozen=True)
class GreenFunction:
    """G(r, t) = [delta(t - r/c) - delta(t + r/c)] / (4 pi c^2 r) as a map on time integrals.

    ``apply(h, r, t)`` returns int_0^t dt' G(r, t - t') h(t'), which keeps the
    retarded branch for t > 0 and the (sign-flipped) advanced one for t < 0.
    """

    c: float = 1.0

    def apply(self, h, r: float, t: float, domain=(0.0, math.inf)) -> float:
        if not r > 0:
            raise SingularPointError("Green function weight needs r > 0")
        if t == 0:
            return 0.0
        tp = t - r / self.c if t > 0 else t + r / self.c
        lo, hi = (0.0, t) if t > 0 else (t, 0.0)
        if not (lo <= tp <= hi and domain[0] <= tp <= domain[1]):
            return 0.0
        return float(h(tp)) / (4 * math.pi * self.c**2 * r)

    def ball_integral(self, f, t: float, n_theta: int = 32, n_phi: int = 32) -> float:
        """int d^3x f(x) int_0^t dt' G(x, t - t') = |t| times the mean of f on |x| = c|t|."""
        if t == 0:
            return 0.0
        x, w = gauss_legendre(n_theta)
        phi = 2 * math.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1 - x**2)
        dirs = np.stack([np.outer(st, np.cos(phi)), np.outer(st, np.sin(phi)),
                         np.outer(x, np.ones(n_phi))], axis=-1).reshape(-1, 3)
        weights = np.repeat(w, n_phi) * (2 * math.pi / n_phi)
        vals = np.asarray(f(self.c * abs(t) * dirs), dtype=float)
        return float(abs(t) * (weights * vals).sum() / (4 * math.pi))


def green_function_weight(r: float, t: float, h=lambda s: 1.0, c: float = 1.0) -> float:
    """int_0^t dt' G(r, t - t') h(t')."""
    return GreenFunction(c).apply(h, r, t)


# ----------------------------------------------------------- retarded fields


@dataclass
class RetardedField:
    x: np.ndarray
    t: float
    E: np.ndarray
    B: np.ndarray
    meta: dict = field(default_factory=dict)


def _radial_window(source: CurrentSource, t: float, c: float, kernel: str):
    """(r_max, r_breaks, sign) for the retarded-time map t' = t - sign R / c."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    breaks = source.breakpoints
    if kernel == "advanced":
        return math.inf, [c * (b - t) for b in breaks if b > t], -1.0
    if t >= 0:
        start = max(0.0, source.t_on)
        return c * max(t - start, 0.0), [c * (t - b) for b in breaks if 0 < b < t], 1.0
    stop = 0.0
    return c * (stop - t), [c * (b - t) for b in breaks if t < b < stop], -1.0


def _check_point(source, x):
    if isinstance(source, UniformCharge) and source.width == 0:
        if np.linalg.norm(np.asarray(x) - source.x0) == 0:
            raise SingularPointError("field point on the point charge")


def _shell(source, x, t, spec, u, kernel):
    r_max, r_breaks, sgn = _radial_window(source, t, u.c, kernel)
    if r_max <= 0:
        return None
    R, Om, W = shell_nodes(x, source.center, source.support_radius, spec, r_max, r_breaks)
    if R.size == 0:
        return None
    return R, x + R[:, None] * Om, t - sgn * R / u.c, W


def retarded_fields(source: CurrentSource, x, t: float, spec: ShellSpec = ShellSpec(),
                    u: UnitSystem | None = None, kernel: str = "causal") -> RetardedField:
    """E and B at one point from the retarded (or test-only advanced) integrals."""
    u = u or UnitSystem.natural()
    x = np.asarray(x, dtype=float)
    _check_point(source, x)
    sh = _shell(source, x, t, spec, u, kernel)
    meta = {"kernel": kernel, "spec": [spec.n_r, spec.n_theta, spec.n_phi]}
    if sh is None:
        return RetardedField(x, t, np.zeros(3), np.zeros(3), {**meta, "nodes": 0})
    R, P, tr, W = sh
    wr = W * R  # R^2 dR dOmega / R
    jdot = source.current_dt(P, tr)
    grho = source.grad_charge(P, tr)
    curl = source.curl_current(P, tr)
    E = -(wr @ jdot) / (4 * math.pi * u.epsilon0 * u.c**2) - (wr @ grho) / (4 * math.pi * u.epsilon0)
    B = u.mu0 / (4 * math.pi) * (wr @ curl)
    return RetardedField(x, t, E, B, {**meta, "nodes": int(R.size)})


def retarded_E(source, x, t, spec: ShellSpec = ShellSpec(), u=None, kernel="causal"):
    return retarded_fields(source, x, t, spec, u, kernel).E


def retarded_B(source, x, t, spec: ShellSpec = ShellSpec(), u=None, kernel="causal"):
    return retarded_fields(source, x, t, spec, u, kernel).B


def retarded_grid(source, points, t, spec: ShellSpec = ShellSpec(), u=None, kernel="causal",
                  threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(E, B) arrays of shape (N, 3); point order is preserved for any thread count."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    def one(p):
        f = retarded_fields(source, p, t, spec, u, kernel)
        return f.E, f.B

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            res = list(ex.map(one, pts))
    else:
        res = [one(p) for p in pts]
    if not res:
        return np.zeros((0, 3)), np.zeros((0, 3))
    E, B = zip(*res)
    return np.array(E), np.array(B)


# ------------------------------------------------------------------ verdicts


def min_image_distance(points, center, L: float | None) -> np.ndarray:
    d = np.atleast_2d(points) - np.asarray(center, dtype=float)
    if L is not None:
        d = d - L * np.round(d / L)
    return np.linalg.norm(d, axis=1)


def cone_partition(points, source: CurrentSource, t: float, u: UnitSystem | None = None,
                   L: float | None = None, tail_tol: float = 1e-8) -> dict:
    """Boolean masks for points safely inside / outside the switch-on light cone.

    A shell of half-width ``source.support_at(tail_tol)`` around the cone
    front is left unclassified: smeared sources have Gaussian tails, so the
    front is only sharp to that accuracy.
    """
    if source.steady:
        raise ValueError("steady sources have no switch-on front; causality test undefined")
    u = u or UnitSystem.natural()
    r = min_image_distance(points, source.center, L)
    front = u.c * max(t - max(source.t_on, 0.0), 0.0)
    margin = source.support_at(tail_tol)
    return {"inside": r < front - margin, "outside": r > front + margin,
            "front": front, "margin": margin}


def causality_verdict(E, points, source: CurrentSource, t: float, u: UnitSystem | None = None,
                      L: float | None = None, lightcone_rel: float = DEFAULT_TOLERANCES.lightcone_rel,
                      tail_tol: float = 1e-8) -> dict:
    """Max |E| outside the cone relative to the peak inside; pass iff below lightcone_rel."""
    part = cone_partition(points, source, t, u, L, tail_tol)
    mag = np.linalg.norm(np.atleast_2d(E), axis=1)
    inside = mag[part["inside"]]
    outside = mag[part["outside"]]
    peak = float(inside.max()) if inside.size else 0.0
    leak = float(outside.max()) if outside.size else 0.0
    ratio = leak / peak if peak > 0 else (0.0 if leak == 0 else math.inf)
    return {
        "analysis": "causality",
        "passed": bool(ratio < lightcone_rel),
        "leak_ratio": ratio,
        "max_outside": leak,
        "peak_inside": peak,
        "threshold": lightcone_rel,
        "cone": {"front_radius": part["front"], "margin": part["margin"],
                 "n_inside": int(part["inside"].sum()), "n_outside": int(part["outside"].sum()),
                 "t": t},
    }


def time_reversal_verdict(source: CurrentSource, grid, times, spec: ShellSpec = ShellSpec(),
                          u: UnitSystem | None = None, rel: float = 1e-6) -> dict:
    """Check E'(x,t) = E(x,-t) and B'(x,t) = -B(x,-t) for the reversed source."""
    rev = time_reverse(source)
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    worst_e = worst_b = 0.0
    scale_e = scale_b = 0.0
    for t in np.atleast_1d(times):
        E1, B1 = retarded_grid(rev, pts, float(t), spec, u)
        E0, B0 = retarded_grid(source, pts, float(-t), spec, u)
        worst_e = max(worst_e, float(np.abs(E1 - E0).max()))
        worst_b = max(worst_b, float(np.abs(B1 + B0).max()))
        scale_e = max(scale_e, float(np.abs(E0).max()))
        scale_b = max(scale_b, float(np.abs(B0).max()))
    re = worst_e / scale_e if scale_e > 0 else worst_e
    rb = worst_b / scale_b if scale_b > 0 else worst_b
    return {"analysis": "timereversal", "passed": bool(re <= rel and rb <= rel),
            "E_residual": re, "B_residual": rb, "E_scale": scale_e, "B_scale": scale_b,
            "tolerance": rel, "times": [float(t) for t in np.atleast_1d(times)]}
