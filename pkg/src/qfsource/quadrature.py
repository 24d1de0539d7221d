"""Fixed-node quadrature rules shared by the source and oracle modules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(edges, n_per_panel: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights over consecutive ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(n_per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * x
    weights = half * w
    return nodes.ravel(), weights.ravel()


def split_edges(lo: float, hi: float, breaks=(), max_width: float | None = None) -> np.ndarray:
    """Interval edges from lo to hi including interior breaks; optional panel cap."""
    pts = [lo, *sorted(b for b in breaks if lo < b < hi), hi]
    if max_width is None:
        return np.array(pts)
    out = [lo]
    for a, b in zip(pts[:-1], pts[1:]):
        m = max(1, math.ceil((b - a) / max_width))
        out.extend(np.linspace(a, b, m + 1)[1:])
    return np.array(out)


@dataclass(frozen=True)
class ShellSpec:
    """Node counts for spherical-shell quadrature around a field point."""

    n_r: int = 48
    n_theta: int = 40
    n_phi: int = 40
    panel: float | None = None

    def coarser(self) -> "ShellSpec":
        return ShellSpec(max(8, self.n_r * 2 // 3), max(8, self.n_theta * 2 // 3),
                         max(8, self.n_phi * 2 // 3), self.panel)


def _frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u = axis / np.linalg.norm(axis)
    trial = np.array([1.0, 0.0, 0.0]) if abs(u[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    a = np.cross(u, trial)
    a /= np.linalg.norm(a)
    return u, a, np.cross(u, a)


def shell_nodes(x, center, support: float, spec: ShellSpec = ShellSpec(),
                r_max: float = math.inf, r_breaks=()):
    """Nodes of  int_0^inf dR int dOmega  restricted to a ball.

    The ball (``center``, ``support``) holds the integrand. Returns
    ``(R, Omega, weight)`` with ``R`` (N,), ``Omega`` (N, 3) and weights for
    dR dOmega; multiply by R**2 for a volume integral. Empty arrays when the
    ball lies beyond ``r_max``.
    """
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    rel = center - x
    d = float(np.linalg.norm(rel))
    if d > support * (1 + 1e-12):
        r_lo, r_hi = d - support, d + support
        theta_max = math.asin(min(1.0, support / d))
        u, a, b = _frame(rel)
    else:
        r_lo, r_hi = 0.0, d + support
        theta_max = math.pi
        if d > 0:
            u, a, b = _frame(rel)
        else:
            u, a, b = np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    r_hi = min(r_hi, r_max)
    if r_hi <= r_lo:
        return np.zeros(0), np.zeros((0, 3)), np.zeros(0)
    edges = split_edges(r_lo, r_hi, r_breaks, spec.panel)
    R, wR = panel_nodes(edges, spec.n_r)
    t_edges = [0.0, theta_max]
    if theta_max == math.pi and d > support / 4:
        # off-centre ball around x: the bulk subtends a small cone toward the centre
        t_edges = [0.0, support / (4 * d), math.pi]
    theta, wt = panel_nodes(t_edges, spec.n_theta)
    wt = wt * np.sin(theta)
    phi = 2 * math.pi * np.arange(spec.n_phi) / spec.n_phi
    wp = np.full(spec.n_phi, 2 * math.pi / spec.n_phi)
    st, ct = np.sin(theta)[:, None], np.cos(theta)[:, None]
    dirs = (ct[..., None] * u + st[..., None] * (np.cos(phi)[None, :, None] * a
                                                 + np.sin(phi)[None, :, None] * b))
    dirs = dirs.reshape(-1, 3)
    wang = (wt[:, None] * wp[None, :]).ravel()
    Rg = np.repeat(R, len(wang))
    Og = np.tile(dirs, (len(R), 1))
    W = np.repeat(wR, len(wang)) * np.tile(wang, len(R))
    return Rg, Og, W
