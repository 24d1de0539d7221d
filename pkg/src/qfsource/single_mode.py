"""One forced oscillator mode: quadrature means, variances and the c-number phase.

All results come from the closed forms for the interaction-picture evolution
of a linearly driven oscillator; only first and second moments of the
initial state enter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class InitialState:
    """Initial pure state, carried as its first and second quadrature moments.

    Moments are stored in a frequency- and hbar-free form and scaled on
    demand: ``q = <Q> sqrt(omega/hbar)``, ``p = <P> / sqrt(hbar omega)``,
    ``vq = Var(Q) omega/hbar``, ``vp = Var(P)/(hbar omega)`` and
    ``cov = (<PQ+QP> - 2<Q><P>)/hbar``.
    """

    kind: str
    q: float = 0.0
    p: float = 0.0
    vq: float = 0.5
    vp: float = 0.5
    cov: float = 0.0
    alpha0: complex = 0j
    n: int = 0

    @classmethod
    def coherent(cls, alpha0: complex) -> "InitialState":
        a = complex(alpha0)
        return cls("coherent", q=math.sqrt(2) * a.real, p=math.sqrt(2) * a.imag, alpha0=a)

    @classmethod
    def fock(cls, n: int) -> "InitialState":
        if n < 0 or int(n) != n:
            raise ValueError("Fock occupation must be a non-negative integer")
        return cls("fock", vq=n + 0.5, vp=n + 0.5, n=int(n))

    @classmethod
    def superposition01(cls) -> "InitialState":
        # (|0> + |1>)/sqrt(2): <a> = 1/2, <a^2> = 0, <a*a> = 1/2
        return cls("superposition01", q=1 / math.sqrt(2), p=0.0, vq=0.5, vp=1.0, cov=0.0)

    @classmethod
    def from_moments(cls, mean_q, mean_p, var_q, var_p, sym_cov, omega, hbar=1.0) -> "InitialState":
        """User-supplied moments in physical units at frequency ``omega``."""
        return cls(
            "moments",
            q=mean_q * math.sqrt(omega / hbar),
            p=mean_p / math.sqrt(hbar * omega),
            vq=var_q * omega / hbar,
            vp=var_p / (hbar * omega),
            cov=sym_cov / hbar,
        )

    def moments(self, omega: float, hbar: float = 1.0) -> dict:
        return {
            "mean_Q": self.q * math.sqrt(hbar / omega),
            "mean_P": self.p * math.sqrt(hbar * omega),
            "var_Q": self.vq * hbar / omega,
            "var_P": self.vp * hbar * omega,
            "sym_cov": self.cov * hbar,
        }


@dataclass(frozen=True)
class DriveFunction:
    """Real force f(t) on the quadrature equation, zero outside ``support``.

    ``sin_integral``/``cos_integral``, when given, return the closed forms of
    int_0^t f(s) sin(omega (t - s)) ds and the cosine analogue.
    """

    f: Callable[[float], float]
    support: tuple[float, float] = (0.0, math.inf)
    sin_integral: Optional[Callable[[float, float], float]] = None
    cos_integral: Optional[Callable[[float, float], float]] = None
    breakpoints: Sequence[float] = ()

    def __call__(self, t):
        t0, t1 = self.support
        inside = (np.asarray(t) >= t0) & (np.asarray(t) <= t1)
        return np.where(inside, self.f(t), 0.0)

    @classmethod
    def zero(cls) -> "DriveFunction":
        return cls(lambda t: 0.0 * np.asarray(t), sin_integral=lambda w, t: 0.0,
                   cos_integral=lambda w, t: 0.0)

    @classmethod
    def constant(cls, f0: float, t_on: float = 0.0) -> "DriveFunction":
        def s(w, t):
            tau = max(t - t_on, 0.0)
            return f0 * (1 - math.cos(w * tau)) / w

        def c(w, t):
            tau = max(t - t_on, 0.0)
            return f0 * math.sin(w * tau) / w

        return cls(lambda t: f0 + 0.0 * np.asarray(t), support=(t_on, math.inf),
                   sin_integral=s, cos_integral=c)

    @classmethod
    def from_g(cls, g: Callable[[float], float], omega: float, hbar: float = 1.0) -> "DriveFunction":
        """Inverse of g(t) = -f(t) sqrt(hbar / (2 omega))."""
        scale = -math.sqrt(2 * omega / hbar)
        return cls(lambda t: scale * np.asarray(g(t)))

    def to_g(self, omega: float, hbar: float = 1.0) -> Callable:
        scale = -math.sqrt(hbar / (2 * omega))
        return lambda t: scale * np.asarray(self(t))


def _check(omega, t):
    if not omega > 0:
        raise ValueError("mode frequency must be positive")
    if t < 0:
        raise ValueError("evolution starts at t = 0; negative times are not defined here")


def _oscillatory(f: DriveFunction, omega: float, t: float, kind: str) -> float:
    """int_0^t f(s) sin|cos(omega (t - s)) ds."""
    closed = f.sin_integral if kind == "sin" else f.cos_integral
    if closed is not None:
        return float(closed(omega, t))
    lo = max(0.0, f.support[0])
    hi = min(t, f.support[1])
    if hi <= lo:
        return 0.0
    pts = sorted(p for p in f.breakpoints if lo < p < hi)
    edges = [lo, *pts, hi]
    # sin(w(t-s)) = sin(wt)cos(ws) - cos(wt)sin(ws); QAWO handles each weight.
    ic = is_ = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        ic += integrate.quad(f.f, a, b, weight="cos", wvar=omega, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
        is_ += integrate.quad(f.f, a, b, weight="sin", wvar=omega, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    st, ct = math.sin(omega * t), math.cos(omega * t)
    if kind == "sin":
        return st * ic - ct * is_
    return ct * ic + st * is_


def evolve_mean_Q(state: InitialState, omega: float, f: DriveFunction, t: float,
                  hbar: float = 1.0) -> float:
    _check(omega, t)
    m = state.moments(omega, hbar)
    homogeneous = m["mean_Q"] * math.cos(omega * t) + m["mean_P"] / omega * math.sin(omega * t)
    return homogeneous + _oscillatory(f, omega, t, "sin") / omega


def evolve_mean_P(state: InitialState, omega: float, f: DriveFunction, t: float,
                  hbar: float = 1.0) -> float:
    _check(omega, t)
    m = state.moments(omega, hbar)
    homogeneous = m["mean_P"] * math.cos(omega * t) - m["mean_Q"] * omega * math.sin(omega * t)
    return homogeneous + _oscillatory(f, omega, t, "cos")


def variance_Q(state: InitialState, omega: float, t, hbar: float = 1.0):
    """Var Q(t); deliberately takes no drive, the force drops out exactly."""
    if not omega > 0:
        raise ValueError("mode frequency must be positive")
    m = state.moments(omega, hbar)
    c, s = np.cos(omega * np.asarray(t)), np.sin(omega * np.asarray(t))
    return m["var_Q"] * c**2 + m["var_P"] * s**2 / omega**2 + c * s / omega * m["sym_cov"]


def variance_P(state: InitialState, omega: float, t, hbar: float = 1.0):
    if not omega > 0:
        raise ValueError("mode frequency must be positive")
    m = state.moments(omega, hbar)
    c, s = np.cos(omega * np.asarray(t)), np.sin(omega * np.asarray(t))
    return m["var_P"] * c**2 + m["var_Q"] * omega**2 * s**2 - omega * c * s * m["sym_cov"]


def symmetrized_covariance(state: InitialState, omega: float, t, hbar: float = 1.0):
    """<PQ+QP>(t) - 2<Q>(t)<P>(t), also force independent."""
    m = state.moments(omega, hbar)
    c, s = np.cos(omega * np.asarray(t)), np.sin(omega * np.asarray(t))
    return (m["sym_cov"] * (c**2 - s**2)
            + 2 * c * s * (m["var_P"] / omega - omega * m["var_Q"]))


def cnumber_phase(omega: float, g: Callable[[float], float], t: float, hbar: float = 1.0,
                  breakpoints: Sequence[float] = ()) -> float:
    """phi(t) = (1/hbar) int_0^t dt' int_0^t' dt'' g(t') g(t'') sin(omega (t' - t'')).

    The sign follows from U = exp(i phi/hbar) exp(-(i/hbar) int H_I) with
    H_I(t) = g(t)(a e^{-i omega t} + a* e^{i omega t}). The inner integral is
    reduced with sin(w(t'-t'')) = sin(wt')cos(wt'') - cos(wt')sin(wt'').
    """
    if t <= 0:
        return 0.0
    edges = [0.0, *sorted(p for p in breakpoints if 0 < p < t), t]

    def cumulative(weight):
        # running int_0^s g(u) weight(omega u) du, evaluated lazily per s
        def F(s):
            total = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                if a >= s:
                    break
                total += integrate.quad(g, a, min(b, s), weight=weight, wvar=omega,
                                        epsabs=1e-14, epsrel=1e-12, limit=400)[0]
            return total
        return F

    Fc, Fs = cumulative("cos"), cumulative("sin")

    def outer(s):
        return g(s) * (math.sin(omega * s) * Fc(s) - math.cos(omega * s) * Fs(s))

    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(outer, a, b, epsabs=1e-13, epsrel=1e-10, limit=400)[0]
    return total / hbar


def kick_phase(omega: float, kicks: Sequence[tuple[float, float]], hbar: float = 1.0) -> float:
    """phi for g(t) = sum_j g_j delta(t - t_j): exact double sum over ordered pairs."""
    kicks = sorted(kicks)
    phi = 0.0
    for j, (tj, gj) in enumerate(kicks):
        for ti, gi in kicks[:j]:
            phi += gj * gi * math.sin(omega * (tj - ti))
    return phi / hbar


def uncertainty_product(state: InitialState, omega: float, t, hbar: float = 1.0):
    """Var Q Var P - (sym_cov/2)^2; bounded below by (hbar/2)^2."""
    return (variance_Q(state, omega, t, hbar) * variance_P(state, omega, t, hbar)
            - (symmetrized_covariance(state, omega, t, hbar) / 2) ** 2)
