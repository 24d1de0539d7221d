"""Classical conserved currents, their Fourier transforms and Helmholtz split.

Conventions: positions are arrays with a trailing axis of length 3, times
are scalars. ``current_fourier(k, t)`` is  int d^3x exp(i k.x) j(x, t).
Built-in models store their analytic space and time derivatives so the
retarded oracle never differentiates numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import SingularPointError, UnitSystem
from .quadrature import ShellSpec, shell_nodes

# ---------------------------------------------------------------- time profiles


def smootherstep(x):
    """C2 ramp 6x^5 - 15x^4 + 10x^3 on [0, 1] with derivatives 0..2."""
    x = np.clip(x, 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x**2)
    ds = 30 * x**2 * (1 - x) ** 2
    d2s = 60 * x * (1 - x) * (1 - 2 * x)
    return s, ds, d2s


@dataclass(frozen=True)
class TimeProfile:
    """Scalar s(t) with analytic derivatives; the dipole moment is p0 s(t).

    ``kind`` is one of ``switched`` (ramp then held oscillation, or a held
    static value when ``omega_d`` is 0), ``pulse`` (ramp up, hold, ramp
    down) or ``bipolar`` (smooth, active on both sides of t = 0 with
    s(0) = s'(0) = 0).
    """

    kind: str = "switched"
    omega_d: float = 0.0
    t_on: float = 0.0
    ramp: float = 1.0
    hold: float = math.inf
    tau: float = 1.0
    asym: float = 0.5

    def __post_init__(self):
        if self.kind not in ("switched", "pulse", "bipolar"):
            raise ValueError(f"unknown time profile {self.kind!r}")
        if self.kind != "bipolar" and not self.ramp > 0:
            raise ValueError("ramp must be > 0: a sudden switch-on violates rho(x,0)=0 and j_L(x,0)=0")
        if self.kind == "bipolar" and not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def steady(self) -> bool:
        return False

    @property
    def breakpoints(self) -> tuple[float, ...]:
        if self.kind == "bipolar":
            return ()
        if self.kind == "switched":
            return (self.t_on, self.t_on + self.ramp)
        t1 = self.t_on + self.ramp
        t2 = t1 + self.hold
        return (self.t_on, t1, t2, t2 + self.ramp)

    @property
    def active_from(self) -> float:
        return -math.inf if self.kind == "bipolar" else self.t_on

    def _envelope(self, tau):
        if self.kind == "switched":
            s, ds, d2s = smootherstep(tau / self.ramp)
            return s, ds / self.ramp, d2s / self.ramp**2
        up, dup, d2up = smootherstep(tau / self.ramp)
        down, ddown, d2down = smootherstep((2 * self.ramp + self.hold - tau) / self.ramp)
        return (up * down, (dup * down - up * ddown) / self.ramp,
                (d2up * down - 2 * dup * ddown + up * d2down) / self.ramp**2)

    def __call__(self, t, order: int = 0):
        """Return d^order s / dt^order for order in 0..3."""
        t = np.asarray(t, dtype=float)
        if self.kind == "bipolar":
            return self._bipolar(t, order)
        tau = t - self.t_on
        env = self._envelope(tau)
        w = self.omega_d
        if w == 0.0:
            if order == 3:
                raise NotImplementedError("third derivative of a held ramp")
            out = env[order]
        else:
            sn, cs = np.sin(w * tau), np.cos(w * tau)
            e, de, d2e = env
            if order == 0:
                out = e * sn
            elif order == 1:
                out = de * sn + w * e * cs
            elif order == 2:
                out = d2e * sn + 2 * w * de * cs - w * w * e * sn
            else:
                raise NotImplementedError("third derivative not stored")
        return np.where(tau > 0, out, 0.0)

    def _bipolar(self, t, order):
        # s(t) = (t/tau)^2 exp(-(t/tau)^2) (1 + asym sin(omega_d t))
        u = t / self.tau
        base = [u**2 * np.exp(-u**2)]
        e = np.exp(-u**2)
        base.append(e * (2 * u - 2 * u**3) / self.tau)
        base.append(e * (2 - 10 * u**2 + 4 * u**4) / self.tau**2)
        w, a = self.omega_d, self.asym
        m = [1 + a * np.sin(w * t), a * w * np.cos(w * t), -a * w * w * np.sin(w * t)]
        if order > 2:
            raise NotImplementedError("third derivative not stored")
        coeff = [[1], [1, 1], [1, 2, 1]][order]
        return sum(c * base[order - i] * m[i] for i, c in enumerate(coeff))

    def reversed(self) -> "ReversedProfile":
        return ReversedProfile(self)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "omega_d": self.omega_d, "t_on": self.t_on, "ramp": self.ramp}
        if self.kind == "pulse":
            d["hold"] = self.hold
        if self.kind == "bipolar":
            d.update(tau=self.tau, asym=self.asym)
        return d


@dataclass(frozen=True)
class ReversedProfile:
    """s'(t) = s(-t)."""

    inner: TimeProfile

    def __call__(self, t, order: int = 0):
        return (-1) ** order * self.inner(-np.asarray(t, dtype=float), order)

    @property
    def breakpoints(self):
        return tuple(sorted(-b for b in self.inner.breakpoints))

    @property
    def active_from(self):
        return -math.inf

    def reversed(self):
        return self.inner


# ------------------------------------------------------------------- sources


class CurrentSource:
    """A prescribed conserved current j(x, t) with charge density rho(x, t).

    Subclasses implement the real-space fields, their analytic derivatives
    and the spatial Fourier transforms. ``steady`` sources have no switch-on
    front and are exempt from light-cone tests.
    """

    steady: bool = False
    t_on: float = 0.0
    center: np.ndarray = np.zeros(3)
    support_radius: float = 0.0

    breakpoints: tuple = ()

    def current(self, x, t):
        raise NotImplementedError

    def charge(self, x, t):
        raise NotImplementedError

    def current_dt(self, x, t):
        raise NotImplementedError

    def charge_dt(self, x, t):
        return -self.div_current(x, t)

    def grad_charge(self, x, t):
        raise NotImplementedError

    def div_current(self, x, t):
        raise NotImplementedError

    def curl_current(self, x, t):
        raise NotImplementedError

    def current_fourier(self, k, t):
        raise NotImplementedError

    def charge_fourier(self, k, t):
        raise NotImplementedError

    def total_current(self, t) -> np.ndarray:
        """Volume integral of j, i.e. the k -> 0 limit of the transform."""
        return np.real(self.current_fourier(np.zeros((1, 3)), t)[0])

    def factorized(self):
        """``(shape, profile)`` with j(k, t) = shape(k) * profile(t), or None.

        ``shape`` maps (M, 3) wavevectors to (M, 3) complex vectors and
        ``profile`` is a real scalar function of time.
        """
        return None

    def support_at(self, tol: float) -> float:
        """Radius around ``center`` outside which densities fall below tol * peak."""
        return self.support_radius

    def to_dict(self) -> dict:
        raise NotImplementedError


def _dot(a, b):
    return (a * b).sum(axis=-1)


def _gaussian(r2, w):
    return np.exp(-0.5 * r2 / w**2) / (2 * math.pi * w * w) ** 1.5


@dataclass(eq=False)
class GaussianDipole(CurrentSource):
    """Electric dipole p(t) = p0 s(t) spread over a normalized Gaussian of width w.

    j = g(x) dp/dt and rho = -p . grad g, so continuity holds identically.
    """

    p0: np.ndarray
    profile: TimeProfile
    width: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        if not self.width > 0:
            raise ValueError("dipole width must be positive")
        self.t_on = self.profile.active_from
        self.support_radius = 8.5 * self.width

    @property
    def breakpoints(self):
        return self.profile.breakpoints

    def support_at(self, tol):
        return self.width * math.sqrt(2 * math.log(1 / tol))

    def _g(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return r, _gaussian(np.einsum("...i,...i->...", r, r), self.width)

    def moment(self, t, order=0):
        """d^order p / dt^order; array t gives one moment per entry."""
        return self.p0 * np.asarray(self.profile(t, order))[..., None]

    def current(self, x, t):
        _, g = self._g(x)
        return g[..., None] * self.moment(t, 1)

    def current_dt(self, x, t):
        _, g = self._g(x)
        return g[..., None] * self.moment(t, 2)

    def charge(self, x, t):
        r, g = self._g(x)
        return g * _dot(r, self.moment(t)) / self.width**2

    def charge_dt(self, x, t):
        r, g = self._g(x)
        return g * _dot(r, self.moment(t, 1)) / self.width**2

    def grad_charge(self, x, t):
        r, g = self._g(x)
        p = self.moment(t)
        w2 = self.width**2
        return (g / w2)[..., None] * (p - _dot(r, p)[..., None] * r / w2)

    def div_current(self, x, t):
        r, g = self._g(x)
        return -g * _dot(r, self.moment(t, 1)) / self.width**2

    def curl_current(self, x, t):
        r, g = self._g(x)
        return -(g / self.width**2)[..., None] * np.cross(r, self.moment(t, 1))

    def shape_fourier(self, k):
        k = np.asarray(k, dtype=float)
        k2 = np.einsum("...i,...i->...", k, k)
        return np.exp(1j * (k @ self.center) - 0.5 * k2 * self.width**2)

    def current_fourier(self, k, t):
        return self.shape_fourier(k)[..., None] * self.moment(t, 1)

    def charge_fourier(self, k, t):
        return 1j * _dot(np.asarray(k, dtype=float), self.moment(t)) * self.shape_fourier(k)

    def total_current(self, t):
        return self.moment(t, 1)

    def factorized(self):
        return (lambda k: self.shape_fourier(k)[..., None] * self.p0,
                lambda t: self.profile(t, 1))

    def to_dict(self):
        return {"kind": "dipole", "p0": self.p0.tolist(), "width": self.width,
                "center": self.center.tolist(), "profile": self.profile.to_dict()}


@dataclass(eq=False)
class GaussianLoop(CurrentSource):
    """Divergence-free current j = curl(m(t) g(x)): a smeared magnetic dipole."""

    m0: np.ndarray
    profile: TimeProfile
    width: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.m0 = np.asarray(self.m0, dtype=float)
        self.center = np.asarray(self.center, dtype=float)
        if not self.width > 0:
            raise ValueError("loop width must be positive")
        self.t_on = self.profile.active_from
        self.support_radius = 8.5 * self.width

    @property
    def breakpoints(self):
        return self.profile.breakpoints

    def support_at(self, tol):
        return self.width * math.sqrt(2 * math.log(1 / tol)) + self.width

    def _g(self, x):
        r = np.asarray(x, dtype=float) - self.center
        return r, _gaussian(np.einsum("...i,...i->...", r, r), self.width)

    def current(self, x, t, order=0):
        r, g = self._g(x)
        m = self.m0 * np.asarray(self.profile(t, order))[..., None]
        return -(g / self.width**2)[..., None] * np.cross(r, m)

    def current_dt(self, x, t):
        return self.current(x, t, order=1)

    def charge(self, x, t):
        return np.zeros(np.shape(x)[:-1])

    def charge_dt(self, x, t):
        return self.charge(x, t)

    def grad_charge(self, x, t):
        return np.zeros(np.shape(x))

    def div_current(self, x, t):
        return np.zeros(np.shape(x)[:-1])

    def curl_current(self, x, t):
        r, g = self._g(x)
        m = self.m0 * np.asarray(self.profile(t))[..., None]
        w2 = self.width**2
        r2 = np.einsum("...i,...i->...", r, r)
        return g[..., None] * (_dot(r, m)[..., None] * r / w2**2 + m * (2 / w2 - r2 / w2**2)[..., None])

    def shape_fourier(self, k):
        k = np.asarray(k, dtype=float)
        k2 = np.einsum("...i,...i->...", k, k)
        return np.exp(1j * (k @ self.center) - 0.5 * k2 * self.width**2)

    def current_fourier(self, k, t):
        k = np.asarray(k, dtype=float)
        m = self.m0 * np.asarray(self.profile(t))[..., None]
        return -1j * self.shape_fourier(k)[..., None] * np.cross(k, m)

    def charge_fourier(self, k, t):
        return np.zeros(np.shape(k)[:-1], dtype=complex)

    def factorized(self):
        return (lambda k: -1j * self.shape_fourier(k)[..., None] * np.cross(np.asarray(k, float), self.m0),
                lambda t: self.profile(t))

    def to_dict(self):
        return {"kind": "loop", "m0": self.m0.tolist(), "width": self.width,
                "center": self.center.tolist(), "profile": self.profile.to_dict()}


@dataclass(eq=False)
class UniformCharge(CurrentSource):
    """Charge q in uniform motion, optionally smeared to a Gaussian of width w.

    Active for all times, hence ``steady``. width = 0 is an ideal point
    charge whose real-space densities are singular at its position.
    """

    q: float
    v: np.ndarray
    width: float = 0.0
    c: float = 1.0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(3))

    steady = True

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.x0 = np.asarray(self.x0, dtype=float)
        if not self.width >= 0:
            raise ValueError("width must be non-negative")
        if np.linalg.norm(self.v) >= self.c:
            raise ValueError("charge speed must stay below c")
        self.t_on = -math.inf
        self.support_radius = 8.5 * self.width

    @property
    def center(self):
        return self.x0

    def position(self, t):
        return self.x0 + self.v * np.asarray(t, dtype=float)[..., None]

    def _density(self, x, t, deriv=0):
        r = np.asarray(x, dtype=float) - self.position(t)
        r2 = np.einsum("...i,...i->...", r, r)
        if self.width == 0:
            if np.any(r2 == 0):
                raise SingularPointError("evaluation on the point charge")
            return r, np.zeros_like(r2)
        return r, _gaussian(r2, self.width)

    def charge(self, x, t):
        return self.q * self._density(x, t)[1]

    def current(self, x, t):
        return self.charge(x, t)[..., None] * self.v

    def grad_charge(self, x, t):
        r, g = self._density(x, t)
        w2 = self.width**2 if self.width else 1.0
        return -self.q * (g / w2)[..., None] * r

    def charge_dt(self, x, t):
        return -_dot(self.grad_charge(x, t), self.v)

    def current_dt(self, x, t):
        return self.charge_dt(x, t)[..., None] * self.v

    def div_current(self, x, t):
        return _dot(self.grad_charge(x, t), self.v)

    def curl_current(self, x, t):
        return np.cross(self.grad_charge(x, t), self.v)

    def charge_fourier(self, k, t):
        k = np.asarray(k, dtype=float)
        k2 = np.einsum("...i,...i->...", k, k)
        return self.q * np.exp(1j * _dot(k, self.position(t)) - 0.5 * k2 * self.width**2)

    def current_fourier(self, k, t):
        return self.charge_fourier(k, t)[..., None] * self.v

    def to_dict(self):
        return {"kind": "uniform_charge", "q": self.q, "v": self.v.tolist(),
                "width": self.width, "x0": self.x0.tolist()}


class TimeReversed(CurrentSource):
    """j'(x, t) = -j(x, -t), rho'(x, t) = rho(x, -t)."""

    def __init__(self, inner: CurrentSource):
        self.inner = inner
        self.steady = inner.steady
        self.center = inner.center
        self.support_radius = inner.support_radius
        self.t_on = -math.inf if not math.isinf(inner.t_on) else inner.t_on

    @property
    def breakpoints(self):
        return tuple(sorted(-b for b in self.inner.breakpoints))

    def support_at(self, tol):
        return self.inner.support_at(tol)

    def current(self, x, t):
        return -self.inner.current(x, -t)

    def current_dt(self, x, t):
        return self.inner.current_dt(x, -t)

    def charge(self, x, t):
        return self.inner.charge(x, -t)

    def charge_dt(self, x, t):
        return -self.inner.charge_dt(x, -t)

    def grad_charge(self, x, t):
        return self.inner.grad_charge(x, -t)

    def div_current(self, x, t):
        return -self.inner.div_current(x, -t)

    def curl_current(self, x, t):
        return -self.inner.curl_current(x, -t)

    def current_fourier(self, k, t):
        return -self.inner.current_fourier(k, -t)

    def charge_fourier(self, k, t):
        return self.inner.charge_fourier(k, -t)

    def total_current(self, t):
        return -self.inner.total_current(-t)

    def factorized(self):
        fac = self.inner.factorized()
        if fac is None:
            return None
        shape, prof = fac
        return shape, lambda t: -prof(-t)

    def to_dict(self):
        return {"kind": "time_reversed", "inner": self.inner.to_dict()}


def time_reverse(source: CurrentSource) -> CurrentSource:
    if isinstance(source, TimeReversed):
        return source.inner
    return TimeReversed(source)


# ------------------------------------------------------------- constructors


def make_switched_dipole(p0, omega_d: float, ramp: float, center=(0.0, 0.0, 0.0),
                         width: float = 0.05, t_on: float = 0.0) -> GaussianDipole:
    if not ramp > 0:
        raise ValueError("ramp must be > 0 to keep rho(x,0) = 0 and j_L(x,0) = 0")
    return GaussianDipole(np.asarray(p0, float), TimeProfile("switched", omega_d, t_on, ramp),
                          width, np.asarray(center, float))


def make_uniform_charge(q: float, v, width: float = 0.0, u: UnitSystem | None = None,
                        x0=(0.0, 0.0, 0.0)) -> UniformCharge:
    c = (u or UnitSystem.natural()).c
    v = np.asarray(v, dtype=float)
    if np.linalg.norm(v) >= c:
        raise ValueError("|v| >= c: no physical uniformly moving charge")
    return UniformCharge(q, v, width, c, np.asarray(x0, float))


def source_from_dict(d: dict, u: UnitSystem | None = None) -> CurrentSource:
    kind = d.get("kind")
    if kind == "dipole" or kind == "switched_dipole":
        if "profile" in d:
            prof = TimeProfile(**d["profile"])
        else:
            prof = TimeProfile("switched", d.get("omega_d", 0.0), d.get("t_on", 0.0), d["ramp"])
        return GaussianDipole(np.asarray(d["p0"], float), prof, d.get("width", 0.05),
                              np.asarray(d.get("center", (0, 0, 0)), float))
    if kind == "loop":
        return GaussianLoop(np.asarray(d["m0"], float), TimeProfile(**d["profile"]),
                            d.get("width", 0.05), np.asarray(d.get("center", (0, 0, 0)), float))
    if kind == "uniform_charge":
        return make_uniform_charge(d["q"], d["v"], d.get("width", 0.0), u, d.get("x0", (0, 0, 0)))
    if kind == "time_reversed":
        return TimeReversed(source_from_dict(d["inner"], u))
    raise ValueError(f"unknown source kind {kind!r}")


# ----------------------------------------------------------- Helmholtz split


def transverse_project(jk, khat) -> np.ndarray:
    """j - khat (khat . j); khat must be a unit vector."""
    khat = np.asarray(khat, dtype=float)
    if not np.allclose(np.linalg.norm(khat, axis=-1), 1.0, rtol=0, atol=1e-12):
        raise ValueError("khat must have unit length")
    jk = np.asarray(jk)
    return jk - khat * np.sum(khat * jk, axis=-1, keepdims=True)


def _shell_integral(source, x, spec, kernel):
    R, Om, W = shell_nodes(x, source.center, source.support_radius, spec)
    if R.size == 0:
        return np.zeros(3)
    return kernel(R, Om, W)


def _singular_guard(source, x):
    if isinstance(source, UniformCharge) and source.width == 0:
        raise SingularPointError("Helmholtz split of an ideal point charge is singular")


def longitudinal_current(source: CurrentSource, x, t: float, spec: ShellSpec = ShellSpec(64, 48, 48)):
    """j_L(x) = -(1/4 pi) grad int d^3x' div j(x') / |x - x'|.

    Evaluated as -(1/4 pi) int dR dOmega Omega div j(x + R Omega), which is
    the same integral after differentiating under the sign; the 1/R^2 kernel
    cancels against the shell measure.
    """
    _singular_guard(source, x)
    x = np.asarray(x, dtype=float)

    def kern(R, Om, W):
        dj = source.div_current(x + R[:, None] * Om, t)
        return -(W * dj) @ Om / (4 * math.pi)

    return _shell_integral(source, x, spec, kern)


def transverse_current(source: CurrentSource, x, t: float, spec: ShellSpec = ShellSpec(64, 48, 48)):
    """j_T(x) = (1/4 pi) curl curl int d^3x' j(x')/|x - x'| via the curl of j."""
    _singular_guard(source, x)
    x = np.asarray(x, dtype=float)

    def kern(R, Om, W):
        cj = source.curl_current(x + R[:, None] * Om, t)
        return (W[:, None] * np.cross(Om, cj)).sum(axis=0) / (4 * math.pi)

    return _shell_integral(source, x, spec, kern)


def scalar_potential(source: CurrentSource, x, t: float, u: UnitSystem | None = None,
                     spec: ShellSpec = ShellSpec(64, 48, 48)) -> float:
    """Free-space Coulomb potential of rho at time t."""
    u = u or UnitSystem.natural()
    x = np.asarray(x, dtype=float)
    R, Om, W = shell_nodes(x, source.center, source.support_radius, spec)
    if R.size == 0:
        return 0.0
    rho = source.charge(x + R[:, None] * Om, t)
    return float((W * R * rho).sum() / (4 * math.pi * u.epsilon0))


def coulomb_field(source: CurrentSource, x, t: float, u: UnitSystem | None = None,
                  spec: ShellSpec = ShellSpec(64, 48, 48)) -> np.ndarray:
    """-grad phi, with the gradient moved onto rho."""
    u = u or UnitSystem.natural()
    x = np.asarray(x, dtype=float)
    R, Om, W = shell_nodes(x, source.center, source.support_radius, spec)
    if R.size == 0:
        return np.zeros(3)
    g = source.grad_charge(x + R[:, None] * Om, t)
    return -((W * R)[:, None] * g).sum(axis=0) / (4 * math.pi * u.epsilon0)


# ------------------------------------------------------------- conservation


@dataclass
class ConservationReport:
    max_residual: float
    scale: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance * self.scale

    def to_dict(self):
        return {"passed": self.passed, "max_residual": self.max_residual,
                "scale": self.scale, "tolerance": self.tolerance}


def check_conservation(source: CurrentSource, sample_points, times, rel: float = 1e-6,
                       h: Optional[float] = None) -> ConservationReport:
    """Central-difference residual of d(rho)/dt + div j at every sample.

    Both terms come from the real-space ``charge`` and ``current`` only, so
    the check is independent of any stored analytic derivatives. ``scale``
    is the largest magnitude of d(rho)/dt or of any single partial dj_i/dx_i.
    """
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if h is None:
        h = 1e-4 * max(getattr(source, "width", 0.0) or 1.0, 1e-12)
    worst, scale = 0.0, 0.0
    eye = np.eye(3)
    for t in np.atleast_1d(times):
        ht = h
        drho = (source.charge(pts, t + ht) - source.charge(pts, t - ht)) / (2 * ht)
        terms = [(source.current(pts + h * eye[i], t)[:, i] - source.current(pts - h * eye[i], t)[:, i]) / (2 * h)
                 for i in range(3)]
        worst = max(worst, float(np.abs(drho + sum(terms)).max()))
        # individual partials set the scale; their sum cancels for solenoidal currents
        scale = max(scale, float(np.abs(drho).max()), *(float(np.abs(d).max()) for d in terms))
    return ConservationReport(worst, scale if scale > 0 else 1.0, rel)
