"""Unit systems, physical constants and the shared tolerance policy."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import scipy.constants as const


class QFSourceError(Exception):
    """Base class for all package errors."""


class SingularPointError(QFSourceError):
    """Raised when an observable is requested on a source singularity."""


class UnitModeError(QFSourceError):
    pass


class ThresholdError(QFSourceError):
    """A kinematic threshold (Cherenkov emission, angle range) is violated."""


class QuadratureError(QFSourceError):
    """A quadrature failed to reach its requested resolution."""


class UnitMode(str, Enum):
    SI = "si"
    NATURAL = "natural"


@dataclass(frozen=True)
class UnitSystem:
    """Speed of light, vacuum permittivity and reduced Planck constant.

    ``k_B`` rides along for the thermal variance calculations. In natural
    mode every constant is exactly one.
    """

    c: float = 1.0
    epsilon0: float = 1.0
    hbar: float = 1.0
    k_B: float = 1.0
    mode: UnitMode = UnitMode.NATURAL

    def __post_init__(self):
        object.__setattr__(self, "mode", UnitMode(self.mode))
        for name in ("c", "epsilon0", "hbar", "k_B"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.mode is UnitMode.NATURAL:
            if (self.c, self.epsilon0, self.hbar, self.k_B) != (1.0, 1.0, 1.0, 1.0):
                raise ValueError("natural units require c = epsilon0 = hbar = k_B = 1")

    @property
    def mu0(self) -> float:
        return 1.0 / (self.epsilon0 * self.c**2)

    @classmethod
    def natural(cls) -> "UnitSystem":
        return cls()

    @classmethod
    def si(cls, **overrides) -> "UnitSystem":
        """SI constants from ``scipy.constants``; keyword overrides allowed."""
        values = dict(c=const.c, epsilon0=const.epsilon_0, hbar=const.hbar, k_B=const.k)
        values.update(overrides)
        return cls(mode=UnitMode.SI, **values)

    @classmethod
    def from_name(cls, name: str, **overrides) -> "UnitSystem":
        mode = UnitMode(name.lower())
        if mode is UnitMode.SI:
            return cls.si(**overrides)
        if overrides:
            raise ValueError("natural units do not accept constant overrides")
        return cls.natural()

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "c": self.c, "epsilon0": self.epsilon0,
                "hbar": self.hbar, "k_B": self.k_B}


# Physical data that only make sense in SI; natural-mode callers supply
# dimensionless ratios instead.
ELEMENTARY_CHARGE = const.e
ELECTRON_MASS = const.m_e
BOHR_RADIUS = const.physical_constants["Bohr radius"][0]


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-10
    abs: float = 1e-300
    lightcone_rel: float = 1e-3

    def __post_init__(self):
        for name in ("rel", "abs", "lightcone_rel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be strictly positive")
        if not self.rel < 1:
            raise ValueError("relative tolerance must be < 1")

    def with_overrides(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT_TOLERANCES = Tolerances()


def fine_structure_constant(u: UnitSystem, e: float = ELEMENTARY_CHARGE) -> float:
    """Return e^2 / (4 pi epsilon0 hbar c)."""
    if u.mode is not UnitMode.SI:
        raise UnitModeError("the fine-structure constant needs a physical charge (SI mode)")
    return e * e / (4.0 * math.pi * u.epsilon0 * u.hbar * u.c)
