"""Radial interaction kernels, their moments and the sphere constants.

A kernel is ``eta(xi) = |xi|**w * J(|xi|)`` on ``R^n`` with ``n in {1, 2}``.
Every limit constant of the non-local energies factors into a radial moment
of ``J`` and an integral over the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .errors import DomainError, UnsupportedError
from .families import PhiSpec

TAIL_MASS = 1e-12
PROFILES = ("exponential", "gaussian", "indicator", "tabulated")


def _radius_for_tail(profile: str, a: float) -> float:
    """Smallest R with relative tail of ``rho**(a-1) J(rho)`` below TAIL_MASS."""
    if profile == "exponential":
        tail = lambda R: special.gammaincc(a, R)
    else:
        tail = lambda R: special.gammaincc(a / 2.0, R * R)
    hi = 1.0
    while tail(hi) > TAIL_MASS:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tail(mid) > TAIL_MASS:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


@dataclass(frozen=True)
class Kernel:
    """Radial kernel ``eta(xi) = |xi|**weight * J(|xi|)`` in dimension ``n``.

    Parameters
    ----------
    profile : str
        ``indicator`` (``J = 1`` on ``[0, r0]``), ``exponential``
        (``exp(-rho)``), ``gaussian`` (``exp(-rho**2)``) or ``tabulated``
        (piecewise linear through ``knots``/``values``, zero beyond).
    r0 : float
        Support radius of the indicator profile.
    weight : float
        Exponent of the ``|xi|`` prefactor.
    n : int
        Ambient dimension, 1 or 2.
    """

    profile: str = "indicator"
    r0: float = 1.0
    weight: float = 0.0
    n: int = 2
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise UnsupportedError(f"unknown kernel profile {self.profile!r}")
        if self.n not in (1, 2):
            raise UnsupportedError(f"dimension {self.n} is not supported (n in {{1, 2}})")
        if self.weight < 0:
            raise DomainError("kernel weight exponent must be non-negative")
        if self.profile == "indicator" and not self.r0 > 0:
            raise DomainError("indicator radius must be positive")
        if self.profile == "tabulated":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if k.size < 2 or k.size != v.size or k[0] != 0.0 or np.any(np.diff(k) <= 0):
                raise DomainError("tabulated profile needs increasing knots starting at 0")
            if np.any(v < 0) or not np.any(v > 0):
                raise DomainError("tabulated profile must be non-negative and not identically 0")

    @classmethod
    def indicator(cls, r0: float = 1.0, weight: float = 0.0, n: int = 2) -> "Kernel":
        return cls("indicator", r0=float(r0), weight=float(weight), n=int(n))

    @classmethod
    def exponential(cls, weight: float = 0.0, n: int = 2) -> "Kernel":
        return cls("exponential", weight=float(weight), n=int(n))

    @classmethod
    def gaussian(cls, weight: float = 0.0, n: int = 2) -> "Kernel":
        return cls("gaussian", weight=float(weight), n=int(n))

    @classmethod
    def tabulated(cls, knots: Sequence[float], values: Sequence[float],
                  weight: float = 0.0, n: int = 2) -> "Kernel":
        return cls("tabulated", knots=tuple(map(float, knots)),
                   values=tuple(map(float, values)), weight=float(weight), n=int(n))

    @property
    def compact(self) -> bool:
        return self.profile in ("indicator", "tabulated")

    @property
    def radius(self) -> float:
        """Truncation radius of ``eta`` (tail mass below 1e-12 if not compact)."""
        return self.moment_radius(self.n + self.weight)

    def moment_radius(self, alpha: float) -> float:
        if self.profile == "indicator":
            return self.r0
        if self.profile == "tabulated":
            return self.knots[-1]
        return _radius_for_tail(self.profile, alpha)

    def profile_at(self, rho):
        """``J(rho)``."""
        x = np.asarray(rho, dtype=float)
        if self.profile == "indicator":
            out = np.where(x <= self.r0, 1.0, 0.0)
        elif self.profile == "exponential":
            out = np.exp(-x)
        elif self.profile == "gaussian":
            out = np.exp(-x * x)
        else:
            out = np.interp(x, self.knots, self.values, right=0.0)
        return out if np.ndim(rho) else float(out)

    def __call__(self, xi):
        """``eta`` evaluated at points ``xi`` (last axis holds coordinates)."""
        x = np.asarray(xi, dtype=float)
        rho = np.abs(x) if self.n == 1 and x.ndim <= 1 else np.linalg.norm(x, axis=-1)
        return np.asarray(rho) ** self.weight * self.profile_at(rho)

    def scaled(self, c: float) -> "Kernel":
        """Kernel with ``J`` multiplied by ``c`` (tabulated profiles only)."""
        if self.profile != "tabulated":
            raise UnsupportedError("only tabulated profiles can be rescaled")
        return Kernel.tabulated(self.knots, [v * c for v in self.values], self.weight, self.n)

    def describe(self) -> str:
        if self.profile == "indicator":
            return f"indicator:{self.r0!r}"
        if self.profile == "tabulated":
            return "tabulated:" + ",".join(f"{k!r}:{v!r}" for k, v in zip(self.knots, self.values))
        return self.profile


def j_alpha(k: Kernel, alpha: float) -> float:
    """Radial moment ``int_0^inf rho**(alpha-1) J(rho) d rho``.

    Adaptive quadrature on ``[0, R]`` with relative tolerance 1e-10, where
    ``R`` truncates the tail of this particular moment below 1e-12.
    """
    if not alpha >= 1:
        raise DomainError(f"moments are defined for alpha >= 1, got {alpha}")
    R = k.moment_radius(alpha)
    points = list(k.knots[1:-1]) if k.profile == "tabulated" else None
    val, _ = integrate.quad(lambda r: r ** (alpha - 1.0) * k.profile_at(r), 0.0, R,
                            epsabs=0.0, epsrel=1e-10, limit=500, points=points)
    return float(val)


def c_pn(p: float, n: int) -> float:
    """``int_{S^{n-1}} |<v, e1>|**p dH^{n-1}(v)``."""
    if not p >= 0:
        raise DomainError("c_pn needs p >= 0")
    if n == 1:
        return 2.0
    if n == 2:
        val, _ = integrate.quad(lambda t: math.cos(t) ** p, 0.0, math.pi / 2,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return 4.0 * float(val)
    raise UnsupportedError(f"dimension {n} is not supported (n in {{1, 2}})")


def omega(k: Kernel) -> float:
    """Total mass ``||eta||_1 = c_{0,n} * j_{n+w}``."""
    return c_pn(0.0, k.n) * j_alpha(k, k.n + k.weight)


def _sphere_average(phi_bar: PhiSpec, n: int, z: float) -> float:
    if n == 1:
        return float(phi_bar(abs(z)))
    val, _ = integrate.quad(lambda t: phi_bar(abs(z) * math.cos(t)), 0.0, math.pi / 2,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return 4.0 * float(val) / c_pn(0.0, n)


def s_phi(phi_bar: PhiSpec, k: Kernel, z: float, method: str = "polar") -> float:
    """Directional average ``(1/omega) int phi_bar(|<z e1, xi/|xi|>|) eta(xi) d xi``.

    ``polar`` uses the radial factorization (the radial moment cancels
    against ``omega``); ``full`` integrates over the plane directly and is
    meant as a cross-check.
    """
    if not z >= 0:
        raise DomainError("s_phi is evaluated at z >= 0")
    if method == "polar":
        return _sphere_average(phi_bar, k.n, z)
    if method != "full":
        raise UnsupportedError(f"unknown method {method!r}")
    R = k.radius
    if k.n == 1:
        val, _ = integrate.quad(lambda x: float(phi_bar(z)) * float(k(np.array(x))), -R, R,
                                epsrel=1e-12, limit=200)
        return float(val) / omega(k)

    def integrand(y, x):
        rho = math.hypot(x, y)
        if rho == 0.0:
            return 0.0
        return float(phi_bar(z * abs(x) / rho)) * rho ** k.weight * k.profile_at(rho)

    # one quadrant by symmetry; the inner limit follows the disc boundary
    val, _ = integrate.dblquad(integrand, 0.0, R, 0.0,
                               lambda x: math.sqrt(max(R * R - x * x, 0.0)),
                               epsabs=1e-13, epsrel=1e-11)
    return 4.0 * float(val) / omega(k)


def sectionable_lift(phi: PhiSpec, n: int) -> PhiSpec:
    """Convex profile whose sphere average reproduces ``phi``.

    Only powers are supported: the lift of ``coef * r**p`` is
    ``coef * (c_{0,n} / c_{p,n}) * r**p``.
    """
    if phi.kind != "power":
        raise UnsupportedError("sectionable lift is implemented for power integrands only")
    return PhiSpec.power(phi.p, phi.coef * c_pn(0.0, n) / c_pn(phi.p, n))
