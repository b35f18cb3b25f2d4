"""Finite-difference energies of one-dimensional signals.

``F_eps(u, I) = int_I phi_eps(|u(x + eps) - u(x)| / eps) dx``

Signals are constant outside a bounded window, so the whole-line integral
reduces to ``[a - eps, b]``. The integrand is smooth between the signal's
kinks ``t`` and their translates ``t - eps``; the interval is split there
and each piece gets a composite midpoint rule.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from ._numerics import array_sum
from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, eval_phi_eps

INTERPOLATIONS = ("linear", "nearest")


@dataclass(frozen=True)
class Signal1D:
    """Uniformly sampled signal, extended by its boundary samples."""

    origin: float
    step: float
    samples: np.ndarray
    interpolation: str = "linear"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise DomainError("a sampled signal needs at least 2 samples")
        if not self.step > 0:
            raise DomainError("sample step must be positive")
        if self.interpolation not in INTERPOLATIONS:
            raise UnsupportedError(f"interpolation must be one of {INTERPOLATIONS}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def grid(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.samples.size)

    @property
    def window(self) -> tuple[float, float]:
        return self.origin, self.origin + self.step * (self.samples.size - 1)

    @property
    def default_h(self) -> float:
        return self.step / 4.0

    def breakpoints(self) -> np.ndarray:
        if self.interpolation == "linear":
            return self.grid
        return self.grid[:-1] + 0.5 * self.step

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        if self.interpolation == "linear":
            out = np.interp(xs, self.grid, self.samples)
        else:
            idx = np.floor((xs - self.origin) / self.step + 0.5).astype(np.int64)
            out = self.samples[np.clip(idx, 0, self.samples.size - 1)]
        return out if np.ndim(x) else float(out)

    def with_samples(self, samples) -> "Signal1D":
        return Signal1D(self.origin, self.step, np.asarray(samples, dtype=float), self.interpolation)

    @classmethod
    def from_function(cls, fn, a: float, b: float, count: int,
                      interpolation: str = "linear") -> "Signal1D":
        x = np.linspace(a, b, count)
        return cls(a, (b - a) / (count - 1), np.asarray(fn(x), dtype=float), interpolation)

    @classmethod
    def load_csv(cls, path: str, interpolation: str = "linear") -> "Signal1D":
        """Read a 2-column ``x,u`` CSV with a header row and uniform ``x``."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3:
            raise DomainError(f"{path}: need a header and at least 2 samples")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        d = np.diff(data[:, 0])
        if np.any(d <= 0) or np.max(np.abs(d - d.mean())) > 1e-9 * max(1.0, abs(d.mean())):
            raise DomainError(f"{path}: x column must be uniformly spaced and increasing")
        return cls(float(data[0, 0]), float(d.mean()), data[:, 1], interpolation)

    def save_csv(self, path: str) -> None:
        tmp = path + ".tmp"
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for x, u in zip(self.grid, self.samples):
                w.writerow([f"{x:.17g}", f"{u:.17g}"])
        os.replace(tmp, path)


@dataclass(frozen=True)
class AnalyticSignal1D:
    """Signal given by a vectorized map, constant on each side of ``window``.

    ``kinks`` lists points where the map or its derivative is discontinuous;
    they let the quadrature split exactly where the integrand is not smooth.
    """

    fn: Callable
    window: tuple[float, float]
    kinks: tuple[float, ...] = ()
    name: str = ""
    check: bool = True

    def __post_init__(self):
        a, b = self.window
        if not b > a:
            raise DomainError("active window must have positive length")
        if self.check:
            offsets = (b - a) * np.geomspace(1e-3, 1e3, 8)
            for side, pts in (("left", a - offsets), ("right", b + offsets)):
                v = np.asarray(self.fn(pts), dtype=float)
                if np.max(np.abs(v - v[0])) > 1e-12 * (1.0 + abs(v[0])):
                    raise DomainError(f"signal is not constant {side} of its active window")

    @property
    def default_h(self) -> float:
        a, b = self.window
        return (b - a) / 1024.0

    def breakpoints(self) -> np.ndarray:
        return np.asarray(self.kinks, dtype=float)

    def __call__(self, x):
        out = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        return out if np.ndim(x) else float(out)


def heaviside(height: float = 1.0, at: float = 0.0) -> AnalyticSignal1D:
    """Step from 0 to ``height`` at ``at`` (right-continuous)."""
    return AnalyticSignal1D(lambda x: np.where(x >= at, height, 0.0), (at - 1.0, at + 1.0),
                            kinks=(at,), name=f"heaviside:{height!r}")


def ramp(slope: float = 1.0) -> AnalyticSignal1D:
    """``slope * clip(x, 0, 1)``."""
    return AnalyticSignal1D(lambda x: slope * np.clip(x, 0.0, 1.0), (0.0, 1.0),
                            kinks=(0.0, 1.0), name=f"ramp:{slope!r}")


def _nodes(breaks: np.ndarray, lo: float, hi: float, h: float):
    inner = breaks[(breaks > lo) & (breaks < hi)]
    pts = np.unique(np.concatenate(([lo, hi], inner)))
    lengths = np.diff(pts)
    counts = np.maximum(1, np.ceil(lengths / h - 1e-9)).astype(np.int64)
    sub = lengths / counts
    start = np.repeat(pts[:-1], counts)
    width = np.repeat(sub, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return start + (offs + 0.5) * width, width


def _integration_range(u, eps: float, omega) -> tuple[float, float]:
    if omega is None or omega == "whole-line":
        a, b = u.window
        return a - eps, b
    lo, hi = map(float, omega)
    if not hi >= lo:
        raise DomainError("integration interval must satisfy lo <= hi")
    return lo, hi


def _f_eps_h(u, fam, eps, lo, hi, h):
    bp = np.asarray(u.breakpoints(), dtype=float)
    x, w = _nodes(np.concatenate((bp, bp - eps)), lo, hi, h)
    r = np.abs(np.asarray(u(x + eps)) - np.asarray(u(x))) / eps
    return array_sum(w * np.asarray(eval_phi_eps(fam, eps, r)))


def f_eps_1d(u, fam: PhiEpsFamily, eps: float, omega=None, h: float | None = None,
             with_error: bool = False):
    """``F_eps(u, omega)`` by breakpoint-split composite midpoint quadrature.

    Parameters
    ----------
    u : Signal1D, AnalyticSignal1D or any object with the same protocol
    omega : None, "whole-line" or (lo, hi)
    h : float, optional
        Maximal node spacing; defaults to ``u.default_h``.
    with_error : bool
        Also return ``|I_h - I_2h| / 3``, the midpoint-rule error estimate.
    """
    if not (eps > 0 and math.isfinite(eps)):
        raise DomainError(f"eps must be positive, got {eps!r}")
    h = float(h) if h is not None else u.default_h
    if not h > 0:
        raise DomainError("quadrature step must be positive")
    lo, hi = _integration_range(u, eps, omega)
    if hi == lo:
        return (0.0, 0.0) if with_error else 0.0
    val = _f_eps_h(u, fam, eps, lo, hi, h)
    if not with_error:
        return val
    coarse = _f_eps_h(u, fam, eps, lo, hi, 2.0 * h)
    return val, abs(val - coarse) / 3.0


def f_eps_1d_sweep(u, fam: PhiEpsFamily, eps_list: Iterable[float], omega=None,
                   h: float | None = None) -> list[tuple[float, float]]:
    """``[(eps, F_eps(u, omega)) for eps in eps_list]``."""
    return [(float(e), f_eps_1d(u, fam, e, omega, h)) for e in eps_list]
