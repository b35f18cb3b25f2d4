"""Bulk/jump integrands and the epsilon-indexed families built from them.

A free-discontinuity energy is driven by a convex non-decreasing bulk
integrand ``phi`` and a concave non-decreasing jump integrand ``psi``. The
finite-difference approximations use a family ``phi_eps`` whose small-scale
behaviour reproduces ``phi`` and whose rescaled large-argument behaviour
``eps * phi_eps(r / eps)`` reproduces ``psi``.

Infinite values are plain ``math.inf``: they are produced explicitly (never
by overflow) and absorb under addition and ``min``/``max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._numerics import grid_golden_min
from .errors import DomainError, UnsupportedError

INF = math.inf


def _midpoint_tol(values: np.ndarray) -> np.ndarray:
    return 1e-9 * (1.0 + np.abs(values))


def _as_float_or_array(x, like):
    if np.ndim(like) == 0:
        return float(np.asarray(x).reshape(()))
    return np.asarray(x, dtype=float)


def _check_table(knots: Sequence[float], values: Sequence[float], *, convex: bool) -> None:
    k = np.asarray(knots, dtype=float)
    v = np.asarray(values, dtype=float)
    if k.ndim != 1 or k.size < 2 or k.size != v.size:
        raise DomainError("a table needs at least two knots and one value per knot")
    if np.any(k < 0) or np.any(np.diff(k) <= 0):
        raise DomainError("table knots must be non-negative and strictly increasing")
    if np.any(v < 0) or np.any(np.diff(v) < 0):
        raise DomainError("table values must be non-negative and non-decreasing")
    slopes = np.diff(v) / np.diff(k)
    ds = np.diff(slopes)
    tol = 1e-12 * (1.0 + np.abs(slopes[1:]))
    if convex and np.any(ds < -tol):
        raise DomainError("table is not convex (slopes must be non-decreasing)")
    if not convex and np.any(ds > tol):
        raise DomainError("table is not concave (slopes must be non-increasing)")


def _interp_affine(r: np.ndarray, knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation with affine extension on both sides."""
    out = np.interp(r, knots, values)
    hi_slope = (values[-1] - values[-2]) / (knots[-1] - knots[-2])
    lo_slope = (values[1] - values[0]) / (knots[1] - knots[0])
    out = np.where(r > knots[-1], values[-1] + hi_slope * (r - knots[-1]), out)
    out = np.where(r < knots[0], np.maximum(values[0] + lo_slope * (r - knots[0]), 0.0), out)
    return out


@dataclass(frozen=True)
class PhiSpec:
    """Convex non-decreasing bulk integrand on ``[0, inf)``.

    Variants: ``power`` (``coef * r**p``, ``p >= 1``), ``tabulated``
    (linear interpolation, affine beyond the last knot) and ``infinite``
    (0 at the origin, ``+inf`` elsewhere; the bulk term of a pure-jump limit).
    """

    kind: str
    p: float = 1.0
    coef: float = 1.0
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "power":
            if not self.p >= 1.0:
                raise DomainError(f"power bulk integrand needs p >= 1, got {self.p}")
            if not self.coef > 0:
                raise DomainError("power coefficient must be positive")
        elif self.kind == "tabulated":
            _check_table(self.knots, self.values, convex=True)
        elif self.kind != "infinite":
            raise UnsupportedError(f"unknown bulk integrand kind {self.kind!r}")

    @classmethod
    def power(cls, p: float, coef: float = 1.0) -> "PhiSpec":
        return cls("power", p=float(p), coef=float(coef))

    @classmethod
    def tabulated(cls, knots: Sequence[float], values: Sequence[float]) -> "PhiSpec":
        return cls("tabulated", knots=tuple(map(float, knots)), values=tuple(map(float, values)))

    @classmethod
    def infinite(cls) -> "PhiSpec":
        return cls("infinite")

    @property
    def superlinear(self) -> bool:
        """Whether ``phi(r) / r -> inf`` as ``r -> inf``."""
        return self.kind == "infinite" or (self.kind == "power" and self.p > 1.0)

    def scaled(self, c: float) -> "PhiSpec":
        if self.kind == "power":
            return PhiSpec.power(self.p, self.coef * c)
        if self.kind == "tabulated":
            return PhiSpec.tabulated(self.knots, [v * c for v in self.values])
        return self

    def __call__(self, r):
        x = np.asarray(r, dtype=float)
        if self.kind == "power":
            out = self.coef * np.abs(x) ** self.p
        elif self.kind == "tabulated":
            out = _interp_affine(np.abs(x), np.asarray(self.knots), np.asarray(self.values))
        else:
            out = np.where(x == 0, 0.0, INF)
        return _as_float_or_array(out, r)

    def describe(self) -> str:
        if self.kind == "power":
            return f"power:{self.p!r}" if self.coef == 1.0 else f"power:{self.p!r}:{self.coef!r}"
        if self.kind == "tabulated":
            return "tabulated:" + ",".join(f"{k!r}:{v!r}" for k, v in zip(self.knots, self.values))
        return "infinite"


@dataclass(frozen=True)
class PsiSpec:
    """Concave non-decreasing jump integrand, extended by ``psi(0) = 0``.

    Variants: ``power`` (``coef * r**q``, ``0 < q <= 1``), ``constant``
    (``c`` for ``r > 0``), ``linear`` (``slope * r``), ``tabulated`` (knots
    start at 0; the first value is the right limit at 0) and ``infinite``.
    """

    kind: str
    q: float = 1.0
    coef: float = 1.0
    knots: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "power":
            if not 0.0 < self.q <= 1.0:
                raise DomainError(f"power jump integrand needs 0 < q <= 1, got {self.q}")
            if not self.coef > 0:
                raise DomainError("power coefficient must be positive")
        elif self.kind in ("constant", "linear"):
            if not self.coef > 0:
                raise DomainError(f"{self.kind} jump integrand needs a positive parameter")
        elif self.kind == "tabulated":
            _check_table(self.knots, self.values, convex=False)
            if self.knots[0] != 0.0:
                raise DomainError("tabulated jump integrand must start at knot 0")
        elif self.kind != "infinite":
            raise UnsupportedError(f"unknown jump integrand kind {self.kind!r}")

    @classmethod
    def power(cls, q: float, coef: float = 1.0) -> "PsiSpec":
        return cls("power", q=float(q), coef=float(coef))

    @classmethod
    def constant(cls, c: float) -> "PsiSpec":
        return cls("constant", coef=float(c))

    @classmethod
    def linear(cls, slope: float) -> "PsiSpec":
        return cls("linear", coef=float(slope))

    @classmethod
    def tabulated(cls, knots: Sequence[float], values: Sequence[float]) -> "PsiSpec":
        return cls("tabulated", knots=tuple(map(float, knots)), values=tuple(map(float, values)))

    @classmethod
    def infinite(cls) -> "PsiSpec":
        return cls("infinite")

    @property
    def steep_at_zero(self) -> bool:
        """Whether ``psi(r) / r -> inf`` as ``r -> 0+``."""
        if self.kind == "power":
            return self.q < 1.0
        return self.kind in ("constant", "infinite")

    def scaled(self, c: float) -> "PsiSpec":
        if self.kind in ("power", "constant", "linear"):
            return PsiSpec(self.kind, q=self.q, coef=self.coef * c)
        if self.kind == "tabulated":
            return PsiSpec.tabulated(self.knots, [v * c for v in self.values])
        return self

    def __call__(self, r):
        x = np.abs(np.asarray(r, dtype=float))
        if self.kind == "power":
            out = self.coef * x ** self.q
        elif self.kind == "constant":
            out = np.where(x > 0, self.coef, 0.0)
        elif self.kind == "linear":
            out = self.coef * x
        elif self.kind == "tabulated":
            out = _interp_affine(x, np.asarray(self.knots), np.asarray(self.values))
            out = np.where(x > 0, out, 0.0)
        else:
            out = np.where(x > 0, INF, 0.0)
        return _as_float_or_array(out, r)

    def describe(self) -> str:
        if self.kind == "power":
            return f"power:{self.q!r}" if self.coef == 1.0 else f"power:{self.q!r}:{self.coef!r}"
        if self.kind in ("constant", "linear"):
            return f"{self.kind}:{self.coef!r}"
        if self.kind == "tabulated":
            return "tabulated:" + ",".join(f"{k!r}:{v!r}" for k, v in zip(self.knots, self.values))
        return "infinite"


CLOSED_FORM_KINDS = ("power", "root", "linear", "arctanMS", "rational32")


@dataclass(frozen=True)
class PhiEpsFamily:
    """The integrand family ``{phi_eps}``.

    ``constructed`` builds ``phi_eps(r) = (1/scale) * min_{0<=l<=r}
    phi(l) + psi(eps (r - l)) / eps`` from a bulk/jump pair; the other kinds
    are closed-form:

    ============  ==========================================
    power(p)      ``r**p``
    root(p)       ``eps**(1/p - 1) * r**(1/p)``
    linear        ``r``
    arctanMS      ``arctan(eps r**2) / eps``
    rational32    ``r**2 / (sqrt(eps) r**1.5 + 1)``
    ============  ==========================================
    """

    kind: str
    p: float = 2.0
    phi: PhiSpec | None = None
    psi: PsiSpec | None = None
    scale: float = 1.0
    inner_grid: int = 4096

    def __post_init__(self):
        if self.kind == "constructed":
            if self.phi is None or self.psi is None:
                raise DomainError("constructed family needs both phi and psi")
            if self.phi.kind == "infinite" or self.psi.kind == "infinite":
                raise UnsupportedError("constructed family needs finite phi and psi")
            if not self.scale > 0:
                raise DomainError("scale must be positive")
            if self.inner_grid < 2:
                raise DomainError("inner_grid must be at least 2")
        elif self.kind in ("power", "root"):
            if not self.p >= 1.0:
                raise DomainError(f"{self.kind} family needs p >= 1")
        elif self.kind not in ("linear", "arctanMS", "rational32"):
            raise UnsupportedError(f"unknown family kind {self.kind!r}")

    @classmethod
    def constructed(cls, phi: PhiSpec, psi: PsiSpec, scale: float = 1.0,
                    inner_grid: int = 4096) -> "PhiEpsFamily":
        return cls("constructed", phi=phi, psi=psi, scale=float(scale), inner_grid=int(inner_grid))

    @classmethod
    def power(cls, p: float) -> "PhiEpsFamily":
        return cls("power", p=float(p))

    @classmethod
    def root(cls, p: float) -> "PhiEpsFamily":
        return cls("root", p=float(p))

    @classmethod
    def linear(cls) -> "PhiEpsFamily":
        return cls("linear")

    @classmethod
    def arctan_ms(cls) -> "PhiEpsFamily":
        return cls("arctanMS")

    @classmethod
    def rational32(cls) -> "PhiEpsFamily":
        return cls("rational32")

    @property
    def differentiable(self) -> bool:
        return self.kind in ("arctanMS", "rational32") or (self.kind == "power" and self.p > 1.0)

    def limits(self) -> tuple[PhiSpec, PsiSpec]:
        """The bulk and jump integrands the family converges to."""
        if self.kind == "power":
            return PhiSpec.power(self.p), PsiSpec.infinite()
        if self.kind == "root":
            return PhiSpec.infinite(), PsiSpec.power(1.0 / self.p)
        if self.kind == "linear":
            return PhiSpec.power(1.0), PsiSpec.linear(1.0)
        if self.kind == "arctanMS":
            return PhiSpec.power(2.0), PsiSpec.constant(math.pi / 2)
        if self.kind == "rational32":
            return PhiSpec.power(2.0), PsiSpec.power(0.5)
        return self.phi.scaled(1.0 / self.scale), self.psi.scaled(1.0 / self.scale)

    def __call__(self, eps: float, r):
        return eval_phi_eps(self, eps, r)

    def derivative(self, eps: float, r):
        """``d phi_eps / dr`` for the differentiable closed-form kinds."""
        if not self.differentiable:
            raise UnsupportedError(f"family {self.describe()} is not differentiable")
        _check_eps(eps)
        x = np.asarray(r, dtype=float)
        if self.kind == "power":
            out = self.p * x ** (self.p - 1.0)
        elif self.kind == "arctanMS":
            out = 2.0 * x / (1.0 + (eps * x * x) ** 2)
        else:
            s = np.sqrt(eps)
            den = s * x ** 1.5 + 1.0
            out = (0.5 * s * x ** 2.5 + 2.0 * x) / (den * den)
        return _as_float_or_array(out, r)

    def describe(self) -> str:
        if self.kind in ("power", "root"):
            return f"{self.kind}:{self.p!r}"
        if self.kind == "constructed":
            return (f"constructed(phi={self.phi.describe()}, psi={self.psi.describe()}, "
                    f"scale={self.scale!r}, inner_grid={self.inner_grid})")
        return self.kind


def _check_eps(eps) -> None:
    e = np.asarray(eps, dtype=float) if not isinstance(eps, str) else None
    if e is None or e.size == 0 or not np.all((e > 0) & np.isfinite(e)):
        raise DomainError(f"eps must be a positive finite real, got {eps!r}")


def eval_phi_eps(fam: PhiEpsFamily, eps, r):
    """Evaluate ``phi_eps(r)``; ``r`` may be a scalar or an array.

    Closed-form kinds also accept an array ``eps`` broadcasting against ``r``.
    """
    _check_eps(eps)
    if fam.kind == "constructed" and np.ndim(eps):
        raise UnsupportedError("the constructed family takes a scalar eps")
    eps = eps if np.ndim(eps) else float(eps)
    x = np.asarray(r, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise DomainError("phi_eps is defined for r >= 0 only")
    k = fam.kind
    if k == "power":
        out = x ** fam.p
    elif k == "root":
        out = eps ** (1.0 / fam.p - 1.0) * x ** (1.0 / fam.p)
    elif k == "linear":
        out = x.copy()
    elif k == "arctanMS":
        out = np.arctan(eps * x * x) / eps
    elif k == "rational32":
        out = x * x / (np.sqrt(eps) * x ** 1.5 + 1.0)
    else:
        out = _constructed(fam, eps, x)
    return _as_float_or_array(out, r)


def _constructed(fam: PhiEpsFamily, eps: float, x: np.ndarray) -> np.ndarray:
    flat = x.ravel()
    uniq, inverse = np.unique(flat, return_inverse=True)
    phi, psi = fam.phi, fam.psi

    def objective(l, rows):
        rr = uniq[rows]
        return phi(l) + psi(eps * np.maximum(rr - l, 0.0)) / eps

    vals, _ = grid_golden_min(objective, np.zeros_like(uniq), uniq, m=fam.inner_grid)
    return (vals / fam.scale)[inverse].reshape(x.shape)


def eval_scaled_jump(fam: PhiEpsFamily, eps: float, r):
    """``eps * phi_eps(r / eps)``, the rescaling that converges to ``psi``."""
    _check_eps(eps)
    x = np.asarray(r, dtype=float)
    if np.any(x <= 0):
        raise DomainError("the rescaled jump integrand is evaluated at r > 0")
    return _as_float_or_array(eps * eval_phi_eps(fam, eps, x / eps), r)


def lambda_eval(phi_star: PhiSpec, psi_star: PsiSpec, alpha: float, beta: float,
                m: int = 4096) -> float:
    """Cheapest way to climb ``alpha`` over a length ``beta``.

    ``min_{0<=l<=alpha} beta * phi_star((alpha - l) / beta) + psi_star(l)``,
    where ``l`` is the part of the increment spent on a jump.
    """
    if not beta > 0:
        raise DomainError("beta must be positive")
    if not alpha >= 0:
        raise DomainError("alpha must be non-negative")
    if alpha == 0:
        return float(beta * phi_star(0.0))

    def objective(l, rows):
        return beta * phi_star(np.maximum(alpha - l, 0.0) / beta) + psi_star(l)

    val, _ = grid_golden_min(objective, np.zeros(1), np.full(1, float(alpha)), m=m)
    return float(val[0])


def _n_steps(eps: float, beta: float) -> int:
    return int(math.floor(beta / eps * (1.0 + 1e-12)))


def theta_structured(fam: PhiEpsFamily, eps: float, alpha: float, beta: float,
                     m: int = 1024) -> float:
    """Minimal cost of ``N = floor(beta/eps)`` increments summing to ``alpha``.

    Uses the convex-concave structure of ``phi_eps``: at a minimizer either
    all increments are equal, or one large increment is followed by
    ``N - 1`` equal small ones.
    """
    _check_eps(eps)
    if eps > beta:
        raise DomainError("need 0 < eps <= beta")
    if not alpha >= 0:
        raise DomainError("alpha must be non-negative")
    n = _n_steps(eps, beta)
    equal = eps * n * float(fam(eps, alpha / (eps * n)))
    if n == 1 or alpha == 0:
        return equal

    def objective(x1, rows):
        rest = np.maximum(alpha - x1, 0.0)
        # one call so the constructed kind solves a single batch of inner problems
        both = eval_phi_eps(fam, eps, np.stack((x1 / eps, rest / (eps * (n - 1)))))
        return eps * both[0] + eps * (n - 1) * both[1]

    val, _ = grid_golden_min(objective, np.full(1, alpha / n), np.full(1, float(alpha)), m=m)
    return min(equal, float(val[0]))


def theta_bruteforce(fam: PhiEpsFamily, eps: float, alpha: float, beta: float,
                     k: int = 241, polish: bool = True) -> float:
    """Exhaustive minimization over the discretized simplex (``N <= 4``).

    Every increment ranges over ``alpha * j / (k - 1)``; the best lattice
    point is then polished by a local constrained solve.
    """
    _check_eps(eps)
    if eps > beta:
        raise DomainError("need 0 < eps <= beta")
    n = _n_steps(eps, beta)
    if n > 4:
        raise UnsupportedError(f"brute force supports at most 4 increments, got {n}")
    if n == 1 or alpha == 0:
        return n * eps * float(fam(eps, alpha / eps if n == 1 else 0.0))
    K = k - 1
    table = eps * np.asarray(fam(eps, alpha * np.arange(k) / (K * eps)))
    best = INF
    best_idx = None
    idx = np.arange(k)
    if n == 2:
        tot = table + table[::-1]
        j = int(np.argmin(tot))
        best, best_idx = float(tot[j]), (j, K - j)
    else:
        for i1 in range(k):
            if n == 3:
                i2 = idx[: K - i1 + 1]
                tot = table[i1] + table[i2] + table[K - i1 - i2]
                j = int(np.argmin(tot))
                if tot[j] < best:
                    best, best_idx = float(tot[j]), (i1, int(i2[j]), K - i1 - int(i2[j]))
            else:
                rem = K - i1
                i2, i3 = np.meshgrid(idx[: rem + 1], idx[: rem + 1], indexing="ij")
                ok = i2 + i3 <= rem
                i2, i3 = i2[ok], i3[ok]
                tot = table[i1] + table[i2] + table[i3] + table[rem - i2 - i3]
                j = int(np.argmin(tot))
                if tot[j] < best:
                    best = float(tot[j])
                    best_idx = (i1, int(i2[j]), int(i3[j]), rem - int(i2[j]) - int(i3[j]))
    if polish:
        best = min(best, _polish_simplex(fam, eps, alpha, np.array(best_idx) * alpha / K))
    return best


def _polish_simplex(fam, eps, alpha, x0):
    from scipy.optimize import minimize

    def cost(y):
        x = np.clip(np.append(y, alpha - np.sum(y)), 0.0, None)
        return float(np.sum(eps * np.asarray(fam(eps, x / eps))))

    n = x0.size
    cons = [{"type": "ineq", "fun": lambda y: alpha - np.sum(y)}]
    res = minimize(cost, x0[:-1], method="SLSQP", bounds=[(0.0, alpha)] * (n - 1),
                   constraints=cons, options={"ftol": 1e-14, "maxiter": 200})
    y = np.clip(res.x, 0.0, alpha)
    if np.sum(y) > alpha:
        y *= alpha / np.sum(y)
    return cost(y)


@dataclass
class EnvelopeReport:
    """Sampled envelope ``mu(r) = min_l f(l) + g(r - l)`` and its shape."""

    rbar: float
    samples: list[tuple[float, float]]
    convex_ok_below: bool
    concave_ok_above: bool
    monotone_ok: bool = True


def mu_envelope(f: PhiSpec, g: PsiSpec, rmax: float, samples: int = 201,
                tol: float = 1e-8, m: int = 4096) -> EnvelopeReport:
    """Sample the inf-convolution of a convex ``f`` with a concave ``g``.

    The switch point ``rbar`` is the largest sampled ``r`` where the envelope
    still coincides with ``f``; below it the samples must be convex, above it
    concave.
    """
    if not rmax > 0:
        raise DomainError("rmax must be positive")
    if samples < 3:
        raise DomainError("need at least 3 samples")
    r = np.linspace(0.0, rmax, samples)

    def objective(l, rows):
        return f(l) + g(np.maximum(r[rows] - l, 0.0))

    mu, _ = grid_golden_min(objective, np.zeros_like(r), r, m=m)
    fr = np.asarray(f(r))
    on_f = np.abs(mu - fr) <= tol * (1.0 + np.abs(fr))
    rbar = float(r[np.nonzero(on_f)[0].max()]) if on_f.any() else 0.0
    d2 = mu[:-2] - 2.0 * mu[1:-1] + mu[2:]
    slack = tol * (1.0 + np.abs(mu[1:-1]))
    below = r[2:] <= rbar
    above = r[:-2] >= rbar
    return EnvelopeReport(
        rbar=rbar,
        samples=list(zip(r.tolist(), mu.tolist())),
        convex_ok_below=bool(np.all(d2[below] >= -slack[below])),
        concave_ok_above=bool(np.all(d2[above] <= slack[above])),
        monotone_ok=bool(np.all(np.diff(mu) >= -tol * (1.0 + np.abs(mu[1:])))),
    )


# -- hypothesis probes -------------------------------------------------------

HYPOTHESES = ("li1", "li2", "Est", "Cpt1", "Cpt2")

# Hypotheses a family is known to satisfy; anything else is sampled evidence only.
# rational32 gets Cpt1 from its lower bound by a constructed family.
_ESTABLISHED = {
    "rational32": ("li1", "li2", "Est", "Cpt1"),
}


@dataclass(frozen=True)
class ProbePlan:
    """Finite sampling grids for the hypothesis probes."""

    eps: tuple[float, ...] = (1.0, 0.3, 0.1, 0.03, 0.01)
    r_max: float = 30.0
    r_count: int = 601
    A: tuple[float, ...] = tuple(np.linspace(0.0, 5.0, 11).tolist())
    S: tuple[float, ...] = (0.01, 0.1, 0.5, 1.0, 5.0)
    B: tuple[float, ...] = tuple(np.linspace(0.0, 5.0, 11).tolist())
    M: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    k: tuple[int, ...] = (1, 2, 3, 4)
    h_candidates: tuple[float, ...] = tuple((2.0 ** np.arange(4, -21, -1)).tolist())
    k_max: float = 10.0
    cpt1_samples: int = 401

    def __post_init__(self):
        for name in ("eps", "A", "S", "B", "M", "k", "h_candidates"):
            if len(getattr(self, name)) == 0:
                raise DomainError(f"sampling plan has an empty {name} grid")
        if self.r_count < 3 or self.cpt1_samples < 2:
            raise DomainError("sampling plan grids are too small")
        if any(e <= 0 for e in self.eps):
            raise DomainError("sampling plan eps values must be positive")


@dataclass
class HypothesisResult:
    name: str
    status: str  # "pass", "fail" or "unverified"
    witness: dict | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class ProbeReport:
    family: str
    results: dict[str, HypothesisResult] = field(default_factory=dict)

    def __getitem__(self, name: str) -> HypothesisResult:
        return self.results[name]

    def lines(self) -> list[str]:
        out = []
        for name in HYPOTHESES:
            res = self.results[name]
            extra = f" witness={res.witness}" if res.witness else ""
            note = f" ({res.detail})" if res.detail else ""
            out.append(f"{name}: {res.status}{note}{extra}")
        return out


def _probe_li(fam, plan):
    r = np.linspace(0.0, plan.r_max, plan.r_count)
    li1 = li2 = None
    for eps in plan.eps:
        v = np.asarray(fam(eps, r))
        if li1 is None:
            if not np.all(np.isfinite(v)):
                i = int(np.nonzero(~np.isfinite(v))[0][0])
                li1 = {"eps": eps, "r": float(r[i]), "value": float(v[i])}
            else:
                drop = np.diff(v) < -_midpoint_tol(v[1:])
                if drop.any():
                    i = int(np.nonzero(drop)[0][0])
                    li1 = {"eps": eps, "r": float(r[i]), "r_next": float(r[i + 1])}
        if li2 is None:
            d2 = v[:-2] - 2.0 * v[1:-1] + v[2:]
            tol = _midpoint_tol(v[1:-1]) * 4.0
            convex = np.nonzero(d2 > tol)[0]
            concave = np.nonzero(d2 < -tol)[0]
            # convex-concave: every convex spot precedes every concave spot
            if convex.size and concave.size and convex.max() > concave.min():
                li2 = {"eps": eps, "concave_at": float(r[concave.min() + 1]),
                       "convex_after": float(r[convex.max() + 1])}
    return li1, li2


def _probe_est(fam, plan):
    phi_up, psi_up = fam.limits()
    A = np.asarray(plan.A)[:, None]
    S = np.asarray(plan.S)[None, :]
    for eps in plan.eps:
        lhs = np.asarray(fam(eps, np.broadcast_to(A + S, (A.size, S.size))))
        rhs = np.asarray(phi_up(np.broadcast_to(A, lhs.shape))) + np.asarray(psi_up(eps * S + 0 * A)) / eps
        bad = lhs > rhs + _midpoint_tol(np.where(np.isfinite(rhs), rhs, 0.0))
        if bad.any():
            i, j = map(int, np.argwhere(bad)[0])
            return {"eps": eps, "A": float(A[i, 0]), "S": float(S[0, j]),
                    "lhs": float(lhs[i, j]), "rhs": float(rhs[i, j])}
    return None


def _probe_cpt1(fam, plan):
    fitted = {}
    for M in plan.M:
        samples = [(eps, np.linspace(0.0, M / eps, plan.cpt1_samples)) for eps in plan.eps]
        values = [(eps, r, np.asarray(fam(eps, r))) for eps, r in samples]
        found = None
        for h in sorted(plan.h_candidates, reverse=True):
            k_needed = max(0.0, max(float(np.max(h * r - v)) for _, r, v in values))
            if k_needed <= plan.k_max:
                found = (h, k_needed)
                break
        if found is None:
            return None, {"M": M, "k_max": plan.k_max}
        fitted[M] = found
    return fitted, None


def _probe_cpt2(fam, plan):
    A = np.asarray(plan.A)[:, None]
    B = np.asarray(plan.B)[None, :]
    for eps in plan.eps:
        for k in plan.k:
            lhs = np.asarray(fam((k + 1) * eps, np.broadcast_to((A + B) / (k + 1), (A.size, B.size))))
            rhs = (np.asarray(fam(eps, np.broadcast_to(A, lhs.shape))) / (k + 1)
                   + k / (k + 1) * np.asarray(fam(k * eps, np.broadcast_to(B / k, lhs.shape))))
            bad = lhs > rhs + _midpoint_tol(rhs)
            if bad.any():
                i, j = map(int, np.argwhere(bad)[0])
                return {"eps": eps, "k": k, "A": float(A[i, 0]), "B": float(B[0, j]),
                        "lhs": float(lhs[i, j]), "rhs": float(rhs[i, j])}
    return None


def probe_hypotheses(fam: PhiEpsFamily, plan: ProbePlan | None = None) -> ProbeReport:
    """Test li1, li2, Est, Cpt1 and Cpt2 on the sampling plan.

    Failures carry the violating tuple as witness. The Cpt1 entry also
    carries the fitted ``{M: (H_M, K_M)}`` constants.
    """
    plan = plan or ProbePlan()
    report = ProbeReport(family=fam.describe())
    established = _ESTABLISHED.get(fam.kind, HYPOTHESES)

    def record(name, witness, extra=None, detail=""):
        status = "fail" if witness else ("pass" if name in established else "unverified")
        if status == "unverified" and not detail:
            detail = "no violation on samples; not established for this family"
        report.results[name] = HypothesisResult(name, status, witness or extra, detail)

    li1, li2 = _probe_li(fam, plan)
    record("li1", li1)
    record("li2", li2)
    phi_up, psi_up = fam.limits()
    est_detail = "jump branch disabled (infinite jump integrand)" if psi_up.kind == "infinite" else ""
    record("Est", _probe_est(fam, plan), detail=est_detail)
    fitted, witness = _probe_cpt1(fam, plan)
    record("Cpt1", witness, extra={"fitted": fitted} if fitted else None)
    cpt2 = li1 or _probe_cpt2(fam, plan)
    record("Cpt2", cpt2)
    return report


def fitted_cpt1(report: ProbeReport, M: float) -> tuple[float, float]:
    """``(H_M, K_M)`` from a probe report for the smallest probed ``M' >= M``."""
    res = report["Cpt1"]
    if res.status == "fail" or not res.witness:
        raise DomainError("Cpt1 was not established by the probe")
    fitted = res.witness["fitted"]
    usable = sorted(m for m in fitted if m >= M)
    if not usable:
        raise DomainError(f"no probed M >= {M}")
    return fitted[usable[0]]
