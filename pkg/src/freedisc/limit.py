"""Free-discontinuity limit energies on explicit piecewise representations.

``F(u) = int phi(|grad u|) dx + int_{S_u} psi(|u+ - u-|) dH^{n-1}``

One-dimensional functions are piecewise affine with finitely many jumps;
two-dimensional ones carry a smooth part plus a polyline jump curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, PhiSpec, PsiSpec
from .kernels import Kernel, _sphere_average, c_pn, j_alpha

_TOL = 1e-12


@dataclass(frozen=True)
class Sbv1D:
    """Piecewise-affine function with jumps on ``[knots[0], knots[-1]]``.

    Parameters
    ----------
    knots : sorted breakpoints ``t_0 < ... < t_K``
    slopes : slope on each ``[t_i, t_{i+1}]`` (length ``K``)
    jumps : ``(t, u_minus, u_plus)`` triples; ``u_minus`` must equal the
        left limit produced by the anchor, slopes and earlier jumps
    anchor : ``u(t_0)``

    The function is right-continuous and constant outside its window.
    """

    knots: tuple[float, ...]
    slopes: tuple[float, ...]
    jumps: tuple[tuple[float, float, float], ...] = ()
    anchor: float = 0.0
    _events: np.ndarray = field(init=False, repr=False, compare=False)
    _values: np.ndarray = field(init=False, repr=False, compare=False)
    _eslopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise DomainError("knots must be strictly increasing with at least 2 entries")
        if s.size != t.size - 1:
            raise DomainError("need one slope per piece")
        jumps = sorted((float(a), float(b), float(c)) for a, b, c in self.jumps)
        locs = [j[0] for j in jumps]
        if any(not t[0] < x < t[-1] for x in locs):
            raise DomainError("jump locations must lie strictly inside the window")
        if len(set(locs)) != len(locs):
            raise DomainError("duplicate jump location")
        object.__setattr__(self, "jumps", tuple(jumps))
        events = np.unique(np.concatenate((t, locs)))
        piece = np.clip(np.searchsorted(t, events, side="right") - 1, 0, s.size - 1)
        eslopes = s[piece]
        values = np.empty(events.size)
        jump_at = {j[0]: j for j in jumps}
        v = float(self.anchor)
        for i, e in enumerate(events):
            if i:
                v = values[i - 1] + eslopes[i - 1] * (e - events[i - 1])
            if e in jump_at:
                _, um, up = jump_at[e]
                if abs(um - v) > 1e-9 * (1.0 + abs(v)):
                    raise DomainError(f"jump at {e}: u_minus={um} but the left limit is {v}")
                v = up
            values[i] = v
        object.__setattr__(self, "_events", events)
        object.__setattr__(self, "_values", values)
        object.__setattr__(self, "_eslopes", eslopes)

    @classmethod
    def build(cls, knots, slopes, jump_sizes: dict | None = None, anchor: float = 0.0) -> "Sbv1D":
        """Construct from jump sizes ``{t: u_plus - u_minus}``; left limits are filled in."""
        jump_sizes = dict(jump_sizes or {})
        t = np.asarray(knots, dtype=float)
        s = np.asarray(slopes, dtype=float)
        triples = []
        v, prev = float(anchor), float(t[0])
        for loc in sorted(jump_sizes):
            # integrate the slopes from prev to loc
            lo = np.clip(t[:-1], prev, loc)
            hi = np.clip(t[1:], prev, loc)
            v += float(np.sum(s * (hi - lo)))
            triples.append((loc, v, v + jump_sizes[loc]))
            v += jump_sizes[loc]
            prev = loc
        return cls(tuple(t.tolist()), tuple(s.tolist()), tuple(triples), float(anchor))

    @property
    def window(self) -> tuple[float, float]:
        return self.knots[0], self.knots[-1]

    @property
    def default_h(self) -> float:
        return (self.knots[-1] - self.knots[0]) / 1024.0

    def breakpoints(self) -> np.ndarray:
        return self._events

    @property
    def jump_sizes(self) -> np.ndarray:
        return np.array([up - um for _, um, up in self.jumps])

    def __call__(self, x):
        xs = np.asarray(x, dtype=float)
        e = self._events
        i = np.searchsorted(e, xs, side="right") - 1
        inside = (i >= 0) & (i < e.size - 1)
        ic = np.clip(i, 0, e.size - 1)
        out = np.where(inside, self._values[ic] + self._eslopes[ic] * (xs - e[ic]), 0.0)
        out = np.where(i < 0, self.anchor, out)
        out = np.where(i >= e.size - 1, self._values[-1], out)
        return out if np.ndim(x) else float(out)

    def to_text(self) -> str:
        lines = [f"anchor {self.anchor!r}"]
        for a, b, s in zip(self.knots[:-1], self.knots[1:], self.slopes):
            lines.append(f"piece {a!r} {b!r} {s!r}")
        for t, um, up in self.jumps:
            lines.append(f"jump {t!r} {um!r} {up!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Sbv1D":
        """Parse ``piece a b slope`` / ``jump t u_minus u_plus`` lines.

        Pieces must tile the window. Without an ``anchor`` line the value
        at the left end is inferred from the first jump (0 if there is none).
        """
        pieces, jumps, anchor = [], [], None
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "piece" and len(tok) == 4:
                    pieces.append(tuple(map(float, tok[1:])))
                elif tok[0] == "jump" and len(tok) == 4:
                    jumps.append(tuple(map(float, tok[1:])))
                elif tok[0] == "anchor" and len(tok) == 2:
                    anchor = float(tok[1])
                else:
                    raise ValueError
            except ValueError:
                raise DomainError(f"line {n}: cannot parse {raw!r}") from None
        if not pieces:
            raise DomainError("descriptor has no pieces")
        pieces.sort()
        for (a0, b0, _), (a1, _, _) in zip(pieces, pieces[1:]):
            if abs(b0 - a1) > _TOL * (1 + abs(b0)):
                raise DomainError(f"pieces do not tile the window near {b0}")
        knots = [p[0] for p in pieces] + [pieces[-1][1]]
        slopes = [p[2] for p in pieces]
        if anchor is None:
            anchor = 0.0
            if jumps:
                t0, um, _ = min(jumps)
                probe = cls.build(knots, slopes, {}, 0.0)
                anchor = um - float(probe(t0))
        return cls(tuple(knots), tuple(slopes), tuple(jumps), anchor)


def limit_energy_1d(u: Sbv1D, phi, psi) -> float:
    """``sum_pieces length * phi(|slope|) + sum_jumps psi(|u+ - u-|)``.

    Infinite values propagate.
    """
    lengths = np.diff(np.asarray(u.knots))
    bulk = [float(L * phi(abs(s))) for L, s in zip(lengths, u.slopes)]
    jump = [float(psi(abs(d))) for d in u.jump_sizes]
    terms = bulk + jump
    if any(math.isinf(v) for v in terms):
        return math.inf
    return math.fsum(terms)


def total_variation_1d(u: Sbv1D) -> float:
    """``sum length * |slope| + sum |jump|``."""
    lengths = np.diff(np.asarray(u.knots))
    return math.fsum([float(L * abs(s)) for L, s in zip(lengths, u.slopes)]
                     + [abs(float(d)) for d in u.jump_sizes])


@dataclass(frozen=True)
class PiecewiseField2D:
    """Smooth part plus a polyline jump curve on an axis-aligned rectangle.

    ``value(x, y)`` evaluates the full function (used for sampling),
    ``grad(x, y)`` returns the gradient components off the jump curve and
    ``amplitude(x, y)`` gives ``|u+ - u-|`` along the curve.
    """

    rect: tuple[float, float, float, float]
    value: Callable
    grad: Callable
    polyline: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    amplitude: Callable | None = None
    closed: bool = False
    name: str = ""

    def __post_init__(self):
        x0, x1, y0, y1 = self.rect
        if not (x1 > x0 and y1 > y0):
            raise DomainError("rectangle must have positive size")
        P = np.asarray(self.polyline, dtype=float).reshape(-1, 2)
        if P.size and (np.any(P[:, 0] < x0) or np.any(P[:, 0] > x1)
                       or np.any(P[:, 1] < y0) or np.any(P[:, 1] > y1)):
            raise DomainError("jump curve leaves the rectangle")
        if P.size and self.amplitude is None:
            raise DomainError("a jump curve needs an amplitude")
        if P.size:
            m = self._midpoints(P, 4)[0]
            if np.any(np.asarray(self.amplitude(m[:, 0], m[:, 1])) <= 0):
                raise DomainError("jump amplitude must be positive along the curve")
        object.__setattr__(self, "polyline", P)

    def _segments(self, P=None):
        P = self.polyline if P is None else P
        if self.closed and len(P):
            P = np.vstack((P, P[:1]))
        return P[:-1], P[1:]

    def _midpoints(self, P, nodes):
        a, b = self._segments(P)
        s = (np.arange(nodes) + 0.5) / nodes
        pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
        w = np.repeat(np.linalg.norm(b - a, axis=1) / nodes, nodes)
        return pts.reshape(-1, 2), w

    @property
    def curve_length(self) -> float:
        a, b = self._segments()
        return math.fsum(np.linalg.norm(b - a, axis=1).tolist())

    def rotated90(self) -> "PiecewiseField2D":
        """Rotation by a quarter turn about the origin: ``(x, y) -> (-y, x)``."""
        x0, x1, y0, y1 = self.rect
        val, grad, amp = self.value, self.grad, self.amplitude

        def g(x, y):
            gx, gy = grad(y, -x)
            return -np.asarray(gy), np.asarray(gx)

        P = self.polyline[:, ::-1] * np.array([-1.0, 1.0]) if self.polyline.size else self.polyline
        return PiecewiseField2D((-y1, -y0, x0, x1), lambda x, y: val(y, -x), g, P,
                                (lambda x, y: amp(y, -x)) if amp else None, self.closed,
                                self.name + "@rot90")


def disk_field(radius: float = 1.0, height: float = 1.0, sides: int = 64,
               half_width: float = 1.5) -> PiecewiseField2D:
    """``height`` times the indicator of a centered disk; curve is a regular polygon."""
    th = 2.0 * math.pi * np.arange(sides) / sides
    P = radius * np.column_stack((np.cos(th), np.sin(th)))
    hw = half_width
    return PiecewiseField2D(
        (-hw, hw, -hw, hw),
        lambda x, y: np.where(np.hypot(x, y) < radius, height, 0.0),
        lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
        P, lambda x, y: np.full(np.shape(x), abs(height)), True, f"disk:{radius!r}")


def affine_field(slope: float = 1.0, rect=(0.0, 1.0, 0.0, 1.0)) -> PiecewiseField2D:
    """``slope * x`` without jumps."""
    return PiecewiseField2D(
        tuple(rect), lambda x, y: slope * np.asarray(x, dtype=float),
        lambda x, y: (np.full(np.shape(x), slope), np.zeros(np.shape(x))), name=f"affine:{slope!r}")


def halfplane_field(height: float = 1.0, half_width: float = 1.0) -> PiecewiseField2D:
    """``height`` for ``x >= 0``, zero otherwise, on a centered square."""
    hw = half_width
    return PiecewiseField2D(
        (-hw, hw, -hw, hw), lambda x, y: np.where(np.asarray(x) >= 0, height, 0.0),
        lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
        np.array([[0.0, -hw], [0.0, hw]]), lambda x, y: np.full(np.shape(x), abs(height)),
        name=f"halfplane:{height!r}")


def zero_field(half_width: float = 1.0) -> PiecewiseField2D:
    hw = half_width
    return PiecewiseField2D((-hw, hw, -hw, hw), lambda x, y: np.zeros(np.shape(x)),
                            lambda x, y: (np.zeros(np.shape(x)), np.zeros(np.shape(x))),
                            name="zero")


def limit_energy_2d(u: PiecewiseField2D, phi, psi, cells: int = 256,
                    seg_nodes: int = 16) -> float:
    """Bulk term by a ``cells x cells`` midpoint rule, jump term along the polyline."""
    x0, x1, y0, y1 = u.rect
    hx, hy = (x1 - x0) / cells, (y1 - y0) / cells
    xs = x0 + hx * (np.arange(cells) + 0.5)
    ys = y0 + hy * (np.arange(cells) + 0.5)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    gx, gy = u.grad(X, Y)
    g = np.hypot(np.asarray(gx, dtype=float), np.asarray(gy, dtype=float))
    dens = np.asarray(phi(g), dtype=float)
    if np.any(np.isinf(dens)):
        return math.inf
    bulk = math.fsum(dens.sum(axis=1).tolist()) * hx * hy
    jump = 0.0
    if u.polyline.size:
        pts, w = u._midpoints(u.polyline, seg_nodes)
        amp = np.asarray(u.amplitude(pts[:, 0], pts[:, 1]), dtype=float)
        vals = np.asarray(psi(amp), dtype=float)
        if np.any(np.isinf(vals)):
            return math.inf
        jump = math.fsum((w * vals).tolist())
    return bulk + jump


class _SphereAveraged:
    """``z -> (1/c_{0,n}) int_S phi(z |<v, e1>|) dv`` as a vectorized callable."""

    def __init__(self, phi: PhiSpec, n: int):
        self.phi, self.n = phi, n
        if phi.kind == "power":
            self.exact = PhiSpec.power(phi.p, phi.coef * c_pn(phi.p, n) / c_pn(0.0, n))
        elif phi.kind == "infinite" or n == 1:
            self.exact = phi
        else:
            self.exact = None

    def __call__(self, z):
        if self.exact is not None:
            return self.exact(z)
        zs = np.asarray(z, dtype=float)
        flat = [_sphere_average(self.phi, self.n, float(v)) for v in zs.ravel()]
        return np.array(flat).reshape(zs.shape) if zs.ndim else flat[0]


JUMP_WEIGHTINGS = ("projected", "uniform")


def limit_constants(fam: PhiEpsFamily, k: Kernel, jump_weighting: str = "projected"):
    """Radial and sphere factors of the limit energy for ``fam`` with kernel ``k``.

    Returns ``(bulk_factor, jump_factor)``: the bulk density is
    ``bulk_factor`` times the sphere average of the bulk limit integrand and
    the jump density is ``jump_factor`` times the jump limit integrand.

    ``projected`` weighs each direction by ``|<nu, v>|`` (the factor the
    slicing identity produces at a jump with normal ``nu``); ``uniform``
    uses the plain sphere measure instead.
    """
    if jump_weighting not in JUMP_WEIGHTINGS:
        raise UnsupportedError(f"jump_weighting must be one of {JUMP_WEIGHTINGS}")
    radial = j_alpha(k, k.n + k.weight)
    bulk = c_pn(0.0, k.n) * radial
    sphere = c_pn(1.0, k.n) if jump_weighting == "projected" else c_pn(0.0, k.n)
    return bulk, sphere * radial


def target_limit(fam: PhiEpsFamily, k: Kernel, u, jump_weighting: str = "projected",
                 cells: int = 256, seg_nodes: int = 16) -> float:
    """Limit value of the non-local energies of ``fam``/``k`` at ``u``.

    ``u`` is an :class:`Sbv1D` (requires ``k.n == 1``) or a
    :class:`PiecewiseField2D` (requires ``k.n == 2``). Returns ``inf`` when
    the limit integrands forbid the gradient or the jumps ``u`` carries.
    """
    phi_star, psi_star = fam.limits()
    bulk_c, jump_c = limit_constants(fam, k, jump_weighting)
    avg = _SphereAveraged(phi_star, k.n)
    bulk_phi = lambda z: bulk_c * np.asarray(avg(z))
    jump_psi = lambda r: jump_c * np.asarray(psi_star(r))
    if isinstance(u, Sbv1D):
        if k.n != 1:
            raise DomainError("a one-dimensional descriptor needs a kernel with n = 1")
        return limit_energy_1d(u, bulk_phi, jump_psi)
    if isinstance(u, PiecewiseField2D):
        if k.n != 2:
            raise DomainError("a planar descriptor needs a kernel with n = 2")
        return limit_energy_2d(u, bulk_phi, jump_psi, cells, seg_nodes)
    raise UnsupportedError(f"unsupported descriptor {type(u).__name__}")
