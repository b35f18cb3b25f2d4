"""Non-local energies of planar fields.

``E_eps(u) = sum_xi w(xi) * F_{eps,xi}(u)`` with
``F_{eps,xi}(u) = int phi_{eps|xi|}(|u(x + eps xi) - u(x)| / (eps |xi|)) dx``.

Fields are sampled on a uniform grid, interpolated bilinearly and extended
by their boundary samples. The ``x`` integral is a node sum over the field
grid enlarged by enough nodes that every non-zero term is included.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._numerics import array_sum
from .energy1d import AnalyticSignal1D, Signal1D, f_eps_1d
from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, eval_phi_eps
from .kernels import Kernel

_SNAP = 1e-9


@dataclass(frozen=True)
class Field2D:
    """Samples ``u(x0 + i*dx, y0 + j*dy)`` stored as ``samples[i, j]``."""

    origin: tuple[float, float]
    steps: tuple[float, float]
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] < 2:
            raise DomainError("a field needs a 2-D array with at least 2x2 samples")
        if not (self.steps[0] > 0 and self.steps[1] > 0):
            raise DomainError("grid steps must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "steps", (float(self.steps[0]), float(self.steps[1])))

    @classmethod
    def from_function(cls, fn: Callable, rect, shape) -> "Field2D":
        """Sample ``fn(x, y)`` at the nodes of ``rect = (x0, x1, y0, y1)``."""
        x0, x1, y0, y1 = rect
        nx, ny = shape
        xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return cls((x0, y0), ((x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1)),
                   np.asarray(fn(X, Y), dtype=float))

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape

    @property
    def rect(self) -> tuple[float, float, float, float]:
        (x0, y0), (dx, dy), (nx, ny) = self.origin, self.steps, self.shape
        return x0, x0 + dx * (nx - 1), y0, y0 + dy * (ny - 1)

    @property
    def cell_area(self) -> float:
        return self.steps[0] * self.steps[1]

    def with_samples(self, samples) -> "Field2D":
        return Field2D(self.origin, self.steps, samples)

    def translated(self, shift) -> "Field2D":
        return Field2D((self.origin[0] + shift[0], self.origin[1] + shift[1]), self.steps,
                       self.samples)

    def border_constant(self) -> bool:
        s = self.samples
        ring = np.concatenate((s[0], s[-1], s[:, 0], s[:, -1]))
        return bool(np.all(ring == ring[0]))

    def __call__(self, x, y):
        """Bilinear interpolation with constant extension."""
        (x0, y0), (dx, dy), (nx, ny) = self.origin, self.steps, self.shape
        gx = np.clip((np.asarray(x, dtype=float) - x0) / dx, 0.0, nx - 1)
        gy = np.clip((np.asarray(y, dtype=float) - y0) / dy, 0.0, ny - 1)
        ix = np.minimum(np.floor(gx).astype(np.int64), nx - 2)
        iy = np.minimum(np.floor(gy).astype(np.int64), ny - 2)
        fx, fy = gx - ix, gy - iy
        s = self.samples
        out = ((1 - fx) * (1 - fy) * s[ix, iy] + fx * (1 - fy) * s[ix + 1, iy]
               + (1 - fx) * fy * s[ix, iy + 1] + fx * fy * s[ix + 1, iy + 1])
        return out if np.ndim(out) else float(out)

    # -- IO -----------------------------------------------------------------
    def save_pgm(self, path: str, maxval: int = 65535) -> None:
        """ASCII PGM (P2) plus ``path + '.hdr'`` with origin, steps and value range."""
        lo, hi = float(self.samples.min()), float(self.samples.max())
        span = hi - lo if hi > lo else 1.0
        q = np.rint((self.samples - lo) / span * maxval).astype(np.int64)
        nx, ny = self.shape
        # image rows run along y (top row = largest y), columns along x
        rows = q.T[::-1]
        body = "\n".join(" ".join(map(str, r)) for r in rows)
        _atomic_write(path, f"P2\n{nx} {ny}\n{maxval}\n{body}\n")
        _atomic_write(path + ".hdr",
                      f"origin {self.origin[0]!r} {self.origin[1]!r}\n"
                      f"steps {self.steps[0]!r} {self.steps[1]!r}\n"
                      f"range {lo!r} {hi!r}\n")

    @classmethod
    def load_pgm(cls, path: str) -> "Field2D":
        with open(path) as fh:
            tokens = [t for line in fh for t in line.split("#", 1)[0].split()]
        if not tokens or tokens[0] != "P2":
            raise DomainError(f"{path}: not an ASCII PGM (P2) file")
        nx, ny, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        data = np.array(tokens[4:4 + nx * ny], dtype=float)
        if data.size != nx * ny:
            raise DomainError(f"{path}: truncated pixel data")
        origin, steps, lo, hi = (0.0, 0.0), (1.0, 1.0), 0.0, float(maxval)
        hdr = path + ".hdr"
        if os.path.exists(hdr):
            with open(hdr) as fh:
                for line in fh:
                    tok = line.split()
                    if tok and tok[0] == "origin":
                        origin = (float(tok[1]), float(tok[2]))
                    elif tok and tok[0] == "steps":
                        steps = (float(tok[1]), float(tok[2]))
                    elif tok and tok[0] == "range":
                        lo, hi = float(tok[1]), float(tok[2])
        span = hi - lo if hi > lo else 1.0
        img = data.reshape(ny, nx)[::-1].T
        return cls(origin, steps, lo + img / maxval * span)

    def save_csv(self, path: str) -> None:
        """Header ``x0,y0,dx,dy`` then one row per ``i`` (x index)."""
        lines = ["x0,y0,dx,dy",
                 ",".join(f"{v:.17g}" for v in (*self.origin, *self.steps))]
        lines += [",".join(f"{v:.17g}" for v in row) for row in self.samples]
        _atomic_write(path, "\n".join(lines) + "\n")

    @classmethod
    def load_csv(cls, path: str) -> "Field2D":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if len(lines) < 4 or lines[0].replace(" ", "") != "x0,y0,dx,dy":
            raise DomainError(f"{path}: expected an 'x0,y0,dx,dy' header")
        x0, y0, dx, dy = map(float, lines[1].split(","))
        rows = [list(map(float, ln.split(","))) for ln in lines[2:]]
        if len({len(r) for r in rows}) != 1:
            raise DomainError(f"{path}: ragged sample rows")
        return cls((x0, y0), (dx, dy), np.array(rows))


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass(frozen=True)
class StencilQuadrature:
    """Lattice offsets ``xi`` with ``0 < |xi| <= R`` and weights ``eta(xi) h**n``."""

    step: float
    offsets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if len(self.weights) == 0:
            raise DomainError("stencil has no offsets")
        if np.any(np.asarray(self.weights) < 0):
            raise DomainError("stencil weights must be non-negative")

    @classmethod
    def build(cls, k: Kernel, step: float | None = None,
              radius: float | None = None) -> "StencilQuadrature":
        """Default lattice step is ``R / 8``; ``radius`` may shrink ``R`` below the kernel's."""
        R = k.radius if radius is None else min(float(radius), k.radius)
        if not R > 0:
            raise DomainError("stencil radius must be positive")
        h = R / 8.0 if step is None else float(step)
        if not h > 0:
            raise DomainError("stencil step must be positive")
        m = int(math.floor(R / h + 1e-9))
        idx = np.arange(-m, m + 1)
        if k.n == 1:
            pts = (h * idx)[:, None]
        else:
            I, J = np.meshgrid(idx, idx, indexing="ij")
            pts = h * np.column_stack((I.ravel(), J.ravel()))
        rho = np.linalg.norm(pts, axis=1)
        keep = (rho > 0) & (rho <= R * (1 + 1e-12))
        pts = pts[keep]
        w = np.asarray(k(pts if k.n == 2 else pts[:, 0]), dtype=float) * h ** k.n
        nz = w > 0
        return cls(h, pts[nz], w[nz])

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights.tolist())

    @property
    def max_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.offsets, axis=1)))


# -- shifted samples ----------------------------------------------------------

@dataclass
class _Padded:
    """Field values on an enlarged node grid, edge-padded for shifted reads."""

    field: Field2D
    margin: int
    pad: int
    P: np.ndarray

    @classmethod
    def make(cls, u: Field2D, margin: int, reach: float):
        pad = margin + int(math.ceil(reach)) + 2
        return cls(u, margin, pad, np.pad(u.samples, pad, mode="edge"))

    @property
    def nodes_shape(self):
        nx, ny = self.field.shape
        return nx + 2 * self.margin, ny + 2 * self.margin

    def base(self) -> np.ndarray:
        a = self.pad - self.margin
        nx, ny = self.nodes_shape
        return self.P[a:a + nx, a:a + ny]

    def shifted(self, sx: float, sy: float) -> np.ndarray:
        """Values at node + (sx, sy) grid units, bilinear between nodes."""
        ix, iy = math.floor(sx), math.floor(sy)
        fx, fy = sx - ix, sy - iy
        if fx > 1 - _SNAP:
            ix, fx = ix + 1, 0.0
        if fy > 1 - _SNAP:
            iy, fy = iy + 1, 0.0
        fx = 0.0 if fx < _SNAP else fx
        fy = 0.0 if fy < _SNAP else fy
        a = self.pad - self.margin
        nx, ny = self.nodes_shape

        def view(di, dj):
            return self.P[a + ix + di:a + ix + di + nx, a + iy + dj:a + iy + dj + ny]

        out = view(0, 0)
        if fx == 0.0 and fy == 0.0:
            return out
        if fy == 0.0:
            return (1 - fx) * out + fx * view(1, 0)
        if fx == 0.0:
            return (1 - fy) * out + fy * view(0, 1)
        return ((1 - fx) * (1 - fy) * out + fx * (1 - fy) * view(1, 0)
                + (1 - fx) * fy * view(0, 1) + fx * fy * view(1, 1))

    def node_coords(self):
        (x0, y0), (dx, dy) = self.field.origin, self.field.steps
        nx, ny = self.nodes_shape
        xs = x0 + dx * (np.arange(nx) - self.margin)
        ys = y0 + dy * (np.arange(ny) - self.margin)
        return xs, ys


def _margin(u: Field2D, reach: float) -> int:
    return int(math.ceil(reach / min(u.steps) - 1e-9)) + 1


def _term(fam, eps, xi, padded: _Padded, u: Field2D, mask=None):
    nrm = math.hypot(xi[0], xi[1])
    if nrm == 0:
        raise DomainError("direction xi must be non-zero")
    sx, sy = eps * xi[0] / u.steps[0], eps * xi[1] / u.steps[1]
    diff = np.abs(padded.shifted(sx, sy) - padded.base())
    scale = eps * nrm
    if mask is not None:
        diff = diff[mask(sx, sy)]
    vals = np.asarray(eval_phi_eps(fam, scale, diff / scale))
    if np.any(np.isinf(vals)):
        return math.inf
    return array_sum(vals) * u.cell_area


def _check_eps(eps):
    if not (eps > 0 and math.isfinite(eps)):
        raise DomainError(f"eps must be positive, got {eps!r}")


def _require_constant_border(u: Field2D):
    if not u.border_constant():
        raise DomainError("whole-plane energies need a field that is constant on its border")


def f_eps_xi(u: Field2D, fam: PhiEpsFamily, eps: float, xi) -> float:
    """Single-direction energy ``F_{eps,xi}(u)`` over the plane."""
    _check_eps(eps)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,) or not np.any(xi != 0):
        raise DomainError("xi must be a non-zero 2-vector")
    _require_constant_border(u)
    reach = eps * float(np.hypot(*xi))
    padded = _Padded.make(u, _margin(u, reach), reach / min(u.steps))
    return _term(fam, eps, xi, padded, u)


def f_eps_nd(u, fam: PhiEpsFamily, k: Kernel, eps: float,
             q: StencilQuadrature | None = None, terms: bool = False):
    """``sum_xi w(xi) F_{eps,xi}(u)`` over the plane (or the line if ``k.n == 1``).

    With ``terms=True`` also returns the per-offset values ``F_{eps,xi}``.
    """
    _check_eps(eps)
    q = q or StencilQuadrature.build(k)
    if k.n == 1:
        # on the line the offset -xi contributes the same as xi
        per = [f_eps_1d(u, fam, eps * abs(float(x[0]))) for x in q.offsets]
        total = _weighted(q.weights, per)
        return (total, per) if terms else total
    if q.offsets.shape[1] != 2:
        raise DomainError("stencil dimension does not match the field")
    _require_constant_border(u)
    reach = eps * q.max_norm
    padded = _Padded.make(u, _margin(u, reach), reach / min(u.steps))
    per = [_term(fam, eps, xi, padded, u) for xi in q.offsets]
    total = _weighted(q.weights, per)
    return (total, per) if terms else total


def _weighted(weights, per):
    if any(math.isinf(v) for v in per):
        return math.inf
    return math.fsum((np.asarray(weights) * np.asarray(per)).tolist())


def f_eps_vis(u: Field2D, fam: PhiEpsFamily, k: Kernel, eps: float, omega,
              q: StencilQuadrature | None = None) -> float:
    """Energy over pairs with ``x`` and ``x + eps xi`` both in the rectangle ``omega``.

    For a rectangle every such pair sees each other, so this is the
    restriction of the node sum to those pairs.
    """
    _check_eps(eps)
    try:
        ox0, ox1, oy0, oy1 = map(float, omega)
    except (TypeError, ValueError):
        raise UnsupportedError("only axis-aligned rectangles (x0, x1, y0, y1) are supported") from None
    if not (ox1 >= ox0 and oy1 >= oy0):
        raise DomainError("empty rectangle")
    q = q or StencilQuadrature.build(k)
    reach = eps * q.max_norm
    padded = _Padded.make(u, _margin(u, reach), reach / min(u.steps))
    xs, ys = padded.node_coords()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    tol = 1e-12 * (1 + max(abs(ox0), abs(ox1), abs(oy0), abs(oy1)))
    inside = lambda X, Y: (X >= ox0 - tol) & (X <= ox1 + tol) & (Y >= oy0 - tol) & (Y <= oy1 + tol)
    base = inside(X, Y)
    dx, dy = u.steps

    def mask(sx, sy):
        return base & inside(X + sx * dx, Y + sy * dy)

    per = [_term(fam, eps, xi, padded, u, mask) for xi in q.offsets]
    return _weighted(q.weights, per)


def slice_field(u: Field2D, xi, y: float) -> AnalyticSignal1D:
    """Restriction ``t -> u(y * n + t * xi/|xi|)`` with ``n`` the unit normal to ``xi``.

    ``n = (xi_2, -xi_1) / |xi|``, so ``xi = e2`` puts ``y`` on the first axis. The returned signal records the grid-line
    crossings as kinks, so 1-D quadrature splits where bilinear data bend.
    """
    xi = np.asarray(xi, dtype=float)
    nrm = float(np.hypot(*xi))
    if nrm == 0:
        raise DomainError("direction xi must be non-zero")
    d = xi / nrm
    nvec = np.array([d[1], -d[0]])
    p0 = y * nvec
    x0, x1, y0, y1 = u.rect
    ts = []
    for axis, (lo, hi), step in ((0, (x0, x1), u.steps[0]), (1, (y0, y1), u.steps[1])):
        if abs(d[axis]) > 1e-15:
            lines = lo + step * np.arange(u.shape[axis])
            ts.append((lines - p0[axis]) / d[axis])
    kinks = np.unique(np.concatenate(ts)) if ts else np.zeros(0)
    # parameter range where the line is inside the rectangle
    tlo, thi = -np.inf, np.inf
    for axis, (lo, hi) in ((0, (x0, x1)), (1, (y0, y1))):
        if abs(d[axis]) > 1e-15:
            a, b = sorted(((lo - p0[axis]) / d[axis], (hi - p0[axis]) / d[axis]))
            tlo, thi = max(tlo, a), min(thi, b)
        elif not lo <= p0[axis] <= hi:
            tlo, thi = 0.0, -1.0
    if not thi - tlo > 1e-12 * (1.0 + abs(tlo) + abs(thi)):
        tlo, thi = -1.0, 1.0
        kinks = np.zeros(0)
    else:
        kinks = kinks[(kinks >= tlo) & (kinks <= thi)]

    def fn(t):
        t = np.asarray(t, dtype=float)
        return u(p0[0] + t * d[0], p0[1] + t * d[1])

    return AnalyticSignal1D(fn, (float(tlo), float(thi)), tuple(kinks.tolist()),
                            name="slice", check=False)


def mollify(u: Field2D, k: Kernel, delta: float, q: StencilQuadrature | None = None) -> Field2D:
    """``C^delta u(x) = (1/omega_0) sum_xi w(xi) u(x + delta xi)`` on the grid of ``u``.

    ``omega_0`` is the total stencil weight, so constants are reproduced
    exactly and the sup norm cannot grow.
    """
    _check_eps(delta)
    if not k.compact:
        raise UnsupportedError("mollification needs a compactly supported kernel")
    q = q or StencilQuadrature.build(k)
    reach = delta * q.max_norm / min(u.steps)
    padded = _Padded.make(u, 0, reach)
    acc = [w * padded.shifted(delta * xi[0] / u.steps[0], delta * xi[1] / u.steps[1])
           for xi, w in zip(q.offsets, q.weights)]
    total = np.sum(np.stack(acc), axis=0)
    return u.with_samples(total / q.total_weight)


def l1_distance(u: Field2D, v: Field2D) -> float:
    """Node-sum ``L^1`` distance of two fields on the same grid."""
    if u.shape != v.shape:
        raise DomainError("fields live on different grids")
    return array_sum(np.abs(u.samples - v.samples)) * u.cell_area


def random_block_field(rng: np.random.Generator, nodes: int = 81, step: float = 1.0 / 80,
                       blocks: int = 6, border: int = 8, amplitude: float = 1.0) -> Field2D:
    """Piecewise-constant field on a centered square, zero on a border band.

    The interior is split into ``blocks x blocks`` tiles with values drawn
    uniformly from ``[-amplitude, amplitude]``.
    """
    inner = nodes - 2 * border
    if inner < blocks:
        raise DomainError("border band leaves no room for the blocks")
    vals = rng.uniform(-amplitude, amplitude, size=(blocks, blocks))
    cuts = np.sort(rng.choice(np.arange(1, inner), size=blocks - 1, replace=False))
    cuts_y = np.sort(rng.choice(np.arange(1, inner), size=blocks - 1, replace=False))
    ix = np.searchsorted(cuts, np.arange(inner), side="right")
    iy = np.searchsorted(cuts_y, np.arange(inner), side="right")
    s = np.zeros((nodes, nodes))
    s[border:border + inner, border:border + inner] = vals[ix[:, None], iy[None, :]]
    half = step * (nodes - 1) / 2.0
    return Field2D((-half, -half), (step, step), s)


def mollifier_defect(u: Field2D, fam: PhiEpsFamily, k: Kernel, delta: float, H: float,
                     K: float, q: StencilQuadrature | None = None) -> tuple[float, float]:
    """Both sides of the mollification estimate on the grid rectangle ``A``.

    Returns ``(||C^delta u - u||_{L1(A)}, R / (H omega_0) * (omega_0 K |A| + E_delta(u)) * delta)``
    with ``omega_0`` the total stencil weight and ``R`` the kernel radius.
    """
    if not (H > 0 and K >= 0):
        raise DomainError("need H > 0 and K >= 0")
    q = q or StencilQuadrature.build(k)
    lhs = l1_distance(mollify(u, k, delta, q), u)
    nx, ny = u.shape
    area = nx * ny * u.cell_area
    w0 = q.total_weight
    energy = f_eps_nd(u, fam, k, delta, q)
    rhs = k.radius / (H * w0) * (w0 * K * area + energy) * delta
    return lhs, rhs
