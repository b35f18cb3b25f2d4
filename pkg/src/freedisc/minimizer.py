"""Denoising by descent on the discrete non-local energy plus fidelity.

``E(u) = sum_xi w(xi) sum_x cell * phi_{eps|xi|}(|u(x + eps xi) - u(x)| / (eps|xi|))
+ kappa * sum_x cell * (u(x) - g(x))**2``

``x`` runs over the data grid; ``u(x + eps xi)`` is interpolated from the
grid values (linear in 1-D, bilinear in 2-D, clamped at the border), so
each term is a fixed linear functional of ``u`` and the energy is
assembled from one sparse difference operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ._numerics import array_sum
from .energy1d import Signal1D
from .energynd import Field2D, StencilQuadrature
from .errors import DomainError, UnsupportedError
from .families import PhiEpsFamily, eval_phi_eps
from .kernels import Kernel

ARMIJO = 1e-4
BACKTRACK = 0.5


def _interp_matrix_1d(n: int, shift: float) -> sparse.csr_matrix:
    """Rows give values at ``i + shift`` (grid units) by clamped linear interpolation."""
    pos = np.clip(np.arange(n) + shift, 0.0, n - 1)
    lo = np.minimum(np.floor(pos).astype(np.int64), n - 2)
    f = pos - lo
    rows = np.repeat(np.arange(n), 2)
    cols = np.column_stack((lo, lo + 1)).ravel()
    vals = np.column_stack((1 - f, f)).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _difference_operator(shape, steps, offsets, eps):
    """Stacked ``S_xi - I`` for all offsets, rows ordered offset-major."""
    blocks = []
    if len(shape) == 1:
        n = shape[0]
        eye = sparse.identity(n, format="csr")
        for xi in offsets:
            blocks.append(_interp_matrix_1d(n, eps * xi[0] / steps[0]) - eye)
    else:
        nx, ny = shape
        eye = sparse.identity(nx * ny, format="csr")
        for xi in offsets:
            sx = _interp_matrix_1d(nx, eps * xi[0] / steps[0])
            sy = _interp_matrix_1d(ny, eps * xi[1] / steps[1])
            blocks.append(sparse.kron(sx, sy, format="csr") - eye)
    return sparse.vstack(blocks, format="csr")


@dataclass
class DenoiseProblem:
    """Data ``g``, a differentiable family, kernel, scale ``eps`` and weight ``kappa``."""

    data: Signal1D | Field2D
    family: PhiEpsFamily
    kernel: Kernel
    eps: float
    kappa: float
    stencil: StencilQuadrature | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError("fidelity weight kappa must be positive")
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if not self.family.differentiable:
            raise UnsupportedError(f"family {self.family.describe()} is not differentiable")
        if isinstance(self.data, Signal1D):
            dim, self._shape, self._steps = 1, self.data.samples.shape, (self.data.step,)
        elif isinstance(self.data, Field2D):
            dim, self._shape, self._steps = 2, self.data.shape, self.data.steps
        else:
            raise UnsupportedError("data must be a Signal1D or a Field2D")
        if self.kernel.n != dim:
            raise DomainError(f"kernel dimension {self.kernel.n} does not match data dimension {dim}")
        self.stencil = self.stencil or StencilQuadrature.build(self.kernel)
        self._cell = float(np.prod(self._steps))
        self._g = np.asarray(self.data.samples, dtype=float).ravel()
        self._build()

    def _build(self):
        q = self.stencil
        self._D = _difference_operator(self._shape, self._steps, q.offsets, self.eps)
        n = self._g.size
        norms = np.linalg.norm(q.offsets, axis=1)
        self._scale = np.repeat(self.eps * norms, n)
        self._w = np.repeat(q.weights, n) * self._cell

    def with_eps(self, eps: float) -> "DenoiseProblem":
        return DenoiseProblem(self.data, self.family, self.kernel, eps, self.kappa, self.stencil)

    @property
    def g(self) -> np.ndarray:
        return self._g.reshape(self._shape)

    def _check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != tuple(self._shape):
            raise DomainError(f"iterate has shape {u.shape}, expected {tuple(self._shape)}")
        return u.ravel()

    def _phi(self, r):
        return eval_phi_eps(self.family, self._scale, r)

    def _dphi(self, r):
        return self.family.derivative(self._scale, r)

    def _differences(self, x: np.ndarray) -> np.ndarray:
        # differences are translation invariant; recentering makes constants exact zeros
        return self._D @ (x - x[0])

    def interaction_energy(self, u) -> float:
        d = self._differences(self._check(u))
        return array_sum(self._w * self._phi(np.abs(d) / self._scale))

    def fidelity(self, u) -> float:
        return self.kappa * self._cell * array_sum((self._check(u) - self._g) ** 2)

    def pair_bound(self) -> float:
        """Upper bound ``sum w * cell * n * pi / (2 eps |xi|)`` valid for the arctan family."""
        return math.fsum((self._w * (math.pi / 2) / self._scale).tolist())


def discrete_energy(p: DenoiseProblem, u) -> float:
    """Interaction energy on the grid plus ``kappa * cell * sum (u - g)**2``."""
    return p.interaction_energy(u) + p.fidelity(u)


def gradient(p: DenoiseProblem, u) -> np.ndarray:
    """Exact gradient of :func:`discrete_energy` with respect to the grid values."""
    x = p._check(u)
    d = p._differences(x)
    r = np.abs(d) / p._scale
    coef = p._w * p._dphi(r) * np.sign(d) / p._scale
    g = p._D.T @ coef + 2.0 * p.kappa * p._cell * (x - p._g)
    return g.reshape(p._shape)


@dataclass
class DescentState:
    """Iterate and history of a descent run."""

    u: np.ndarray
    energies: list[float] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    step: float = 1.0
    iterations: int = 0
    status: str = "running"
    records: dict = field(default_factory=dict)


def solve(p: DenoiseProblem, max_iters: int = 500, grad_tol: float = 1e-8,
          u0=None, step0: float | None = None) -> DescentState:
    """Gradient descent with Armijo backtracking, started from ``g`` unless ``u0`` is given.

    Status is ``converged`` (sup-norm of the gradient below ``grad_tol``),
    ``max_iters`` or ``step_underflow`` (no decrease found above 1e-20).
    """
    u = np.array(p.g if u0 is None else u0, dtype=float)
    e = discrete_energy(p, u)
    g = gradient(p, u)
    # a first step of the order of the fidelity curvature
    t = step0 if step0 is not None else 1.0 / (2.0 * p.kappa * p._cell)
    state = DescentState(u, [e], [float(np.max(np.abs(g)))], t)
    for it in range(max_iters):
        gn = float(np.max(np.abs(g)))
        if gn <= grad_tol:
            state.status = "converged"
            break
        g2 = float(np.sum(g * g))
        t = min(t * 2.0, 1e12)
        while True:
            cand = u - t * g
            ec = discrete_energy(p, cand)
            if ec <= e - ARMIJO * t * g2:
                break
            t *= BACKTRACK
            if t < 1e-20:
                state.status = "step_underflow"
                break
        if state.status == "step_underflow":
            break
        u, e = cand, ec
        g = gradient(p, u)
        state.energies.append(e)
        state.grad_norms.append(float(np.max(np.abs(g))))
        state.iterations = it + 1
    else:
        state.status = "max_iters"
    if state.status == "running":
        state.status = "converged"
    state.u, state.step = u, t
    return state


def eps_continuation(p: DenoiseProblem, schedule, max_iters: int = 500,
                     grad_tol: float = 1e-8) -> DescentState:
    """Solve along a decreasing ``eps`` schedule, warm-starting each stage.

    ``records`` holds per-stage interaction energies, sup norms, the
    supremum of ``energy + ||u||_inf`` and ``L^1`` distances between
    successive minimizers.
    """
    sched = [float(e) for e in schedule]
    if not sched or any(e <= 0 for e in sched):
        raise DomainError("eps schedule must contain positive values")
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise DomainError("eps schedule must be strictly decreasing")
    u, state = None, None
    energies, sups, dists, statuses = [], [], [], []
    for e in sched:
        stage = p if e == p.eps else p.with_eps(e)
        state = solve(stage, max_iters, grad_tol, u0=u)
        if u is not None:
            dists.append(float(np.sum(np.abs(state.u - u)) * stage._cell))
        u = state.u
        energies.append(stage.interaction_energy(u))
        sups.append(float(np.max(np.abs(u))))
        statuses.append(state.status)
    state.records = {
        "eps": sched,
        "energy": energies,
        "sup_norm": sups,
        "bound": max(a + b for a, b in zip(energies, sups)),
        "l1_steps": dists,
        "status": statuses,
    }
    return state
