"""Shared numerical helpers: 1-D inner minimization, ordered reductions."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_CHUNK = 1 << 22  # max entries of the (points x grid) work array


def grid_golden_min(
    objective: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    m: int = 4096,
    rtol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize ``objective(t, row)`` over ``t in [lo, hi]`` for many rows.

    A dense grid of ``m + 1`` points locates the best basin, then a
    golden-section search on the two neighbouring grid cells refines it.
    The objective is called with ``t`` of shape ``(k, j)`` and the row
    indices ``row`` of shape ``(k, 1)`` so it can look up per-row data.

    Returns ``(values, argmins)``, both of shape ``lo.shape``. Grid points
    (endpoints included) are always candidates, so discontinuities at the
    ends of the interval are handled exactly.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    shape = lo.shape
    lo = lo.ravel()
    hi = hi.ravel()
    n = lo.size
    values = np.empty(n)
    argmins = np.empty(n)
    frac = np.linspace(0.0, 1.0, m + 1)
    step = max(1, _CHUNK // (m + 1))
    for start in range(0, n, step):
        sl = slice(start, min(n, start + step))
        a, b = lo[sl], hi[sl]
        rows = np.arange(sl.start, sl.stop)[:, None]
        width = (b - a)[:, None]
        t = a[:, None] + width * frac[None, :]
        f = objective(t, rows)
        f = np.where(np.isnan(f), np.inf, f)
        j = np.argmin(f, axis=1)
        idx = np.arange(j.size)
        best_t = t[idx, j]
        best_f = f[idx, j]
        left = t[idx, np.maximum(j - 1, 0)]
        right = t[idx, np.minimum(j + 1, m)]
        gt, gf = _golden(objective, left, right, rows, rtol, max_iter)
        better = gf < best_f
        values[sl] = np.where(better, gf, best_f)
        argmins[sl] = np.where(better, gt, best_t)
    return values.reshape(shape), argmins.reshape(shape)


def _golden(objective, a, b, rows, rtol, max_iter):
    a = a.copy()
    b = b.copy()
    scale = np.maximum(np.abs(a), np.abs(b))
    tol = rtol * np.maximum(scale, 1e-300)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc = objective(c[:, None], rows)[:, 0]
    fd = objective(d[:, None], rows)[:, 0]
    for _ in range(max_iter):
        if np.all(b - a <= tol):
            break
        move_left = fc < fd
        # shrink [a, b] to [a, d] or [c, b]
        b = np.where(move_left, d, b)
        a = np.where(move_left, a, c)
        new_c = np.where(move_left, b - GOLDEN * (b - a), d)
        new_d = np.where(move_left, c, a + GOLDEN * (b - a))
        probe = np.where(move_left, new_c, new_d)
        fp = objective(probe[:, None], rows)[:, 0]
        fc, fd = np.where(move_left, fp, fd), np.where(move_left, fc, fp)
        c, d = new_c, new_d
    fc = np.where(np.isnan(fc), np.inf, fc)
    fd = np.where(np.isnan(fd), np.inf, fd)
    pick_c = fc <= fd
    return np.where(pick_c, c, d), np.where(pick_c, fc, fd)


def ordered_sum(values: Iterable[float]) -> float:
    """Correctly rounded sum in the given order (fixed reduction order)."""
    return math.fsum(values)


def array_sum(a: np.ndarray, chunk: int = 4096) -> float:
    """Compensated sum of an array: numpy pairwise sums per fixed-size chunk,
    combined with ``math.fsum``."""
    flat = np.ravel(a)
    if flat.size <= chunk:
        return math.fsum(flat.tolist())
    parts = [float(np.sum(flat[i:i + chunk])) for i in range(0, flat.size, chunk)]
    return math.fsum(parts)


def thread_count() -> int:
    env = os.environ.get("FREEDISC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def map_ordered(fn: Callable, items: Sequence) -> list:
    """Map ``fn`` over ``items``; results come back in input order."""
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
