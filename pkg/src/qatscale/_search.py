"""Small one-dimensional search routines shared by the planner and the fitter."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    tol: float,
    max_iter: int = 500,
) -> tuple[np.ndarray, np.ndarray]:
    """Minimize many unimodal problems at once by golden-section search.

    ``f`` maps an array of abscissae (one per problem) to objective values.
    Runs until every bracket is narrower than ``tol`` and returns the best
    evaluated point of each final bracket with its value.
    """
    lo = np.array(lo, dtype=np.float64, copy=True)
    hi = np.array(hi, dtype=np.float64, copy=True)
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc = f(c)
    fd = f(d)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        left = fc < fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        x_new = np.where(left, hi - INV_PHI * (hi - lo), lo + INV_PHI * (hi - lo))
        f_new = f(x_new)
        c, d, fc, fd = (
            np.where(left, x_new, d),
            np.where(left, c, x_new),
            np.where(left, f_new, fd),
            np.where(left, fc, f_new),
        )
    take_c = fc <= fd
    return np.where(take_c, c, d), np.where(take_c, fc, fd)


def bisect_decreasing(
    f: Callable[[float], float],
    target: float,
    lo: float,
    hi: float,
    ftol: float,
    max_iter: int = 200,
) -> float:
    """Find x in [lo, hi] with f(x) == target for a decreasing f, bisecting in log space.

    Requires f(lo) >= target >= f(hi); stops once |f(x) - target| <= ftol or the
    bracket cannot be split further. Returns the best point seen.
    """
    a, b = math.log(lo), math.log(hi)
    best_x, best_err = hi, abs(f(hi) - target)
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        x = math.exp(m)
        fx = f(x)
        err = abs(fx - target)
        if err < best_err:
            best_x, best_err = x, err
        if err <= ftol:
            break
        if fx > target:
            a = m
        else:
            b = m
    return best_x
