"""Small 1-D numerical routines: golden-section search and adaptive Simpson."""
from __future__ import annotations

import math
from typing import Callable, Tuple

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_min(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-12, max_iter: int = 200
) -> Tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` for the best point seen. The bracket endpoints are
    also compared so that boundary minima are reported exactly.
    """
    a, b = min(a, b), max(a, b)
    best_x, best_f = a, f(a)
    fb = f(b)
    if fb < best_f:
        best_x, best_f = b, fb
    h = b - a
    if h <= tol:
        return best_x, best_f
    c = a + INV_PHI_SQ * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(max_iter):
        if h <= tol * max(1.0, abs(c)):
            break
        if yc <= yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQ * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    for x, y in ((c, yc), (d, yd)):
        if y < best_f:
            best_x, best_f = x, y
    return best_x, best_f


def grid_golden_min(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    n_grid: int = 2001,
    tol: float = 1e-12,
) -> Tuple[float, float]:
    """Global-ish minimum of ``f`` on ``[a, b]``: dense scan, then golden refinement.

    ``f`` must accept arrays. Ties on the grid go to the smaller abscissa.
    """
    xs = np.linspace(a, b, n_grid)
    ys = f(xs)
    i = int(np.argmin(ys))
    lo = xs[max(i - 1, 0)]
    hi = xs[min(i + 1, n_grid - 1)]
    x, y = golden_section_min(lambda t: float(f(np.asarray(t))), lo, hi, tol=tol)
    if ys[i] <= y:
        return float(xs[i]), float(ys[i])
    return x, y


def _simpson(fa: float, fm: float, fb: float, a: float, b: float) -> float:
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    max_intervals: int = 10_000,
) -> float:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson with Richardson correction.

    Uses an explicit stack and a global interval budget; intervals left
    unconverged once the budget is spent contribute their best estimate.
    """
    if b == a:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    # a few initial panels guard against a lucky first comparison
    edges = np.linspace(a, b, 9)
    vals = [f(float(x)) for x in edges]
    stack = []
    for k in range(8):
        lo, hi = float(edges[k]), float(edges[k + 1])
        fm = f(0.5 * (lo + hi))
        stack.append((lo, hi, vals[k], fm, vals[k + 1], _simpson(vals[k], fm, vals[k + 1], lo, hi), tol / 8.0))
    total = 0.0
    used = 8
    while stack:
        lo, hi, flo, fmid, fhi, whole, eps = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = _simpson(flo, flm, fmid, lo, mid)
        right = _simpson(fmid, frm, fhi, mid, hi)
        delta = left + right - whole
        if abs(delta) <= 15.0 * eps or used >= max_intervals or hi - lo < 1e-14 * max(1.0, abs(hi)):
            total += left + right + delta / 15.0
            continue
        used += 1
        stack.append((lo, mid, flo, flm, fmid, left, eps / 2.0))
        stack.append((mid, hi, fmid, frm, fhi, right, eps / 2.0))
    return sign * total
