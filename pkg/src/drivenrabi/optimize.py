"""Small derivative-free 1-D helpers: bracketed root refinement and golden-section search."""
from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def brent_root(f, a, b, fa=None, fb=None, xtol=1e-12, maxiter=200, history=None):
    """Zero of ``f`` inside a sign-changing bracket ``[a, b]``.

    Brent/Dekker iteration: inverse quadratic or secant steps when they land
    well inside the bracket, bisection otherwise.  Returns ``(x, lo, hi)`` where
    ``[lo, hi]`` is the final bracket (width <= xtol unless an exact zero hit).
    ``history``, if a list, receives every intermediate bracket.
    """
    fa = f(a) if fa is None else fa
    fb = f(b) if fb is None else fb
    if fa == 0.0:
        return a, a, a
    if fb == 0.0:
        return b, b, b
    if (fa > 0) == (fb > 0):
        raise ValueError("f(a) and f(b) must have opposite signs")
    c, fc = a, fa
    d = e = b - a
    for _ in range(maxiter):
        if (fb > 0) == (fc > 0):
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        lo, hi = (b, c) if b < c else (c, b)
        if history is not None:
            history.append((lo, hi))
        tol1 = 2.0 * 2.2e-16 * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if hi - lo <= max(xtol, 4.4e-16 * abs(b)) or fb == 0.0:
            return b, lo, hi
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e, d = d, p / q
            else:
                d = e = xm
        else:
            d = e = xm
        a, fa = b, fb
        if abs(d) > tol1:
            b += d
        else:
            b += math.copysign(tol1, xm)
        fb = f(b)
    raise RuntimeError("brent_root: iteration limit reached")


def golden_min(f, a, b, tol=1e-10, maxiter=200, stop_below=None):
    """Golden-section search for a minimum of a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, fx)``.  If ``stop_below`` is given, returns as soon as a
    value strictly below it is seen.
    """
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(maxiter):
        if stop_below is not None:
            if f1 < stop_below:
                return x1, f1
            if f2 < stop_below:
                return x2, f2
        if abs(b - a) <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)
