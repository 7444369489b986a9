"""One-dimensional search helpers."""

import math

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQ = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def golden_section(f, a, b, tol=1e-10):
    """Minimize a unimodal ``f`` on ``[a, b]``.

    Only interior points are evaluated, so ``f`` may be undefined at the
    endpoints. Returns ``(x, f(x))`` for the best point seen.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    tol = max(tol, 4.0 * math.ulp(max(abs(a), abs(b), 1.0)))
    # step count fixed up front; avoids stalling when tol is below the ulp of a
    steps = max(1, int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))) if h > tol else 1
    c = a + INV_PHI_SQ * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(steps):
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQ * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    if yc < yd:
        return c, yc
    return d, yd
