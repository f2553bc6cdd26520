"""Richardson extrapolation over grids refined by factors of two."""
from __future__ import annotations

import numpy as np


def richardson(values, order=2, ratio=2.0):
    """Extrapolate a sequence computed on grids h, h/r, h/r^2, ...

    The error is assumed to expand in h^order, h^(2 order), ...  Returns the
    extrapolated value and an error estimate (difference between the best
    and next-best table entries). ``values`` may carry trailing axes.
    """
    v = [np.asarray(x, dtype=float) for x in values]
    if len(v) == 1:
        return v[0], np.full_like(v[0], np.inf)
    table = [v]
    for level in range(1, len(v)):
        f = ratio ** (order * level)
        prev = table[-1]
        table.append([(f * prev[i + 1] - prev[i]) / (f - 1) for i in range(len(prev) - 1)])
    best = table[-1][0]
    err = np.abs(best - table[-2][-1])
    return best, err


def observed_order(values, ratio=2.0):
    """log_r of successive difference ratios; ~p for an O(h^p) sequence."""
    v = np.asarray(values, dtype=float)
    d = np.abs(np.diff(v, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(d[:-1] / d[1:]) / np.log(ratio)
