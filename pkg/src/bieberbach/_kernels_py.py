"""Pure-Python (numpy) versions of the compiled kernels in ``_kernels.pyx``."""
import math

import numpy as np


def _with_parity(lo, parity):
    v = math.ceil(lo)
    if (v - parity) % 2:
        v += 1
    return v


def lattice_keys(xs, py, pz, coupling, bound, slack):
    """Keys ``(X^2+Y^2+Z^2, Y*Z)`` of every point with form value <= bound + slack."""
    lim = bound + slack
    shrink = 1.0 - abs(coupling) / 2.0
    out_a, out_b = [], []
    for x in np.asarray(xs, dtype=np.int64):
        x = int(x)
        rest = lim - float(x * x)
        if rest < 0:
            continue
        ymax = math.sqrt(rest / shrink) + 1.0
        ys = np.arange(_with_parity(-ymax, py), math.floor(ymax) + 1, 2, dtype=np.int64)
        zs = np.arange(_with_parity(-ymax, pz), math.floor(ymax) + 1, 2, dtype=np.int64)
        y, z = np.meshgrid(ys, zs, indexing="ij")
        a = x * x + y * y + z * z
        b = y * z
        keep = a.astype(np.float64) + coupling * b.astype(np.float64) <= lim
        out_a.append(a[keep])
        out_b.append(b[keep])
    if not out_a:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    return np.concatenate(out_a), np.concatenate(out_b)


def neumaier_sum(values):
    """Neumaier-compensated sum in array order."""
    s = 0.0
    c = 0.0
    for x in np.asarray(values, dtype=np.float64).tolist():
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c
