# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: lattice key enumeration and compensated summation.

Semantics match ``_kernels_py`` exactly; the test-suite asserts equal outputs.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, ceil, fabs

cnp.import_array()


cdef inline long long _first_with_parity(double lo, long long parity) nogil:
    cdef long long v = <long long>ceil(lo)
    if ((v - parity) % 2 + 2) % 2 != 0:
        v += 1
    return v


cdef Py_ssize_t _scan(const long long[::1] xs, long long py, long long pz,
                      double coupling, double bound, double slack,
                      long long[::1] out_a, long long[::1] out_b,
                      bint fill) nogil:
    cdef Py_ssize_t i, n = 0
    cdef long long x, y, z, y0, z0, a, b
    cdef double rest, ymax, disc, zlo, zhi, val
    cdef double shrink = 1.0 - fabs(coupling) / 2.0
    cdef double lim = bound + slack
    for i in range(xs.shape[0]):
        x = xs[i]
        rest = lim - <double>(x * x)
        if rest < 0:
            continue
        ymax = sqrt(rest / shrink) + 1.0
        y0 = _first_with_parity(-ymax, py)
        y = y0
        while y <= ymax:
            disc = coupling * coupling * y * y - 4.0 * (<double>(y * y) - rest)
            if disc >= 0:
                disc = sqrt(disc)
                zlo = (-coupling * y - disc) / 2.0 - 1.0
                zhi = (-coupling * y + disc) / 2.0 + 1.0
                z = _first_with_parity(zlo, pz)
                while z <= zhi:
                    a = x * x + y * y + z * z
                    b = y * z
                    val = <double>a + coupling * <double>b
                    if val <= lim:
                        if fill:
                            out_a[n] = a
                            out_b[n] = b
                        n += 1
                    z += 2
            y += 2
    return n


def lattice_keys(cnp.ndarray xs_in, long long py, long long pz,
                 double coupling, double bound, double slack):
    """Keys ``(X^2+Y^2+Z^2, Y*Z)`` of every point with form value <= bound + slack.

    ``xs_in`` lists the admissible X values; Y and Z run over all integers of
    parity ``py`` and ``pz``.
    """
    cdef const long long[::1] xs = np.ascontiguousarray(xs_in, dtype=np.int64)
    cdef long long[::1] dummy = np.empty(1, dtype=np.int64)
    cdef Py_ssize_t n
    with nogil:
        n = _scan(xs, py, pz, coupling, bound, slack, dummy, dummy, False)
    a = np.empty(n, dtype=np.int64)
    b = np.empty(n, dtype=np.int64)
    cdef long long[::1] av = a
    cdef long long[::1] bv = b
    if n:
        with nogil:
            _scan(xs, py, pz, coupling, bound, slack, av, bv, True)
    return a, b


def neumaier_sum(cnp.ndarray values_in):
    """Neumaier-compensated sum in array order."""
    cdef const double[::1] v = np.ascontiguousarray(values_in, dtype=np.float64)
    cdef double s = 0.0, c = 0.0, t, x
    cdef Py_ssize_t i
    with nogil:
        for i in range(v.shape[0]):
            x = v[i]
            t = s + x
            if fabs(s) >= fabs(x):
                c += (s - t) + x
            else:
                c += (x - t) + s
            s = t
    return s + c
