"""Compiled monotone-coupling kernel for 1D transport on a shared grid."""

import numpy as np

cimport numpy as cnp


def monotone_cost(double[::1] a, double[::1] b, double[::1] centers):
    """Optimal transport cost between two same-grid histograms.

    Walks the monotone (north-west corner) coupling, optimal in 1D for convex
    ground costs; the cost here is the squared distance between bin centers.
    """
    cdef Py_ssize_t m = a.shape[0]
    cdef Py_ssize_t i = 0, j = 0
    cdef double cost = 0.0
    cdef double ra = a[0], rb = b[0]
    cdef double moved, d
    while i < m and j < m:
        moved = ra if ra < rb else rb
        if moved > 0.0:
            d = centers[i] - centers[j]
            cost += moved * d * d
        ra -= moved
        rb -= moved
        if ra <= 0.0:
            i += 1
            if i < m:
                ra = a[i]
        if rb <= 0.0:
            j += 1
            if j < m:
                rb = b[j]
    return cost
