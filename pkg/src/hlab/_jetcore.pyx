# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled jet kernels (product and chain rule on packed 2-jets)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def jet_mul(double[::1] av, double[:, ::1] ag, double[:, ::1] ah,
            double[::1] bv, double[:, ::1] bg, double[:, ::1] bh,
            cnp.intp_t[::1] I, cnp.intp_t[::1] J):
    cdef Py_ssize_t m = av.shape[0], d = ag.shape[1], P = ah.shape[1]
    cdef Py_ssize_t k, i, p
    cdef double a, b
    v = np.empty(m)
    g = np.empty((m, d))
    h = np.empty((m, P))
    cdef double[::1] vv = v
    cdef double[:, ::1] gv = g
    cdef double[:, ::1] hv = h
    for k in range(m):
        a = av[k]
        b = bv[k]
        vv[k] = a * b
        for i in range(d):
            gv[k, i] = ag[k, i] * b + bg[k, i] * a
        for p in range(P):
            hv[k, p] = (ah[k, p] * b + bh[k, p] * a
                        + ag[k, I[p]] * bg[k, J[p]] + ag[k, J[p]] * bg[k, I[p]])
    return v, g, h


def jet_chain(double[:, ::1] ug, double[:, ::1] uh,
              double[::1] f1, double[::1] f2,
              cnp.intp_t[::1] I, cnp.intp_t[::1] J):
    cdef Py_ssize_t m = ug.shape[0], d = ug.shape[1], P = uh.shape[1]
    cdef Py_ssize_t k, i, p
    cdef double s1, s2
    g = np.empty((m, d))
    h = np.empty((m, P))
    cdef double[:, ::1] gv = g
    cdef double[:, ::1] hv = h
    for k in range(m):
        s1 = f1[k]
        s2 = f2[k]
        for i in range(d):
            gv[k, i] = ug[k, i] * s1
        for p in range(P):
            hv[k, p] = uh[k, p] * s1 + s2 * (ug[k, I[p]] * ug[k, J[p]])
    return g, h
