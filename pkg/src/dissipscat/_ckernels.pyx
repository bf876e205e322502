# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled plane-integration kernel for the Radon transform."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport floor, ceil, sqrt

cnp.import_array()


def radon_planes(const double[:, :, :, ::1] vol, double[::1] origin, double h,
                 double[:, ::1] normals, double[:, ::1] e1, double[:, ::1] e2,
                 double[::1] s, double radius, int nthreads=1):
    """Plane integrals of each field in vol over {x.omega = s}, |x| <= radius.

    The plane is sampled on a square mesh of spacing h restricted to the
    disc of the ball, with trilinear interpolation of the grid values.
    Returns an array of shape (nfields, n_omega, n_s).
    """
    cdef Py_ssize_t nf = vol.shape[0], n0 = vol.shape[1]
    cdef Py_ssize_t n1 = vol.shape[2], n2 = vol.shape[3]
    cdef Py_ssize_t no = normals.shape[0], ns = s.shape[0]
    cdef Py_ssize_t job, o, k, f
    cdef int a, b, m, i0, i1, i2
    cdef double px, py, pz, q0, q1, q2, w0, w1, w2, disc, u, v, acc, val
    cdef double[:, :, ::1] out = np.zeros((nf, no, ns))
    cdef double[:, ::1] accs = np.zeros((no * ns, nf))
    m = <int>ceil(radius / h)
    for job in prange(no * ns, nogil=True, num_threads=nthreads, schedule='dynamic'):
        o = job // ns
        k = job % ns
        disc = radius * radius - s[k] * s[k]
        if disc < 0:
            continue
        for a in range(-m, m + 1):
            u = a * h
            if u * u > disc:
                continue
            for b in range(-m, m + 1):
                v = b * h
                if u * u + v * v > disc:
                    continue
                px = s[k] * normals[o, 0] + u * e1[o, 0] + v * e2[o, 0]
                py = s[k] * normals[o, 1] + u * e1[o, 1] + v * e2[o, 1]
                pz = s[k] * normals[o, 2] + u * e1[o, 2] + v * e2[o, 2]
                q0 = (px - origin[0]) / h
                q1 = (py - origin[1]) / h
                q2 = (pz - origin[2]) / h
                i0 = <int>floor(q0)
                i1 = <int>floor(q1)
                i2 = <int>floor(q2)
                if i0 < 0 or i1 < 0 or i2 < 0 or i0 >= n0 - 1 or i1 >= n1 - 1 or i2 >= n2 - 1:
                    continue
                w0 = q0 - i0
                w1 = q1 - i1
                w2 = q2 - i2
                for f in range(nf):
                    val = ((1 - w0) * ((1 - w1) * ((1 - w2) * vol[f, i0, i1, i2] + w2 * vol[f, i0, i1, i2 + 1])
                                       + w1 * ((1 - w2) * vol[f, i0, i1 + 1, i2] + w2 * vol[f, i0, i1 + 1, i2 + 1]))
                           + w0 * ((1 - w1) * ((1 - w2) * vol[f, i0 + 1, i1, i2] + w2 * vol[f, i0 + 1, i1, i2 + 1])
                                   + w1 * ((1 - w2) * vol[f, i0 + 1, i1 + 1, i2] + w2 * vol[f, i0 + 1, i1 + 1, i2 + 1])))
                    accs[job, f] += val
        for f in range(nf):
            out[f, o, k] = accs[job, f] * h * h
    return np.asarray(out)
