# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Semantics match ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, fabs

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_BOUNDARY = 1
    STATUS_ESCAPE = 2


cdef Py_ssize_t _clip_once(double[:, ::1] src, Py_ssize_t k, double n0, double n1,
                           double c, double[:, ::1] dst) nogil:
    cdef Py_ssize_t i, j, m = 0
    cdef double px, py, qx, qy, sp, sq, lam
    for i in range(k):
        j = i + 1
        if j == k:
            j = 0
        px = src[i, 0]
        py = src[i, 1]
        qx = src[j, 0]
        qy = src[j, 1]
        sp = n0 * px + n1 * py - c
        sq = n0 * qx + n1 * qy - c
        if sp <= 0.0:
            dst[m, 0] = px
            dst[m, 1] = py
            m += 1
        if (sp <= 0.0) != (sq <= 0.0):
            lam = sp / (sp - sq)
            dst[m, 0] = px + (qx - px) * lam
            dst[m, 1] = py + (qy - py) * lam
            m += 1
    return m


cdef Py_ssize_t _clip_all(double[:, ::1] buf_a, double[:, ::1] buf_b, Py_ssize_t k,
                          const double[:, ::1] A, const double[::1] b, int* which) nogil:
    cdef Py_ssize_t r
    cdef int cur = 0
    for r in range(A.shape[0]):
        if k == 0:
            break
        if cur == 0:
            k = _clip_once(buf_a, k, A[r, 0], A[r, 1], b[r], buf_b)
            cur = 1
        else:
            k = _clip_once(buf_b, k, A[r, 0], A[r, 1], b[r], buf_a)
            cur = 0
    which[0] = cur
    return k


def clip_polygon(verts, A, b):
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const double[:, ::1] AA = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[::1] bb = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t cap = V.shape[0] + AA.shape[0] + 2
    buf_a_np = np.empty((cap, 2))
    buf_b_np = np.empty((cap, 2))
    cdef double[:, ::1] buf_a = buf_a_np
    cdef double[:, ::1] buf_b = buf_b_np
    buf_a[:V.shape[0], :] = V
    cdef int which = 0
    cdef Py_ssize_t k = _clip_all(buf_a, buf_b, V.shape[0], AA, bb, &which)
    if k == 0:
        return np.empty((0, 2))
    if which == 0:
        return buf_a_np[:k].copy()
    return buf_b_np[:k].copy()


cdef double _area(const double[:, ::1] V, Py_ssize_t k) nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    if k < 3:
        return 0.0
    for i in range(k):
        j = i + 1
        if j == k:
            j = 0
        acc += V[i, 0] * V[j, 1] - V[j, 0] * V[i, 1]
    return 0.5 * acc


def polygon_area(verts):
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    return _area(V, V.shape[0])


def clip_area_boxes(verts, lo, hi):
    cdef const double[:, ::1] V = np.ascontiguousarray(verts, dtype=np.float64)
    cdef const double[:, ::1] L = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[:, ::1] H = np.ascontiguousarray(hi, dtype=np.float64)
    cdef Py_ssize_t nt = L.shape[0], t, k
    cdef Py_ssize_t cap = V.shape[0] + 6
    out_np = np.zeros(nt)
    cdef double[::1] out = out_np
    cdef double[:, ::1] buf_a = np.empty((cap, 2))
    cdef double[:, ::1] buf_b = np.empty((cap, 2))
    cdef const double[:, ::1] AA = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    cdef double[::1] bb = np.empty(4)
    cdef int which = 0
    with nogil:
        for t in range(nt):
            buf_a[:V.shape[0], :] = V
            bb[0] = H[t, 0]
            bb[1] = H[t, 1]
            bb[2] = -L[t, 0]
            bb[3] = -L[t, 1]
            k = _clip_all(buf_a, buf_b, V.shape[0], AA, bb, &which)
            if which == 0:
                out[t] = fabs(_area(buf_a, k))
            else:
                out[t] = fabs(_area(buf_b, k))
    return out_np


cdef int _locate(const double* x, Py_ssize_t d, const double[:, ::1] A, const double[::1] b,
                 const long[::1] start, Py_ssize_t nbr, double tol, Py_ssize_t* found) nogil:
    cdef int count = 0
    cdef Py_ssize_t k, r, j
    cdef double s, worst
    for k in range(nbr):
        worst = -INFINITY
        for r in range(start[k], start[k + 1]):
            s = 0.0
            for j in range(d):
                s += A[r, j] * x[j]
            s = s - b[r]
            if s > worst:
                worst = s
        if worst <= tol:
            count += 1
            found[0] = k
    return count


cdef Py_ssize_t _cell_index(const double* x, Py_ssize_t d, const double[:, ::1] lo, const double[:, ::1] hi,
                            Py_ssize_t ncell, double tol) nogil:
    cdef Py_ssize_t bi, a, idx, flat, per = 1
    cdef double t
    cdef bint inside
    for a in range(d):
        per *= ncell
    for bi in range(lo.shape[0]):
        inside = True
        for a in range(d):
            if x[a] < lo[bi, a] - tol or x[a] > hi[bi, a] + tol:
                inside = False
                break
        if not inside:
            continue
        flat = 0
        for a in range(d):
            t = (x[a] - lo[bi, a]) / (hi[bi, a] - lo[bi, a])
            if t < 0.0:
                t = 0.0
            idx = <Py_ssize_t>(t * ncell)
            if idx > ncell - 1:
                idx = ncell - 1
            flat = flat * ncell + idx
        return bi * per + flat
    return -1


def orbit_hist(x0, Py_ssize_t n_steps, Py_ssize_t burn_in, hs_A, hs_b, hs_start, mats, offs,
               double tol, noise, box_lo, box_hi, Py_ssize_t ncell, hist):
    cdef const double[:, ::1] A = np.ascontiguousarray(hs_A, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(hs_b, dtype=np.float64)
    cdef const long[::1] start = np.ascontiguousarray(hs_start, dtype=np.int64)
    cdef const double[:, :, ::1] M = np.ascontiguousarray(mats, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(offs, dtype=np.float64)
    cdef const double[:, ::1] NZ = np.ascontiguousarray(noise, dtype=np.float64).reshape(-1, np.asarray(x0).shape[0])
    cdef const double[:, ::1] lo = np.ascontiguousarray(box_lo, dtype=np.float64)
    cdef const double[:, ::1] hi = np.ascontiguousarray(box_hi, dtype=np.float64)
    cdef long[::1] H = hist
    cdef Py_ssize_t d = np.asarray(x0).shape[0]
    cdef Py_ssize_t nbr = start.shape[0] - 1
    cdef bint use_noise = NZ.shape[0] > 0
    x_np = np.array(x0, dtype=np.float64)
    y_np = np.empty(d)
    z_np = np.empty(d)
    cdef double[::1] x = x_np
    cdef double[::1] y = y_np
    cdef double[::1] z = z_np
    cdef Py_ssize_t t, i, j, k = -1, k2 = -1, cell
    cdef int count, cz
    cdef double acc
    cdef int status = STATUS_OK
    cdef Py_ssize_t done = n_steps
    with nogil:
        for t in range(n_steps):
            if t >= burn_in:
                cell = _cell_index(&x[0], d, lo, hi, ncell, tol)
                if cell < 0:
                    status = STATUS_ESCAPE
                    done = t
                    break
                H[cell] += 1
            count = _locate(&x[0], d, A, b, start, nbr, tol, &k)
            if count == 0:
                status = STATUS_ESCAPE
                done = t
                break
            if count > 1:
                status = STATUS_BOUNDARY
                done = t
                break
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += M[k, i, j] * x[j]
                y[i] = acc + C[k, i]
            if use_noise:
                for i in range(d):
                    z[i] = y[i] + NZ[t, i]
                cz = _locate(&z[0], d, A, b, start, nbr, 0.0, &k2)
                if cz >= 1:
                    for i in range(d):
                        y[i] = z[i]
            for i in range(d):
                x[i] = y[i]
    return status, done, x_np


def step_points(X, hs_A, hs_b, hs_start, mats, offs, double tol):
    cdef const double[:, ::1] XX = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] A = np.ascontiguousarray(hs_A, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(hs_b, dtype=np.float64)
    cdef const long[::1] start = np.ascontiguousarray(hs_start, dtype=np.int64)
    cdef const double[:, :, ::1] M = np.ascontiguousarray(mats, dtype=np.float64)
    cdef const double[:, ::1] C = np.ascontiguousarray(offs, dtype=np.float64)
    cdef Py_ssize_t npts = XX.shape[0], d = XX.shape[1], nbr = start.shape[0] - 1
    Y_np = np.array(XX, dtype=np.float64)
    flags_np = np.zeros(npts, dtype=np.int8)
    cdef double[:, ::1] Y = Y_np
    cdef signed char[::1] F = flags_np
    cdef Py_ssize_t p, i, j, k = -1
    cdef int count
    cdef double acc
    with nogil:
        for p in range(npts):
            count = _locate(&XX[p, 0], d, A, b, start, nbr, tol, &k)
            if count == 0:
                F[p] = STATUS_ESCAPE
                continue
            if count > 1:
                F[p] = STATUS_BOUNDARY
                continue
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += M[k, i, j] * XX[p, j]
                Y[p, i] = acc + C[k, i]
    return Y_np, flags_np
