"""Pure-Python implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so that both backends
produce bit-identical floating point results (same summation order, no fused
multiply-add).  The vectorised ``step_points`` is the one exception: it uses
numpy, which evaluates the same expressions in the same order.
"""

from __future__ import annotations

import math

import numpy as np

STATUS_OK = 0
STATUS_BOUNDARY = 1
STATUS_ESCAPE = 2


def clip_polygon(verts, A, b):
    """Clip a convex polygon (counter-clockwise vertices) by ``A x <= b``."""
    pts = [(float(v[0]), float(v[1])) for v in verts]
    for r in range(A.shape[0]):
        if not pts:
            break
        n0 = float(A[r, 0])
        n1 = float(A[r, 1])
        c = float(b[r])
        out = []
        k = len(pts)
        for i in range(k):
            px, py = pts[i]
            qx, qy = pts[(i + 1) % k]
            sp = n0 * px + n1 * py - c
            sq = n0 * qx + n1 * qy - c
            if sp <= 0.0:
                out.append((px, py))
            if (sp <= 0.0) != (sq <= 0.0):
                lam = sp / (sp - sq)
                out.append((px + (qx - px) * lam, py + (qy - py) * lam))
        pts = out
    if len(pts) == 0:
        return np.empty((0, 2))
    return np.array(pts, dtype=float)


def polygon_area(verts):
    k = verts.shape[0]
    if k < 3:
        return 0.0
    acc = 0.0
    for i in range(k):
        j = (i + 1) % k
        acc += float(verts[i, 0]) * float(verts[j, 1]) - float(verts[j, 0]) * float(verts[i, 1])
    return 0.5 * acc


def clip_area_boxes(verts, lo, hi):
    """Areas of ``polygon ∩ box_t`` for a batch of axis-aligned boxes."""
    nt = lo.shape[0]
    out = np.zeros(nt)
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    for t in range(nt):
        b = np.array([hi[t, 0], hi[t, 1], -lo[t, 0], -lo[t, 1]])
        clipped = clip_polygon(verts, A, b)
        out[t] = abs(polygon_area(clipped))
    return out


def _locate(x, d, hs_A, hs_b, hs_start, nbr, tol):
    count = 0
    found = -1
    for k in range(nbr):
        worst = -math.inf
        for r in range(hs_start[k], hs_start[k + 1]):
            s = 0.0
            for j in range(d):
                s += hs_A[r][j] * x[j]
            s = s - hs_b[r]
            if s > worst:
                worst = s
        if worst <= tol:
            count += 1
            found = k
    return count, found


def _apply(x, d, mat, off):
    y = [0.0] * d
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += mat[i][j] * x[j]
        y[i] = acc + off[i]
    return y


def _cell_index(x, d, box_lo, box_hi, ncell, tol):
    nb = len(box_lo)
    for bi in range(nb):
        inside = True
        for a in range(d):
            if x[a] < box_lo[bi][a] - tol or x[a] > box_hi[bi][a] + tol:
                inside = False
                break
        if not inside:
            continue
        flat = 0
        for a in range(d):
            t = (x[a] - box_lo[bi][a]) / (box_hi[bi][a] - box_lo[bi][a])
            if t < 0.0:
                t = 0.0
            idx = int(t * ncell)
            if idx > ncell - 1:
                idx = ncell - 1
            flat = flat * ncell + idx
        return bi * ncell ** d + flat
    return -1


def orbit_hist(x0, n_steps, burn_in, hs_A, hs_b, hs_start, mats, offs, tol,
               noise, box_lo, box_hi, ncell, hist):
    """Iterate a piecewise affine map and accumulate a cell histogram.

    Returns ``(status, steps_done, x_final)``; ``hist`` is updated in place.
    """
    d = x0.shape[0]
    nbr = hs_start.shape[0] - 1
    A = hs_A.tolist()
    bb = hs_b.tolist()
    st = hs_start.tolist()
    M = mats.tolist()
    C = offs.tolist()
    lo = box_lo.tolist()
    hi = box_hi.tolist()
    use_noise = noise.shape[0] > 0
    nz = noise.tolist() if use_noise else None
    x = [float(v) for v in x0]
    for t in range(n_steps):
        if t >= burn_in:
            cell = _cell_index(x, d, lo, hi, ncell, tol)
            if cell < 0:
                return STATUS_ESCAPE, t, np.array(x)
            hist[cell] += 1
        count, k = _locate(x, d, A, bb, st, nbr, tol)
        if count == 0:
            return STATUS_ESCAPE, t, np.array(x)
        if count > 1:
            return STATUS_BOUNDARY, t, np.array(x)
        y = _apply(x, d, M[k], C[k])
        if use_noise:
            z = [y[i] + nz[t][i] for i in range(d)]
            cz, _ = _locate(z, d, A, bb, st, nbr, 0.0)
            if cz >= 1:
                y = z
        x = y
    return STATUS_OK, n_steps, np.array(x)


def step_points(X, hs_A, hs_b, hs_start, mats, offs, tol):
    """Apply one step of a piecewise affine map to many points.

    Returns ``(Y, flags)`` with flags 0 (ok), 1 (boundary), 2 (outside).
    Flagged points are returned unchanged.
    """
    npts, d = X.shape
    nbr = hs_start.shape[0] - 1
    count = np.zeros(npts, dtype=np.int64)
    found = np.full(npts, -1, dtype=np.int64)
    for k in range(nbr):
        worst = np.full(npts, -np.inf)
        for r in range(hs_start[k], hs_start[k + 1]):
            s = np.zeros(npts)
            for j in range(d):
                s = s + hs_A[r, j] * X[:, j]
            s = s - hs_b[r]
            worst = np.maximum(worst, s)
        hit = worst <= tol
        count += hit
        found[hit] = k
    Y = X.copy()
    ok = count == 1
    for k in range(nbr):
        sel = ok & (found == k)
        if not sel.any():
            continue
        Xs = X[sel]
        for i in range(d):
            acc = np.zeros(Xs.shape[0])
            for j in range(d):
                acc = acc + mats[k, i, j] * Xs[:, j]
            Y[sel, i] = acc + offs[k, i]
    flags = np.zeros(npts, dtype=np.int8)
    flags[count > 1] = STATUS_BOUNDARY
    flags[count == 0] = STATUS_ESCAPE
    return Y, flags
