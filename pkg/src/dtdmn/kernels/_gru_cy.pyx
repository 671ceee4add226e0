# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRU sequence kernel.

Same recurrence and padding semantics as ``reference.py``: the input
projections are batched through numpy once per call, then the time loop
runs in C with BLAS dgemm for the recurrent products. Sequences are
left-aligned; steps past ``lengths[b]`` carry the hidden state through and
leave zeroed gate caches, which the backward pass relies on.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


# Row-major matmul helpers on top of column-major BLAS: a row-major [r, c]
# buffer read column-major is the transpose [c, r], so each call computes
# the transposed product with swapped operand roles. All buffers compact.

cdef inline void mm_nn(double* c, double* a, double* b,
                       int m, int n, int k, double alpha, double beta) noexcept nogil:
    """C[m,n] = alpha * A[m,k] @ B[k,n] + beta * C, all row-major."""
    cdef char tn = b'N'
    dgemm(&tn, &tn, &n, &m, &k, &alpha, b, &n, a, &k, &beta, c, &n)


cdef inline void mm_tn(double* c, double* a, double* b,
                       int m, int n, int k, double alpha, double beta) noexcept nogil:
    """C[m,n] = alpha * A^T @ B + beta * C with A row-major [k,m], B row-major [k,n]."""
    cdef char tn = b'N'
    cdef char tt = b'T'
    dgemm(&tn, &tt, &n, &m, &k, &alpha, b, &n, a, &m, &beta, c, &n)


cdef inline void mm_nt(double* c, double* a, double* b,
                       int m, int n, int k, double alpha, double beta) noexcept nogil:
    """C[m,n] = alpha * A[m,k] @ B^T + beta * C with A row-major [m,k], B row-major [n,k]."""
    cdef char tn = b'N'
    cdef char tt = b'T'
    dgemm(&tt, &tn, &n, &m, &k, &alpha, b, &k, a, &k, &beta, c, &n)


def gru_forward(cnp.ndarray x_arr, cnp.ndarray lengths_arr,
                cnp.ndarray wz_arr, cnp.ndarray wr_arr, cnp.ndarray wn_arr,
                cnp.ndarray uz_arr, cnp.ndarray ur_arr, cnp.ndarray un_arr,
                cnp.ndarray bz_arr, cnp.ndarray br_arr, cnp.ndarray bn_arr):
    cdef int B = x_arr.shape[0]
    cdef int T = x_arr.shape[1]
    cdef int I = x_arr.shape[2]
    cdef int H = wz_arr.shape[1]

    x2 = x_arr.reshape(B * T, I)
    xz_np = np.ascontiguousarray((x2 @ wz_arr + bz_arr).reshape(B, T, H))
    xr_np = np.ascontiguousarray((x2 @ wr_arr + br_arr).reshape(B, T, H))
    xn_np = np.ascontiguousarray((x2 @ wn_arr + bn_arr).reshape(B, T, H))

    h_np = np.zeros((B, T, H))
    z_np = np.zeros((B, T, H))
    r_np = np.zeros((B, T, H))
    n_np = np.zeros((B, T, H))

    cdef double[:, :, ::1] xz = xz_np, xr = xr_np, xn = xn_np
    cdef double[:, :, ::1] h = h_np, z = z_np, r = r_np, n = n_np
    cdef double[:, ::1] uz = uz_arr, ur = ur_arr, un = un_arr
    cdef long long[::1] lengths = np.ascontiguousarray(lengths_arr, dtype=np.int64)

    hprev_np = np.zeros((B, H))
    az_np = np.empty((B, H))
    ar_np = np.empty((B, H))
    an_np = np.empty((B, H))
    rh_np = np.empty((B, H))
    cdef double[:, ::1] hprev = hprev_np, az = az_np, ar = ar_np, an = an_np, rh = rh_np

    cdef int t, b, j
    cdef double zv, rv, nv, hv
    with nogil:
        for t in range(T):
            for b in range(B):
                for j in range(H):
                    az[b, j] = xz[b, t, j]
                    ar[b, j] = xr[b, t, j]
            mm_nn(&az[0, 0], &hprev[0, 0], &uz[0, 0], B, H, H, 1.0, 1.0)
            mm_nn(&ar[0, 0], &hprev[0, 0], &ur[0, 0], B, H, H, 1.0, 1.0)
            for b in range(B):
                for j in range(H):
                    zv = _sig(az[b, j])
                    rv = _sig(ar[b, j])
                    az[b, j] = zv
                    ar[b, j] = rv
                    rh[b, j] = rv * hprev[b, j]
                    an[b, j] = xn[b, t, j]
            mm_nn(&an[0, 0], &rh[0, 0], &un[0, 0], B, H, H, 1.0, 1.0)
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        zv = az[b, j]
                        nv = tanh(an[b, j])
                        hv = (1.0 - zv) * hprev[b, j] + zv * nv
                        z[b, t, j] = zv
                        r[b, t, j] = ar[b, j]
                        n[b, t, j] = nv
                        h[b, t, j] = hv
                        hprev[b, j] = hv
                else:
                    for j in range(H):
                        h[b, t, j] = hprev[b, j]
    return h_np, z_np, r_np, n_np


def gru_backward(cnp.ndarray g_arr, cnp.ndarray x_arr, cnp.ndarray lengths_arr,
                 cnp.ndarray h_arr, cnp.ndarray z_arr, cnp.ndarray r_arr, cnp.ndarray n_arr,
                 cnp.ndarray wz_arr, cnp.ndarray wr_arr, cnp.ndarray wn_arr,
                 cnp.ndarray uz_arr, cnp.ndarray ur_arr, cnp.ndarray un_arr):
    cdef int B = x_arr.shape[0]
    cdef int T = x_arr.shape[1]
    cdef int I = x_arr.shape[2]
    cdef int H = wz_arr.shape[1]

    dx_np = np.zeros((B, T, I))
    dwz_np = np.zeros((I, H))
    dwr_np = np.zeros((I, H))
    dwn_np = np.zeros((I, H))
    duz_np = np.zeros((H, H))
    dur_np = np.zeros((H, H))
    dun_np = np.zeros((H, H))
    dbz_np = np.zeros(H)
    dbr_np = np.zeros(H)
    dbn_np = np.zeros(H)

    g_c = np.ascontiguousarray(g_arr)
    cdef double[:, :, ::1] g = g_c
    cdef double[:, :, ::1] x = x_arr, h = h_arr, z = z_arr, r = r_arr, n = n_arr
    cdef double[:, :, ::1] dx = dx_np
    cdef double[:, ::1] wz = wz_arr, wr = wr_arr, wn = wn_arr
    cdef double[:, ::1] uz = uz_arr, ur = ur_arr, un = un_arr
    cdef double[:, ::1] dwz = dwz_np, dwr = dwr_np, dwn = dwn_np
    cdef double[:, ::1] duz = duz_np, dur = dur_np, dun = dun_np
    cdef double[::1] dbz = dbz_np, dbr = dbr_np, dbn = dbn_np

    carry_np = np.zeros((B, H))
    hprev_np = np.zeros((B, H))
    dan_np = np.empty((B, H))
    daz_np = np.empty((B, H))
    dar_np = np.empty((B, H))
    drh_np = np.empty((B, H))
    rh_np = np.empty((B, H))
    xt_np = np.empty((B, I))
    dxt_np = np.empty((B, I))
    cdef double[:, ::1] carry = carry_np, hprev = hprev_np
    cdef double[:, ::1] dan = dan_np, daz = daz_np, dar = dar_np, drh = drh_np, rh = rh_np
    cdef double[:, ::1] xt = xt_np, dxt = dxt_np

    cdef int t, b, j
    cdef double dh, zv, rv, nv, hp, dz, dn, dr
    with nogil:
        for t in range(T - 1, -1, -1):
            if t > 0:
                for b in range(B):
                    for j in range(H):
                        hprev[b, j] = h[b, t - 1, j]
            else:
                for b in range(B):
                    for j in range(H):
                        hprev[b, j] = 0.0
            # Gate pre-activation gradients; zero automatically at padded
            # steps because the cached gates are zero there.
            for b in range(B):
                for j in range(H):
                    dh = g[b, t, j] + carry[b, j]
                    zv = z[b, t, j]
                    nv = n[b, t, j]
                    hp = hprev[b, j]
                    dz = dh * (nv - hp)
                    dn = dh * zv
                    daz[b, j] = dz * zv * (1.0 - zv)
                    dan[b, j] = dn * (1.0 - nv * nv)
                    carry[b, j] = dh * (1.0 - zv)  # partial dh_prev; rest added below
            mm_nt(&drh[0, 0], &dan[0, 0], &un[0, 0], B, H, H, 1.0, 0.0)
            for b in range(B):
                for j in range(H):
                    rv = r[b, t, j]
                    hp = hprev[b, j]
                    dr = drh[b, j] * hp
                    dar[b, j] = dr * rv * (1.0 - rv)
                    carry[b, j] += drh[b, j] * rv
                    rh[b, j] = rv * hp
                for j in range(I):
                    xt[b, j] = x[b, t, j]
            mm_nt(&dxt[0, 0], &dan[0, 0], &wn[0, 0], B, I, H, 1.0, 0.0)
            mm_nt(&dxt[0, 0], &daz[0, 0], &wz[0, 0], B, I, H, 1.0, 1.0)
            mm_nt(&dxt[0, 0], &dar[0, 0], &wr[0, 0], B, I, H, 1.0, 1.0)
            for b in range(B):
                for j in range(I):
                    dx[b, t, j] = dxt[b, j]
            mm_tn(&dwz[0, 0], &xt[0, 0], &daz[0, 0], I, H, B, 1.0, 1.0)
            mm_tn(&dwr[0, 0], &xt[0, 0], &dar[0, 0], I, H, B, 1.0, 1.0)
            mm_tn(&dwn[0, 0], &xt[0, 0], &dan[0, 0], I, H, B, 1.0, 1.0)
            mm_tn(&duz[0, 0], &hprev[0, 0], &daz[0, 0], H, H, B, 1.0, 1.0)
            mm_tn(&dur[0, 0], &hprev[0, 0], &dar[0, 0], H, H, B, 1.0, 1.0)
            mm_tn(&dun[0, 0], &rh[0, 0], &dan[0, 0], H, H, B, 1.0, 1.0)
            for b in range(B):
                for j in range(H):
                    dbz[j] += daz[b, j]
                    dbr[j] += dar[b, j]
                    dbn[j] += dan[b, j]
            mm_nt(&carry[0, 0], &daz[0, 0], &uz[0, 0], B, H, H, 1.0, 1.0)
            mm_nt(&carry[0, 0], &dar[0, 0], &ur[0, 0], B, H, H, 1.0, 1.0)
    return (dx_np, dwz_np, dwr_np, dwn_np, duz_np, dur_np, dun_np,
            dbz_np, dbr_np, dbn_np)
