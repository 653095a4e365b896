# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled lane for the hot kernels.

Convolutions run as C im2col/col2im plus direct BLAS GEMM calls (via
``scipy.linalg.cython_blas``), skipping the temporary-array traffic of the
numpy lane; pooling and Pearson maps are tight loops. Signatures mirror
``_fallback``: cores assume pre-validated, C-contiguous inputs and fill
preallocated outputs."""

import numpy as np

from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm, sgemm

ctypedef fused real:
    float
    double


cdef void _gemm(bint ta, bint tb, int m, int n, int k,
                real* a, int lda, real* b, int ldb,
                real beta, real* c, int ldc) noexcept nogil:
    """Column-major gemm: C (m x n) = op(A) op(B) + beta * C."""
    cdef char cta = b'T' if ta else b'N'
    cdef char ctb = b'T' if tb else b'N'
    cdef real one = 1
    if real is float:
        sgemm(&cta, &ctb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)
    else:
        dgemm(&cta, &ctb, &m, &n, &k, &one, a, &lda, b, &ldb, &beta, c, &ldc)


cdef void _im2col(real[:, :, :, :, ::1] inp_pad, real* cols, Py_ssize_t k,
                  Py_ssize_t xo, Py_ssize_t yo, Py_ssize_t zo) noexcept nogil:
    # cols layout: rows (c, i, j, kk), columns (n, x, y, z); inner z copy is
    # contiguous on both sides
    cdef Py_ssize_t n_batch = inp_pad.shape[0], c_in = inp_pad.shape[1]
    cdef Py_ssize_t idx = 0
    cdef Py_ssize_t c, i, j, kk, n, x, y, z
    for c in range(c_in):
        for i in range(k):
            for j in range(k):
                for kk in range(k):
                    for n in range(n_batch):
                        for x in range(xo):
                            for y in range(yo):
                                for z in range(zo):
                                    cols[idx] = inp_pad[n, c, x + i, y + j, z + kk]
                                    idx += 1


def conv3d_fwd_core(real[:, :, :, :, ::1] inp_pad, real[:, :, :, :, ::1] weights,
                    real[::1] bias, real[:, :, :, :, ::1] out):
    cdef Py_ssize_t n_batch = out.shape[0], c_out = out.shape[1]
    cdef Py_ssize_t xo = out.shape[2], yo = out.shape[3], zo = out.shape[4]
    cdef Py_ssize_t c_in = inp_pad.shape[1], k = weights.shape[2]
    cdef Py_ssize_t kc = c_in * k * k * k
    cdef Py_ssize_t ns = n_batch * xo * yo * zo
    if kc > 2**31 - 1 or ns > 2**31 - 1:
        raise ValueError("conv3d: problem too large for 32-bit BLAS indices")
    cols_arr = np.empty(kc * ns, dtype=np.asarray(out).dtype)
    out_mat_arr = np.empty(c_out * ns, dtype=np.asarray(out).dtype)
    cdef real[::1] cols = cols_arr
    cdef real[::1] out_mat = out_mat_arr
    cdef Py_ssize_t n, o, x, y, z, idx
    cdef real bv
    with nogil:
        _im2col(inp_pad, &cols[0], k, xo, yo, zo)
        # row-major out_mat (c_out, ns) = weights (c_out, kc) @ cols (kc, ns)
        # == column-major (ns, c_out) = cols_cm (ns, kc) @ weights_cm (kc, c_out)
        _gemm(False, False, <int> ns, <int> c_out, <int> kc,
              &cols[0], <int> ns,
              &weights[0, 0, 0, 0, 0], <int> kc,
              0, &out_mat[0], <int> ns)
        for o in range(c_out):
            bv = bias[o]
            idx = o * ns
            for n in range(n_batch):
                for x in range(xo):
                    for y in range(yo):
                        for z in range(zo):
                            out[n, o, x, y, z] = out_mat[idx] + bv
                            idx += 1


def conv3d_bwd_core(real[:, :, :, :, ::1] inp_pad, real[:, :, :, :, ::1] weights,
                    real[:, :, :, :, ::1] grad_out, real[:, :, :, :, ::1] gin_pad,
                    real[:, :, :, :, ::1] gw, real[::1] gb):
    cdef Py_ssize_t n_batch = grad_out.shape[0], c_out = grad_out.shape[1]
    cdef Py_ssize_t xo = grad_out.shape[2], yo = grad_out.shape[3], zo = grad_out.shape[4]
    cdef Py_ssize_t c_in = inp_pad.shape[1], k = weights.shape[2]
    cdef Py_ssize_t kc = c_in * k * k * k
    cdef Py_ssize_t ns = n_batch * xo * yo * zo
    if kc > 2**31 - 1 or ns > 2**31 - 1:
        raise ValueError("conv3d: problem too large for 32-bit BLAS indices")
    dt = np.asarray(grad_out).dtype
    cols_arr = np.empty(kc * ns, dtype=dt)
    g_mat_arr = np.empty(c_out * ns, dtype=dt)
    gcols_arr = np.empty(kc * ns, dtype=dt)
    cdef real[::1] cols = cols_arr
    cdef real[::1] g_mat = g_mat_arr
    cdef real[::1] gcols = gcols_arr
    cdef Py_ssize_t n, o, c, i, j, kk, x, y, z, idx
    cdef real acc
    with nogil:
        _im2col(inp_pad, &cols[0], k, xo, yo, zo)
        # g_mat rows (c_out), columns (n, x, y, z)
        for o in range(c_out):
            idx = o * ns
            acc = 0
            for n in range(n_batch):
                for x in range(xo):
                    for y in range(yo):
                        for z in range(zo):
                            g_mat[idx] = grad_out[n, o, x, y, z]
                            acc += g_mat[idx]
                            idx += 1
            gb[o] += acc
        # gw (c_out, kc) += g_mat (c_out, ns) @ cols^T (ns, kc)
        # == column-major (kc, c_out) = cols_cm^T (kc, ns) @ g_mat_cm (ns, c_out)
        _gemm(True, False, <int> kc, <int> c_out, <int> ns,
              &cols[0], <int> ns,
              &g_mat[0], <int> ns,
              1, &gw[0, 0, 0, 0, 0], <int> kc)
        # gcols (kc, ns) = weights^T (kc, c_out) @ g_mat (c_out, ns)
        # == column-major (ns, kc) = g_mat_cm (ns, c_out) @ weights_cm^T (c_out, kc)
        _gemm(False, True, <int> ns, <int> kc, <int> c_out,
              &g_mat[0], <int> ns,
              &weights[0, 0, 0, 0, 0], <int> kc,
              0, &gcols[0], <int> ns)
        # col2im: scatter-add back onto the padded input grid
        idx = 0
        for c in range(c_in):
            for i in range(k):
                for j in range(k):
                    for kk in range(k):
                        for n in range(n_batch):
                            for x in range(xo):
                                for y in range(yo):
                                    for z in range(zo):
                                        gin_pad[n, c, x + i, y + j, z + kk] += gcols[idx]
                                        idx += 1


def maxpool3d_fwd_core(real[:, :, :, :, ::1] inp, real[:, :, :, :, ::1] out,
                       long long[:, :, :, :, ::1] arg):
    cdef Py_ssize_t n_batch = out.shape[0], chans = out.shape[1]
    cdef Py_ssize_t xo = out.shape[2], yo = out.shape[3], zo = out.shape[4]
    cdef Py_ssize_t ny = inp.shape[3], nz = inp.shape[4]
    cdef Py_ssize_t n, c, ox, oy, oz, dx, dy, dz, bx, by, bz
    cdef real best, v
    cdef long long bi
    with nogil:
        for n in range(n_batch):
            for c in range(chans):
                for ox in range(xo):
                    for oy in range(yo):
                        for oz in range(zo):
                            bx = 2 * ox
                            by = 2 * oy
                            bz = 2 * oz
                            best = inp[n, c, bx, by, bz]
                            bi = (bx * ny + by) * nz + bz
                            for dx in range(2):
                                for dy in range(2):
                                    for dz in range(2):
                                        v = inp[n, c, bx + dx, by + dy, bz + dz]
                                        if v > best:
                                            best = v
                                            bi = ((bx + dx) * ny + (by + dy)) * nz + (bz + dz)
                            out[n, c, ox, oy, oz] = best
                            arg[n, c, ox, oy, oz] = bi


def pearson_map_core(real[:, ::1] x_rows, real[:, ::1] y_rows, real[:, ::1] corr):
    cdef Py_ssize_t nv = x_rows.shape[0], nr = y_rows.shape[0], t = x_rows.shape[1]
    cdef Py_ssize_t v, r, i
    cdef double xm, ym, acc, xs, c
    cdef double[::1] y_mean
    cdef double[::1] y_norm
    cdef Py_ssize_t ndeg_x = 0, ndeg_y = 0
    y_mean_arr = np.empty(nr, dtype=np.float64)
    y_norm_arr = np.empty(nr, dtype=np.float64)
    y_mean = y_mean_arr
    y_norm = y_norm_arr
    with nogil:
        for r in range(nr):
            acc = 0
            for i in range(t):
                acc = acc + y_rows[r, i]
            ym = acc / t
            y_mean[r] = ym
            acc = 0
            for i in range(t):
                acc = acc + (y_rows[r, i] - ym) * (y_rows[r, i] - ym)
            y_norm[r] = sqrt(acc)
            if acc == 0:
                ndeg_y = ndeg_y + 1
        for v in range(nv):
            acc = 0
            for i in range(t):
                acc = acc + x_rows[v, i]
            xm = acc / t
            xs = 0
            for i in range(t):
                xs = xs + (x_rows[v, i] - xm) * (x_rows[v, i] - xm)
            if xs == 0:
                ndeg_x = ndeg_x + 1
                for r in range(nr):
                    corr[v, r] = 0
                continue
            xs = sqrt(xs)
            for r in range(nr):
                if y_norm[r] == 0:
                    corr[v, r] = 0
                    continue
                acc = 0
                for i in range(t):
                    acc = acc + (x_rows[v, i] - xm) * (y_rows[r, i] - y_mean[r])
                c = acc / (xs * y_norm[r])
                if c > 1:
                    c = 1
                elif c < -1:
                    c = -1
                corr[v, r] = <real> c
    return ndeg_x, ndeg_y
