"""Numpy lane for the hot kernels.

Convolutions are lowered to GEMM via an explicit im2col buffer (27x the input
for a 3x3x3 kernel, acceptable at volumetric desk scale); pooling uses a block
reshape. Cores receive pre-validated, pre-padded, C-contiguous arrays and fill
preallocated outputs, mirroring the compiled lane's signatures.
"""
from __future__ import annotations

import numpy as np


def _im2col(inp_pad, k, out_dims):
    """Patch matrix with rows (c, i, j, kk) and columns (n, x', y', z').

    This layout keeps every copied run contiguous along z in both source and
    destination, so building it is memory-bandwidth bound rather than
    gather bound.
    """
    n, c = inp_pad.shape[:2]
    xo, yo, zo = out_dims
    cols = np.empty((c, k, k, k, n, xo, yo, zo), dtype=inp_pad.dtype)
    src = inp_pad.transpose(1, 0, 2, 3, 4)
    for i in range(k):
        for j in range(k):
            for kk in range(k):
                cols[:, i, j, kk] = src[:, :, i : i + xo, j : j + yo, kk : kk + zo]
    return cols.reshape(c * k * k * k, n * xo * yo * zo)


def conv3d_fwd_core(inp_pad, weights, bias, out):
    n, c_out, xo, yo, zo = out.shape
    k = weights.shape[2]
    cols = _im2col(inp_pad, k, (xo, yo, zo))
    out_mat = weights.reshape(c_out, -1) @ cols
    out_mat += bias[:, None]
    out[...] = out_mat.reshape(c_out, n, xo, yo, zo).transpose(1, 0, 2, 3, 4)


def conv3d_bwd_core(inp_pad, weights, grad_out, gin_pad, gw, gb):
    n, c_out, xo, yo, zo = grad_out.shape
    c_in = inp_pad.shape[1]
    k = weights.shape[2]
    g_mat = np.ascontiguousarray(grad_out.transpose(1, 0, 2, 3, 4)).reshape(c_out, -1)
    gb += g_mat.sum(axis=1)
    cols = _im2col(inp_pad, k, (xo, yo, zo))
    gw += (g_mat @ cols.T).reshape(gw.shape)
    # col2im: scatter-add patch gradients back onto the padded input grid
    gcols = (weights.reshape(c_out, -1).T @ g_mat).reshape(c_in, k, k, k, n, xo, yo, zo)
    gin_t = gin_pad.transpose(1, 0, 2, 3, 4)
    for i in range(k):
        for j in range(k):
            for kk in range(k):
                gin_t[:, :, i : i + xo, j : j + yo, kk : kk + zo] += gcols[:, i, j, kk]


def maxpool3d_fwd_core(inp, out, arg):
    n, c, x, y, z = inp.shape
    xo, yo, zo = x // 2, y // 2, z // 2
    blocks = inp.reshape(n, c, xo, 2, yo, 2, zo, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 6, 3, 5, 7).reshape(n, c, xo, yo, zo, 8)
    local = blocks.argmax(axis=-1)  # first max = lowest (dx, dy, dz) offset
    out[...] = np.take_along_axis(blocks, local[..., None], axis=-1)[..., 0]
    dx, dy, dz = local >> 2, (local >> 1) & 1, local & 1
    ox = 2 * np.arange(xo, dtype=np.int64)[:, None, None]
    oy = 2 * np.arange(yo, dtype=np.int64)[None, :, None]
    oz = 2 * np.arange(zo, dtype=np.int64)[None, None, :]
    arg[...] = ((ox + dx) * y + (oy + dy)) * z + (oz + dz)


def pearson_map_core(x_rows, y_rows, corr):
    xc = x_rows - x_rows.mean(axis=1, keepdims=True)
    yc = y_rows - y_rows.mean(axis=1, keepdims=True)
    xs = np.einsum("ij,ij->i", xc, xc)
    ys = np.einsum("ij,ij->i", yc, yc)
    xdeg = xs == 0.0
    ydeg = ys == 0.0
    xn = np.sqrt(np.where(xdeg, 1.0, xs))
    yn = np.sqrt(np.where(ydeg, 1.0, ys))
    corr[...] = (xc @ yc.T) / (xn[:, None] * yn[None, :])
    if xdeg.any():
        corr[xdeg, :] = 0.0
    if ydeg.any():
        corr[:, ydeg] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    return int(xdeg.sum()), int(ydeg.sum())
