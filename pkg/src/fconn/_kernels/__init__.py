"""Hot numeric kernels with two interchangeable lanes.

The compiled Cython lane (``fconn._kernels._native``) is preferred when the
extension built; otherwise the vectorized numpy lane is used. Both implement
identical contracts and are cross-checked in the test suite. Selection happens
once at import; ``use_backend`` overrides it (tests, benchmarks), and the
``FCONN_KERNELS`` environment variable forces a lane at import time.

Array layout: batched volumes are C-contiguous ``(N, C, X, Y, Z)``; pooling
argmax values are flat spatial indices ``(x * Y + y) * Z + z``.
"""
from __future__ import annotations

import os

import numpy as np

from ..errors import ShapeError
from . import _fallback

try:
    from . import _native  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on build environment
    _native = None

_BACKENDS = {"fallback": _fallback}
if _native is not None:
    _BACKENDS["native"] = _native

_env = os.environ.get("FCONN_KERNELS")
if _env:
    if _env not in _BACKENDS:
        raise ImportError(f"FCONN_KERNELS={_env!r} but available backends are {sorted(_BACKENDS)}")
    _backend_name = _env
else:
    _backend_name = "native" if _native is not None else "fallback"


def backend_name() -> str:
    return _backend_name


def available_backends() -> list:
    return sorted(_BACKENDS)


def use_backend(name: str) -> None:
    global _backend_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}")
    _backend_name = name


def _impl():
    return _BACKENDS[_backend_name]


def _check_float(arr, what):
    if arr.dtype not in (np.float32, np.float64):
        raise ShapeError(f"{what}: expected float32/float64, got {arr.dtype}")


def _pad_spatial(x, pad):
    if pad == 0:
        return x
    p = ((0, 0), (0, 0), (pad, pad), (pad, pad), (pad, pad))
    return np.pad(x, p)


def conv3d_output_dims(spatial, kernel_size, padding):
    """Output extent per axis: e + 2p - k + 1."""
    out = tuple(int(e) + 2 * padding - kernel_size + 1 for e in spatial)
    if any(o < 1 for o in out):
        raise ShapeError(
            f"conv3d: spatial extents {tuple(spatial)} too small for kernel "
            f"{kernel_size} with padding {padding}"
        )
    return out


def conv3d_forward(inp, weights, bias, padding=0):
    """Batched 3D cross-correlation.

    inp: (N, C_in, X, Y, Z); weights: (C_out, C_in, k, k, k); bias: (C_out,).
    Returns (N, C_out, X', Y', Z') with the standard extent formula.
    """
    inp = np.ascontiguousarray(inp)
    weights = np.ascontiguousarray(weights)
    bias = np.ascontiguousarray(bias)
    _check_float(inp, "conv3d input")
    if inp.ndim != 5 or weights.ndim != 5 or bias.ndim != 1:
        raise ShapeError("conv3d: need 5D input, 5D weights, 1D bias")
    if weights.dtype != inp.dtype or bias.dtype != inp.dtype:
        raise ShapeError("conv3d: input, weights and bias must share a dtype")
    n, c_in, *spatial = inp.shape
    c_out, c_w, *ks = weights.shape
    if c_w != c_in:
        raise ShapeError(f"conv3d: input has {c_in} channels, weights expect {c_w}")
    if len(set(ks)) != 1:
        raise ShapeError(f"conv3d: kernel must be cubic, got {ks}")
    if bias.shape[0] != c_out:
        raise ShapeError(f"conv3d: bias length {bias.shape[0]} != out channels {c_out}")
    k = ks[0]
    out_dims = conv3d_output_dims(spatial, k, padding)
    inp_pad = _pad_spatial(inp, padding)
    out = np.empty((n, c_out) + out_dims, dtype=inp.dtype)
    _impl().conv3d_fwd_core(inp_pad, weights, bias, out)
    return out


def conv3d_backward(grad_out, inp, weights, padding=0):
    """Gradients of conv3d_forward: (grad_input, grad_weights, grad_bias)."""
    grad_out = np.ascontiguousarray(grad_out)
    inp = np.ascontiguousarray(inp)
    weights = np.ascontiguousarray(weights)
    _check_float(grad_out, "conv3d grad_out")
    if grad_out.dtype != inp.dtype or weights.dtype != inp.dtype:
        raise ShapeError("conv3d backward: dtypes must agree")
    n, c_in, *spatial = inp.shape
    c_out = weights.shape[0]
    k = weights.shape[2]
    out_dims = conv3d_output_dims(spatial, k, padding)
    if grad_out.shape != (n, c_out) + out_dims:
        raise ShapeError(
            f"conv3d backward: grad_out shape {grad_out.shape} != {(n, c_out) + out_dims}"
        )
    inp_pad = _pad_spatial(inp, padding)
    gin_pad = np.zeros_like(inp_pad)
    gw = np.zeros_like(weights)
    gb = np.zeros(c_out, dtype=inp.dtype)
    _impl().conv3d_bwd_core(inp_pad, weights, grad_out, gin_pad, gw, gb)
    if padding:
        gin = np.ascontiguousarray(
            gin_pad[:, :, padding:-padding, padding:-padding, padding:-padding]
        )
    else:
        gin = gin_pad
    return gin, gw, gb


def maxpool3d_forward(inp):
    """Non-overlapping 2x2x2 max pooling; ties -> lowest flat spatial index.

    Returns (out, argmax) where argmax holds flat indices into (X, Y, Z).
    """
    inp = np.ascontiguousarray(inp)
    _check_float(inp, "maxpool input")
    if inp.ndim != 5:
        raise ShapeError("maxpool3d: need (N, C, X, Y, Z)")
    spatial = inp.shape[2:]
    if any(e % 2 != 0 or e < 2 for e in spatial):
        raise ShapeError(f"maxpool3d: spatial extents must be even and >= 2, got {spatial}")
    n, c = inp.shape[:2]
    out_dims = tuple(e // 2 for e in spatial)
    out = np.empty((n, c) + out_dims, dtype=inp.dtype)
    arg = np.empty((n, c) + out_dims, dtype=np.int64)
    _impl().maxpool3d_fwd_core(inp, out, arg)
    return out, arg


def maxpool3d_backward(grad_out, argmax, spatial):
    """Route each output gradient to its recorded argmax voxel."""
    grad_out = np.ascontiguousarray(grad_out)
    _check_float(grad_out, "maxpool grad_out")
    if grad_out.shape != argmax.shape:
        raise ShapeError("maxpool3d backward: grad_out and argmax shapes differ")
    n, c = grad_out.shape[:2]
    x, y, z = (int(e) for e in spatial)
    gin = np.zeros((n, c, x, y, z), dtype=grad_out.dtype)
    flat = gin.reshape(n, c, x * y * z)
    np.put_along_axis(
        flat,
        argmax.reshape(n, c, -1),
        grad_out.reshape(n, c, -1).astype(grad_out.dtype, copy=False),
        axis=2,
    )
    return gin


def maxpool3d_gather(inp, argmax):
    """Re-read pooled outputs at frozen argmax positions (gradient checks)."""
    inp = np.ascontiguousarray(inp)
    n, c = inp.shape[:2]
    flat = inp.reshape(n, c, -1)
    vals = np.take_along_axis(flat, argmax.reshape(n, c, -1), axis=2)
    return vals.reshape(argmax.shape)


def pearson_map(x_rows, y_rows):
    """Pearson correlation of every row of ``x_rows`` against every row of ``y_rows``.

    x_rows: (V, T), y_rows: (R, T). Zero-variance rows correlate to exactly 0.
    Returns (corr (V, R) clipped to [-1, 1], n_degenerate_x, n_degenerate_y).
    """
    x_rows = np.ascontiguousarray(x_rows)
    y_rows = np.ascontiguousarray(y_rows)
    _check_float(x_rows, "pearson_map x")
    if x_rows.dtype != y_rows.dtype:
        raise ShapeError("pearson_map: dtypes must agree")
    if x_rows.ndim != 2 or y_rows.ndim != 2 or x_rows.shape[1] != y_rows.shape[1]:
        raise ShapeError(
            f"pearson_map: incompatible shapes {x_rows.shape} vs {y_rows.shape}"
        )
    if x_rows.shape[1] < 2:
        raise ShapeError("pearson_map: need at least 2 samples per series")
    corr = np.empty((x_rows.shape[0], y_rows.shape[0]), dtype=x_rows.dtype)
    ndeg = _impl().pearson_map_core(x_rows, y_rows, corr)
    return corr, int(ndeg[0]), int(ndeg[1])
