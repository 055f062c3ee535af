"""Numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``LATEREVERB_BACKEND=python`` is set. Inputs are validated by the caller.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv2d_strided(x, kernel, stride):
    kh, kw = kernel.shape
    oh = (x.shape[0] - kh) // stride + 1
    ow = (x.shape[1] - kw) // stride + 1
    out = np.zeros((oh, ow))
    # one kernel row at a time keeps the strided window view small
    for a in range(kh):
        rows = x[a : a + stride * (oh - 1) + 1 : stride]
        windows = sliding_window_view(rows, kw, axis=1)[:, ::stride][:, :ow]
        out += windows @ kernel[a]
    return out


def backward_energy(x):
    return np.cumsum(np.square(x)[::-1])[::-1].copy()


def row_sq_error(a, b):
    d = a - b
    return np.einsum("ij,ij->i", d, d)
