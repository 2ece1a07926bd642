"""Pure numpy implementations of the hot batch kernels.

Selected automatically when the compiled extension is unavailable (or when
``PHANTOMGEN_PURE_PYTHON=1``). Shapes are batch-first: activations are
``(B, L, C)`` float64, conv weights ``(K, Cin, Cout)``, biases ``(Cout,)``.
The dropout mask stream (splitmix64) matches the compiled backend bit for
bit.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 1.0 / 9007199254740992.0


def conv1d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, relu: bool = False) -> np.ndarray:
    """Same-padded cross-correlation along the length axis, optional fused relu."""
    n, length, _ = x.shape
    k = w.shape[0]
    pad = (k - 1) // 2
    xp = np.zeros((n, length + 2 * pad, x.shape[2]))
    xp[:, pad : pad + length, :] = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (B, L, C, K)
    out = np.einsum("blck,kco->blo", windows, w, optimize=True)
    out += b
    if relu:
        np.maximum(out, 0.0, out=out)
    return out


def conv1d_backward(x: np.ndarray, w: np.ndarray, grad_out: np.ndarray, relu_out=None):
    """Gradients of :func:`conv1d_forward`; ``relu_out`` gates the upstream
    gradient when the forward had a fused relu."""
    n, length, cin = x.shape
    k = w.shape[0]
    pad = (k - 1) // 2
    if relu_out is not None:
        grad_out = grad_out * (relu_out != 0.0)
    xp = np.zeros((n, length + 2 * pad, cin))
    xp[:, pad : pad + length, :] = x
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)  # (B, L, C, K)

    grad_b = grad_out.sum(axis=(0, 1))
    grad_w = np.einsum("blck,blo->kco", windows, grad_out, optimize=True)
    grad_xp = np.zeros_like(xp)
    # scatter each kernel tap's contribution back onto the padded input
    for kk in range(k):
        grad_xp[:, kk : kk + length, :] += grad_out @ w[kk].T
    grad_x = grad_xp[:, pad : pad + length, :]
    return grad_x, grad_w, grad_b


def maxpool1d_forward(x: np.ndarray, pool: int):
    """Disjoint-window max; returns output and flat argmax positions."""
    n, length, c = x.shape
    lo = length // pool
    xr = x.reshape(n, lo, pool, c)
    idx = xr.argmax(axis=2)  # first occurrence wins ties (lowest index)
    out = np.take_along_axis(xr, idx[:, :, None, :], axis=2)[:, :, 0, :]
    # absolute source position along the length axis, for the backward pass
    abs_idx = idx + (np.arange(lo) * pool)[None, :, None]
    return out, abs_idx.astype(np.int64)


def maxpool1d_backward(grad_out: np.ndarray, abs_idx: np.ndarray, length: int) -> np.ndarray:
    n, lo, c = grad_out.shape
    grad_x = np.zeros((n, length, c))
    bi = np.arange(n)[:, None, None]
    ci = np.arange(c)[None, None, :]
    np.add.at(grad_x, (bi, abs_idx, ci), grad_out)
    return grad_x


def upsample1d_forward(x: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor repetition of each row ``size`` times."""
    return np.repeat(x, size, axis=1)


def upsample1d_backward(grad_out: np.ndarray, size: int) -> np.ndarray:
    n, ls, c = grad_out.shape
    return grad_out.reshape(n, ls // size, size, c).sum(axis=2)


def _splitmix_uniform(z: np.ndarray) -> np.ndarray:
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * _U53


def dropout_forward(x: np.ndarray, rate: float, seed: int):
    """Inverted dropout with a splitmix64 mask stream; returns (out, scale)."""
    ctr = np.arange(1, x.size + 1, dtype=np.uint64)
    z = np.uint64(seed) + ctr * _GOLDEN
    u = _splitmix_uniform(z).reshape(x.shape)
    scale = (u >= rate) / (1.0 - rate)
    return x * scale, scale
