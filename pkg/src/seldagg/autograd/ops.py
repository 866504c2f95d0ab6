"""Layer operations used by the aggregation graphs and the SELD model."""

from __future__ import annotations

import functools
import math
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import DTYPE, DimensionError, Tensor, as_tensor, concat, matmul, stack

FUSION_EPS = 1e-4
BCE_CLAMP = 1e-7


def _pair(v) -> tuple[int, int]:
    if isinstance(v, int):
        return v, v
    a, b = v
    return int(a), int(b)


# -- activations -------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    # np.maximum keeps NaN visible instead of mapping it to 0
    return Tensor._from_op(np.maximum(x.data, 0.0), (x,), lambda g: (g * mask,))


def _sigmoid(v: np.ndarray) -> np.ndarray:
    # branch-free stable form
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),))


def softplus(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._from_op(np.logaddexp(0.0, xd), (x,), lambda g: (g * _sigmoid(xd),))


def linear(x: Tensor) -> Tensor:
    return x


ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh, "linear": linear}


# -- convolution & resampling ------------------------------------------------


def _same_padding(n: int, k: int, s: int) -> tuple[int, int]:
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return total // 2, total - total // 2


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride=1, padding: str = "valid") -> Tensor:
    """2-D cross-correlation over the (time, freq) axes of a [B, C, T, F] tensor.

    ``padding`` is ``"valid"`` (no padding) or ``"same"`` (zero padding so that
    the output extent is ``ceil(n / stride)``, split low side first).
    """
    if x.ndim != 4 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects 4-D input and kernel, got {x.shape} and {kernel.shape}")
    B, C, T, F = x.shape
    O, Ck, kT, kF = kernel.shape
    if C != Ck:
        raise DimensionError(f"conv2d: input has {C} channels, kernel expects {Ck}")
    sT, sF = _pair(stride)
    if sT < 1 or sF < 1:
        raise ValueError("conv2d strides must be >= 1")
    if padding == "same":
        pt, pf = _same_padding(T, kT, sT), _same_padding(F, kF, sF)
    elif padding == "valid":
        pt, pf = (0, 0), (0, 0)
    else:
        raise ValueError(f"unknown padding mode {padding!r}")
    xp = x.data
    if any(pt) or any(pf):
        xp = np.pad(xp, ((0, 0), (0, 0), pt, pf))
    Tp, Fp = xp.shape[2], xp.shape[3]
    if kT > Tp or kF > Fp:
        raise DimensionError(f"conv2d: kernel {kT}x{kF} larger than padded input {Tp}x{Fp}")
    To = (Tp - kT) // sT + 1
    Fo = (Fp - kF) // sF + 1
    W = kernel.data

    if kT == 1 and kF == 1:
        cols = xp[:, :, ::sT, ::sF][:, :, :To, :Fo]
        out = np.einsum("bctf,oc->botf", cols, W[:, :, 0, 0], optimize=True)
    else:
        # im2col as one [B*To*Fo, C*kT*kF] matrix, reused by the backward pass
        win = sliding_window_view(xp, (kT, kF), axis=(2, 3))[:, :, ::sT, ::sF]
        cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(B * To * Fo, C * kT * kF)
        W2 = W.reshape(O, -1)
        out = (cols @ W2.T).reshape(B, To, Fo, O).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, -1, 1, 1)
    out = np.ascontiguousarray(out)

    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        gx = gk = gb = None
        if kT == 1 and kF == 1:
            if kernel.requires_grad:
                gk = np.einsum("botf,bctf->oc", g, cols, optimize=True)[:, :, None, None]
            if x.requires_grad:
                gxp = np.zeros(xp.shape, dtype=DTYPE)
                gxp[:, :, ::sT, ::sF][:, :, :To, :Fo] += np.einsum("botf,oc->bctf", g, W[:, :, 0, 0], optimize=True)
                gx = gxp[:, :, pt[0] : pt[0] + T, pf[0] : pf[0] + F]
        else:
            g2 = g.transpose(0, 2, 3, 1).reshape(-1, O)
            if kernel.requires_grad:
                gk = (g2.T @ cols).reshape(W.shape)
            if x.requires_grad:
                gxp = np.zeros(xp.shape, dtype=DTYPE)
                # [B, C, kT, kF, To, Fo]
                gcols = (g2 @ W2).reshape(B, To, Fo, C, kT, kF).transpose(0, 3, 4, 5, 1, 2)
                for i in range(kT):
                    for j in range(kF):
                        gxp[:, :, i : i + sT * (To - 1) + 1 : sT, j : j + sF * (Fo - 1) + 1 : sF] += gcols[:, :, i, j]
                gx = gxp[:, :, pt[0] : pt[0] + T, pf[0] : pf[0] + F]
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gk) if bias is None else (gx, gk, gb)

    return Tensor._from_op(out, parents, backward)


@functools.lru_cache(maxsize=256)
def interpolation_matrix(n_in: int, n_out: int) -> np.ndarray:
    """[n_out, n_in] linear-interpolation weights under align-corners mapping."""
    if n_in < 1 or n_out < 1:
        raise DimensionError("interpolation extents must be >= 1")
    A = np.zeros((n_out, n_in), dtype=DTYPE)
    if n_in == 1:
        A[:, 0] = 1.0
        return A
    scale = (n_in - 1) / (n_out - 1) if n_out > 1 else 0.0
    for i in range(n_out):
        pos = i * scale
        i0 = min(int(math.floor(pos)), n_in - 2)
        frac = pos - i0
        A[i, i0] += 1.0 - frac
        A[i, i0 + 1] += frac
    A.setflags(write=False)
    return A


def bilinear_resize(x: Tensor, target: tuple[int, int]) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"bilinear_resize expects [B, C, T, F], got {x.shape}")
    T2, F2 = int(target[0]), int(target[1])
    if T2 < 1 or F2 < 1:
        raise DimensionError(f"bilinear_resize target must be >= 1, got {target}")
    T, F = x.shape[2], x.shape[3]
    if (T, F) == (T2, F2):
        return x
    At = interpolation_matrix(T, T2)
    Af = interpolation_matrix(F, F2)
    out = np.matmul(At, x.data @ Af.T)
    return Tensor._from_op(out, (x,), lambda g: (np.matmul(At.T, g @ Af),))


def max_pool(x: Tensor, window, stride=None) -> Tensor:
    if x.ndim != 4:
        raise DimensionError(f"max_pool expects [B, C, T, F], got {x.shape}")
    wT, wF = _pair(window)
    sT, sF = _pair(stride if stride is not None else window)
    B, C, T, F = x.shape
    if wT > T or wF > F:
        raise DimensionError(f"max_pool window {wT}x{wF} larger than input {T}x{F}")
    if (sT, sF) == (wT, wF):
        # non-overlapping windows: crop and regroup without a strided copy
        To, Fo = T // wT, F // wF
        flat = x.data[:, :, : To * wT, : Fo * wF].reshape(B, C, To, wT, Fo, wF)
        flat = flat.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, To, Fo, wT * wF)
    else:
        win = sliding_window_view(x.data, (wT, wF), axis=(2, 3))[:, :, ::sT, ::sF]
        To, Fo = win.shape[2], win.shape[3]
        flat = win.reshape(B, C, To, Fo, wT * wF)
    arg = flat.argmax(axis=-1)  # first maximal element wins ties
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    di, dj = np.divmod(arg, wF)
    rows = np.arange(To)[None, None, :, None] * sT + di
    cols = np.arange(Fo)[None, None, None, :] * sF + dj
    base = (np.arange(B)[:, None, None, None] * C + np.arange(C)[None, :, None, None]) * (T * F)
    flat_index = (base + rows * F + cols).reshape(-1)

    def backward(g):
        gx = np.bincount(flat_index, weights=g.reshape(-1), minlength=B * C * T * F)
        return (gx.reshape(B, C, T, F),)

    return Tensor._from_op(out, (x,), backward)


# -- fusion & dense ----------------------------------------------------------


def weighted_average(inputs: Sequence[Tensor], weights: Tensor, mode: str = "softplus", eps: float = FUSION_EPS) -> Tensor:
    """Trainable fusion of equally-shaped tensors.

    ``softplus`` mode: sum_i softplus(w_i) x_i / (sum_i softplus(w_i) + eps).
    ``plain`` mode: sum_i w_i x_i with unconstrained weights.
    """
    if len(inputs) == 0:
        raise ValueError("weighted_average needs at least one input")
    shape = inputs[0].shape
    for t in inputs[1:]:
        if t.shape != shape:
            raise DimensionError(f"weighted_average: shape {t.shape} != {shape}")
    if weights.shape != (len(inputs),):
        raise DimensionError(f"weighted_average: {len(inputs)} inputs but weights of shape {weights.shape}")
    n = len(inputs)
    xs = [t.data for t in inputs]
    w = weights.data
    if mode == "softplus":
        sp = np.logaddexp(0.0, w)
        denom = sp.sum() + eps
        coef = sp / denom
    elif mode == "plain":
        coef = w.copy()
    else:
        raise ValueError(f"unknown fusion mode {mode!r}")
    out = coef[0] * xs[0]
    for i in range(1, n):
        out = out + coef[i] * xs[i]

    def backward(g):
        grads: list[np.ndarray | None] = [g * coef[i] if inputs[i].requires_grad else None for i in range(n)]
        gw = None
        if weights.requires_grad:
            dots = np.array([np.vdot(g, xs[i]) for i in range(n)])
            if mode == "softplus":
                # d out / d sp_i = (x_i - out) / denom
                d_sp = (dots - np.vdot(g, out)) / denom
                gw = d_sp * _sigmoid(w)
            else:
                gw = dots
        return (*grads, gw)

    return Tensor._from_op(out, (*inputs, weights), backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"dense: input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    out = matmul(x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise DimensionError(f"dense: bias shape {bias.shape} != ({weight.shape[1]},)")
        out = out + bias
    return out


# -- recurrence --------------------------------------------------------------


def gru_layer(x: Tensor, W: Tensor, U: Tensor, b: Tensor, reverse: bool = False) -> Tensor:
    """Gated recurrent unit over axis 1 of a [B, T, D] tensor, zero initial state.

    Gate blocks in ``W`` [D, 3H], ``U`` [H, 3H], ``b`` [3H] are ordered
    (update, reset, candidate)::

        z = sigmoid(x W_z + h U_z + b_z)
        r = sigmoid(x W_r + h U_r + b_r)
        n = tanh(x W_n + r * (h U_n) + b_n)
        h' = (1 - z) * n + z * h
    """
    if x.ndim != 3:
        raise DimensionError(f"gru_layer expects [B, T, D], got {x.shape}")
    B, T, D = x.shape
    H = U.shape[0]
    if W.shape != (D, 3 * H) or U.shape != (H, 3 * H) or b.shape != (3 * H,):
        raise DimensionError(f"gru_layer: inconsistent gate shapes W{W.shape} U{U.shape} b{b.shape} for D={D}")
    if T < 1:
        raise DimensionError("gru_layer needs T >= 1")
    xw = dense(x, W, b)
    h = Tensor(np.zeros((B, H)))
    outputs: list[Tensor] = [None] * T  # type: ignore[list-item]
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        xt = xw[:, t, :]
        hu = matmul(h, U)
        z = sigmoid(xt[:, :H] + hu[:, :H])
        r = sigmoid(xt[:, H : 2 * H] + hu[:, H : 2 * H])
        n = tanh(xt[:, 2 * H :] + r * hu[:, 2 * H :])
        h = n + z * (h - n)
        outputs[t] = h
    return stack(outputs, axis=1)


def bidirectional_gru(x: Tensor, fwd: Sequence[Tensor], bwd: Sequence[Tensor]) -> Tensor:
    return concat([gru_layer(x, *fwd), gru_layer(x, *bwd, reverse=True)], axis=-1)


# -- losses ------------------------------------------------------------------


def bce_loss(pred: Tensor, target, delta: float = BCE_CLAMP) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"bce_loss: pred {pred.shape} vs target {target.shape}")
    p = np.clip(pred.data, delta, 1.0 - delta)
    t = target.data
    n = p.size
    loss = -np.mean(t * np.log(p) + (1.0 - t) * np.log1p(-p))
    inside = (pred.data > delta) & (pred.data < 1.0 - delta)

    def backward(g):
        return (g * inside * (p - t) / (p * (1.0 - p)) / n, None)

    return Tensor._from_op(np.asarray(loss), (pred, target), backward)


def mse_loss(pred: Tensor, target, mask=None) -> Tensor:
    """Mean squared error over the elements where ``mask`` is nonzero.

    An all-zero mask yields a loss of exactly 0 (with zero gradient).
    """
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss: pred {pred.shape} vs target {target.shape}")
    diff = pred.data - target.data
    if mask is None:
        m = np.ones_like(diff)
    else:
        mask = mask.data if isinstance(mask, Tensor) else np.asarray(mask, dtype=DTYPE)
        try:
            m = np.broadcast_to(mask, diff.shape).astype(DTYPE)
        except ValueError as exc:
            raise DimensionError(f"mse_loss: mask {mask.shape} not broadcastable to {diff.shape}") from exc
    count = m.sum()
    if count == 0:
        return Tensor._from_op(np.asarray(0.0), (pred,), lambda g: (np.zeros_like(diff),))
    loss = np.sum(m * diff * diff) / count

    def backward(g):
        return (g * 2.0 * m * diff / count, None)

    return Tensor._from_op(np.asarray(loss), (pred, target), backward)
