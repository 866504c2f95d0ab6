"""Finite-difference verification of every differentiable layer and the full model."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..aggregation import NodeSpec, ScaleShape, node_forward, node_params
from ..autograd import (
    GradCheckReport,
    Parameter,
    Tensor,
    bce_loss,
    bilinear_resize,
    conv2d,
    dense,
    finite_diff_check,
    gru_layer,
    max_pool,
    mse_loss,
    relu,
    sigmoid,
    softplus,
    tanh,
    weighted_average,
)
from ..model import ModelConfig, build_model

TOY_SHAPES = dict(num_classes=2, channels_in=2, frames=8, freq_bins=16, conv_filters=[3, 4, 4], pool_freq=[2, 2, 2], gru_hidden=5, dense_hidden=4)
RECURRENT_LAYERS = ("gru",)


def _projected(out: Tensor, rng: np.random.Generator) -> Tensor:
    # a fixed random projection keeps gradients from cancelling in a plain sum
    return (out * Tensor(rng.normal(size=out.shape))).sum()


def _layer_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[[], Tensor], dict[str, Parameter]]]:
    P = lambda name, *shape, scale=1.0: Parameter(scale * rng.normal(size=shape), name)
    cases = {}

    x, k, b = P("x", 2, 3, 6, 7), P("kernel", 4, 3, 3, 3), P("bias", 4)
    R = rng.normal(size=(2, 4, 4, 5))
    cases["conv2d_valid"] = (lambda: (conv2d(x, k, b) * Tensor(R)).sum(), {"x": x, "kernel": k, "bias": b})

    x2, k2 = P("x", 1, 2, 7, 6), P("kernel", 3, 2, 3, 2)
    R2 = rng.normal(size=(1, 3, 4, 3))
    cases["conv2d_same_strided"] = (lambda: (conv2d(x2, k2, stride=2, padding="same") * Tensor(R2)).sum(), {"x": x2, "kernel": k2})

    x3 = P("x", 2, 2, 4, 5)
    R3u, R3d = rng.normal(size=(2, 2, 7, 9)), rng.normal(size=(2, 2, 2, 3))
    cases["bilinear_up"] = (lambda: (bilinear_resize(x3, (7, 9)) * Tensor(R3u)).sum(), {"x": x3})
    cases["bilinear_down"] = (lambda: (bilinear_resize(x3, (2, 3)) * Tensor(R3d)).sum(), {"x": x3})

    x4 = P("x", 2, 3, 6, 8)
    R4 = rng.normal(size=(2, 3, 3, 4))
    cases["max_pool"] = (lambda: (max_pool(x4, 2) * Tensor(R4)).sum(), {"x": x4})

    ins = [P(f"in{i}", 2, 3, 4) for i in range(3)]
    w = P("weights", 3)
    R5 = rng.normal(size=(2, 3, 4))
    group = {f"in{i}": t for i, t in enumerate(ins)} | {"weights": w}
    cases["weighted_average"] = (lambda: (weighted_average(ins, w) * Tensor(R5)).sum(), group)
    cases["weighted_average_plain"] = (lambda: (weighted_average(ins, w, mode="plain") * Tensor(R5)).sum(), group)

    xd, wd, bd = P("x", 3, 4, 5), P("weight", 5, 6), P("bias", 6)
    R6 = rng.normal(size=(3, 4, 6))
    cases["dense"] = (lambda: (dense(xd, wd, bd) * Tensor(R6)).sum(), {"x": xd, "weight": wd, "bias": bd})

    xg = P("x", 2, 5, 3)
    W, U, bg = P("W", 3, 12, scale=0.5), P("U", 4, 12, scale=0.5), P("b", 12, scale=0.3)
    R7 = rng.normal(size=(2, 5, 4))
    cases["gru"] = (lambda: (gru_layer(xg, W, U, bg) * Tensor(R7)).sum(), {"x": xg, "W": W, "U": U, "b": bg})

    for name, fn in (("relu", relu), ("sigmoid", sigmoid), ("tanh", tanh), ("softplus", softplus)):
        xa = P("x", 4, 5)
        Ra = rng.normal(size=(4, 5))
        cases[name] = ((lambda fn=fn, xa=xa, Ra=Ra: (fn(xa) * Tensor(Ra)).sum()), {"x": xa})

    logits = P("logits", 4, 3)
    target = (rng.random((4, 3)) < 0.5).astype(float)
    cases["bce"] = (lambda: bce_loss(sigmoid(logits), target), {"logits": logits})

    pred = P("pred", 4, 6)
    tgt = rng.normal(size=(4, 6))
    mask = (rng.random((4, 6)) < 0.6).astype(float)
    cases["mse"] = (lambda: mse_loss(pred, tgt, mask), {"pred": pred})

    node = NodeSpec("n", ("a", "b"), ScaleShape(3, 4, 5))
    params = node_params(node, [ScaleShape(2, 3, 8), ScaleShape(3, 6, 2)], rng, "node")
    for p in params.values():
        p.data[...] = rng.normal(scale=0.5, size=p.shape)
    a, bb = P("a", 1, 2, 3, 8), P("b", 1, 3, 6, 2)
    Rn = rng.normal(size=(1, 3, 4, 5))
    cases["aggregation_node"] = (
        lambda: (node_forward(node, [a, bb], params) * Tensor(Rn)).sum(),
        {"a": a, "b": bb} | {p.name: p for p in params.values()},
    )
    return cases


def layer_checks(
    tolerance: float = 1e-4,
    recurrent_tolerance: float = 1e-3,
    seed: int = 0,
    corrupt: float | None = None,
) -> dict[str, GradCheckReport]:
    rng = np.random.default_rng(seed)
    out = {}
    for name, (f, params) in _layer_cases(rng).items():
        tol = recurrent_tolerance if name in RECURRENT_LAYERS else tolerance
        out[name] = finite_diff_check(f, params, tolerance=tol, rng=rng, corrupt=corrupt)
    return out


def toy_model_config(base: ModelConfig | None = None) -> ModelConfig:
    """The configured architecture (aggregator, recurrence, fusion) at toy shapes."""
    extra = {}
    if base is not None:
        extra = {"aggregator": base.aggregator, "bidirectional": base.bidirectional, "fusion": base.fusion}
    return ModelConfig(**TOY_SHAPES, **extra)


def model_check(
    config: ModelConfig,
    tolerance: float = 1e-3,
    seed: int = 0,
    max_coords: int | None = 6,
    corrupt: float | None = None,
) -> GradCheckReport:
    """Gradient check of BCE + masked MSE through the whole network.

    Biases and fusion weights are randomized first: at their zero init, ReLUs
    whose inputs are all dead sit exactly on the kink, where central
    differences are meaningless.
    """
    rng = np.random.default_rng(seed)
    model = build_model(config, rng)
    for name, p in model.parameters().items():
        if name.endswith(("bias", ".b", "fusion")):
            p.data[...] = rng.normal(scale=0.3, size=p.shape)
    B, C = 2, config.num_classes
    x = rng.normal(size=(B, config.channels_in, config.frames, config.freq_bins))
    sed_t = (rng.random((B, config.frames, C)) < 0.5).astype(float)
    doa_t = rng.uniform(-1, 1, size=(B, config.frames, 3 * C))
    mask = np.repeat(sed_t, 3, axis=-1)

    def loss():
        sed, doa = model(x)
        return bce_loss(sed, sed_t) + mse_loss(doa, doa_t, mask)

    return finite_diff_check(loss, model.parameters(), tolerance=tolerance, max_coords=max_coords, rng=rng, corrupt=corrupt)


def run_gradcheck(
    config: ModelConfig | None = None,
    tolerance: float = 1e-3,
    seed: int = 0,
    corrupt: float | None = None,
    max_coords: int | None = 6,
) -> dict:
    layers = layer_checks(tolerance, tolerance, seed, corrupt)
    model = model_check(toy_model_config(config), tolerance, seed, max_coords, corrupt)
    return {
        "tolerance": tolerance,
        "seed": seed,
        "corrupt": corrupt,
        "passed": all(r.passed for r in layers.values()) and model.passed,
        "layers": {name: r.to_dict() for name, r in layers.items()},
        "model": {"aggregator": config.aggregator if config else "none", **model.to_dict()},
    }
