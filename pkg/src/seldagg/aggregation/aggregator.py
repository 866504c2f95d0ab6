from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from ..autograd import ACTIVATIONS, DimensionError, Parameter, Tensor, bilinear_resize, conv2d, weighted_average
from .topology import NodeSpec, ScaleShape, TopologyError, TopologySpec, validate_topology

# raw fusion weight whose softplus is exactly 1
FUSION_INIT = math.log(math.e - 1.0)


def glorot_kernel(rng: np.random.Generator, c_out: int, c_in: int, kT: int = 1, kF: int = 1) -> np.ndarray:
    fan_in, fan_out = c_in * kT * kF, c_out * kT * kF
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(c_out, c_in, kT, kF))


def resample_to(x: Tensor, scale: ScaleShape, projection: Parameter | None = None) -> Tensor:
    """Bilinear resize on (time, freq), then a 1x1 projection if channels differ."""
    if projection is None and x.shape[1] != scale.channels:
        raise DimensionError(f"{x.shape[1]} channels cannot reach {scale.channels} without a projection")
    y = bilinear_resize(x, (scale.time, scale.freq))
    if projection is not None:
        y = conv2d(y, projection)
    return y


def node_params(node: NodeSpec, input_scales: Sequence[ScaleShape], rng: np.random.Generator, prefix: str) -> dict[str, Parameter]:
    c = node.output_scale.channels
    params = {
        "fusion": Parameter(np.full(len(node.input_ids), FUSION_INIT), f"{prefix}.fusion"),
        "kernel": Parameter(glorot_kernel(rng, c, c), f"{prefix}.kernel"),
        "bias": Parameter(np.zeros(c), f"{prefix}.bias"),
    }
    for k, s in enumerate(input_scales):
        if s.channels != c:
            params[f"proj{k}"] = Parameter(glorot_kernel(rng, c, s.channels), f"{prefix}.proj{k}")
    return params


def node_forward(
    node: NodeSpec,
    inputs: Sequence[Tensor],
    params: Mapping[str, Parameter],
    fusion: str = "softplus",
    activation: str = "relu",
    return_fused: bool = False,
):
    """Resample every input to the node scale, fuse, then 1x1 conv + activation."""
    if len(inputs) != len(node.input_ids):
        raise DimensionError(f"node {node.id}: expected {len(node.input_ids)} inputs, got {len(inputs)}")
    scale = node.output_scale
    resampled = [resample_to(x, scale, params.get(f"proj{k}")) for k, x in enumerate(inputs)]
    fused = weighted_average(resampled, params["fusion"], mode=fusion)
    out = ACTIVATIONS[activation](conv2d(fused, params["kernel"], params["bias"]))
    return (out, fused) if return_fused else out


class Aggregator:
    """A validated topology together with its per-node parameters."""

    def __init__(
        self,
        spec: TopologySpec,
        rng: np.random.Generator,
        prefix: str = "agg",
        fusion: str = "softplus",
        activation: str = "relu",
    ):
        violations = validate_topology(spec)
        if violations:
            raise TopologyError(violations)
        self.spec = spec
        self.fusion = fusion
        self.activation = activation
        self.node_params: dict[str, dict[str, Parameter]] = {}
        for node in spec.nodes:
            in_scales = [spec.scale_of(i) for i in node.input_ids]
            self.node_params[node.id] = node_params(node, in_scales, rng, f"{prefix}.{node.id}")
        if fusion == "plain":
            for group in self.node_params.values():
                group["fusion"].data[...] = 1.0 / group["fusion"].size

    def parameters(self) -> dict[str, Parameter]:
        return {p.name: p for group in self.node_params.values() for p in group.values()}

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def forward(self, features: Sequence[Tensor]) -> list[Tensor]:
        scales = self.spec.backbone_scales
        if len(features) != len(scales):
            raise DimensionError(f"aggregator expects {len(scales)} feature maps, got {len(features)}")
        values: dict[str, Tensor] = {}
        for ident, x, s in zip(self.spec.backbone_ids, features, scales):
            if x.shape[1:] != s.as_tuple():
                raise DimensionError(f"feature {ident} has shape {x.shape[1:]}, expected {s.as_tuple()}")
            values[ident] = x
        for node in self.spec.nodes:
            inputs = [values[i] for i in node.input_ids]
            values[node.id] = node_forward(node, inputs, self.node_params[node.id], self.fusion, self.activation)
        return [values[i] for i in self.spec.output_ids]

    __call__ = forward


def aggregator_forward(agg: Aggregator, features: Sequence[Tensor]) -> list[Tensor]:
    return agg.forward(features)
