"""Declarative aggregation DAGs and the PANet / BiFPN / SEN generators.

Backbone scales are addressed as ``P0 .. P{N-1}`` with ``P0`` the finest
(highest frequency resolution) and ``P{N-1}`` the coarsest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

TOPOLOGY_FORMAT = "seldagg-topology"
TOPOLOGY_VERSION = 1


@dataclass(frozen=True)
class ScaleShape:
    channels: int
    time: int
    freq: int

    def __post_init__(self):
        for name in ("channels", "time", "freq"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"ScaleShape.{name} must be a positive integer, got {v!r}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.channels, self.time, self.freq)


@dataclass(frozen=True)
class NodeSpec:
    id: str
    input_ids: tuple[str, ...]
    output_scale: ScaleShape


@dataclass(frozen=True)
class TopologySpec:
    backbone_scales: tuple[ScaleShape, ...]
    nodes: tuple[NodeSpec, ...]
    output_ids: tuple[str, ...]
    name: str = ""

    @property
    def backbone_ids(self) -> tuple[str, ...]:
        return tuple(backbone_id(i) for i in range(len(self.backbone_scales)))

    def scale_of(self, ident: str) -> ScaleShape:
        if ident in self.backbone_ids:
            return self.backbone_scales[self.backbone_ids.index(ident)]
        for node in self.nodes:
            if node.id == ident:
                return node.output_scale
        raise KeyError(ident)

    def output_scales(self) -> list[ScaleShape]:
        return [self.scale_of(i) for i in self.output_ids]


@dataclass(frozen=True)
class Violation:
    kind: str
    node_id: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.node_id}: {self.message}"


class TopologyError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


def backbone_id(index: int) -> str:
    return f"P{index}"


def count_nodes(spec: TopologySpec) -> int:
    return len(spec.nodes)


# -- generators ---------------------------------------------------------------


def panet_topology(scales) -> TopologySpec:
    """Top-down pass (coarsest to finest) followed by a bottom-up pass; 2N nodes."""
    scales = tuple(scales)
    n = len(scales)
    if n < 2:
        raise ValueError(f"PANet needs at least 2 scales, got {n}")
    nodes = []
    for i in range(n - 1, -1, -1):
        inputs = (backbone_id(i),) if i == n - 1 else (backbone_id(i), f"td{i + 1}")
        nodes.append(NodeSpec(f"td{i}", inputs, scales[i]))
    for i in range(n):
        inputs = (f"td{i}",) if i == 0 else (f"td{i}", f"bu{i - 1}")
        nodes.append(NodeSpec(f"bu{i}", inputs, scales[i]))
    return TopologySpec(scales, tuple(nodes), tuple(f"bu{i}" for i in range(n)), name="panet")


def bifpn_topology(scales) -> TopologySpec:
    """Interior top-down nodes plus one output node per scale; 2N - 2 nodes.

    Interior output nodes take the same-scale backbone map as an extra skip input.
    """
    scales = tuple(scales)
    n = len(scales)
    if n < 3:
        raise ValueError(f"BiFPN needs at least 3 scales, got {n}")
    nodes = []
    for i in range(n - 2, 0, -1):
        above = backbone_id(n - 1) if i == n - 2 else f"td{i + 1}"
        nodes.append(NodeSpec(f"td{i}", (backbone_id(i), above), scales[i]))
    for i in range(n):
        if i == 0:
            inputs = (backbone_id(0), "td1")
        elif i == n - 1:
            inputs = (backbone_id(i), f"out{i - 1}")
        else:
            inputs = (backbone_id(i), f"td{i}", f"out{i - 1}")
        nodes.append(NodeSpec(f"out{i}", inputs, scales[i]))
    return TopologySpec(scales, tuple(nodes), tuple(f"out{i}" for i in range(n)), name="bifpn")


def _round_half_up(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def _average_scale(shapes: list[ScaleShape]) -> ScaleShape:
    k = len(shapes)
    return ScaleShape(
        _round_half_up(sum(s.channels for s in shapes) / k),
        _round_half_up(sum(s.time for s in shapes) / k),
        _round_half_up(sum(s.freq for s in shapes) / k),
    )


def sen_layer_sizes(n_scales: int, width: int) -> list[int]:
    """Node counts per SEN layer: ceil((M - 1) / w) until a single node remains."""
    if width < 1:
        raise ValueError(f"compression width must be >= 1, got {width}")
    if n_scales < 2:
        raise ValueError(f"SEN needs at least 2 scales, got {n_scales}")
    sizes = []
    m = n_scales
    while True:
        m = math.ceil((m - 1) / width)
        sizes.append(m)
        if m == 1:
            return sizes


def sen_topology(scales, width: int) -> TopologySpec:
    """Scale Encoder Network: layered compression of N scale lines into one.

    Each layer slides a window of ``width + 1`` lines with stride ``width`` over
    the previous layer's lines. Intermediate nodes take the averaged input
    dimensions; the final node sits at the middle backbone scale.
    """
    scales = tuple(scales)
    n = len(scales)
    sizes = sen_layer_sizes(n, width)
    lines: list[tuple[str, ScaleShape]] = [(backbone_id(i), s) for i, s in enumerate(scales)]
    nodes = []
    for layer, size in enumerate(sizes, start=1):
        m = len(lines)
        new_lines = []
        for j in range(size):
            window = lines[j * width : min(j * width + width, m - 1) + 1]
            if size == 1 and layer == len(sizes):
                out_scale = scales[n // 2]
            else:
                out_scale = _average_scale([s for _, s in window])
            node = NodeSpec(f"sen{layer}_{j}", tuple(i for i, _ in window), out_scale)
            nodes.append(node)
            new_lines.append((node.id, out_scale))
        lines = new_lines
    return TopologySpec(scales, tuple(nodes), (nodes[-1].id,), name=f"sen{width}")


def make_topology(kind: str, scales) -> TopologySpec:
    kind = kind.lower()
    if kind == "panet":
        return panet_topology(scales)
    if kind == "bifpn":
        return bifpn_topology(scales)
    if kind.startswith("sen"):
        return sen_topology(scales, parse_sen_width(kind))
    raise ValueError(f"unknown aggregator {kind!r}")


def parse_sen_width(kind: str) -> int:
    digits = kind[3:].lstrip(":_-")
    if not digits.isdigit():
        raise ValueError(f"SEN aggregator names carry their compression width, e.g. 'sen2'; got {kind!r}")
    return int(digits)


# -- validation ---------------------------------------------------------------


def _level(spec: TopologySpec, scale: ScaleShape) -> int | None:
    for i, s in enumerate(spec.backbone_scales):
        if (s.time, s.freq) == (scale.time, scale.freq):
            return i
    return None


def validate_topology(spec: TopologySpec, max_level_jump: int | None = None) -> list[Violation]:
    """Return every structural problem found in ``spec`` (empty list = valid).

    With ``max_level_jump`` set, edges between backbone-level scales that skip
    more levels than allowed are reported as ``scale-jump``.
    """
    out: list[Violation] = []
    if not spec.backbone_scales:
        out.append(Violation("empty-backbone", "-", "no backbone scales"))
    backbone = set(spec.backbone_ids)
    seen_ids: set[str] = set()
    node_ids = [n.id for n in spec.nodes]
    all_ids = backbone | set(node_ids)
    for node in spec.nodes:
        if node.id in seen_ids or node.id in backbone:
            out.append(Violation("duplicate-id", node.id, "identifier defined more than once"))
        seen_ids.add(node.id)
        if not node.input_ids:
            out.append(Violation("empty-inputs", node.id, "node has no inputs"))
        for inp in node.input_ids:
            if inp == node.id:
                out.append(Violation("cycle", node.id, "node references itself"))
            elif inp not in all_ids:
                out.append(Violation("dangling-reference", node.id, f"unknown input {inp!r}"))

    # cycles among nodes (beyond self loops) via DFS colouring
    edges = {n.id: [i for i in n.input_ids if i in seen_ids and i != n.id] for n in spec.nodes}
    colour: dict[str, int] = {}

    def visit(start: str) -> None:
        stack = [(start, iter(edges.get(start, ())))]
        colour[start] = 1
        while stack:
            nid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[nid] = 2
                stack.pop()
                continue
            c = colour.get(nxt, 0)
            if c == 1:
                out.append(Violation("cycle", nid, f"cycle through {nxt!r}"))
            elif c == 0:
                colour[nxt] = 1
                stack.append((nxt, iter(edges.get(nxt, ()))))

    for nid in edges:
        if colour.get(nid, 0) == 0:
            visit(nid)

    # topological order of the listing
    position = {nid: k for k, nid in enumerate(node_ids)}
    for k, node in enumerate(spec.nodes):
        for inp in node.input_ids:
            if inp in position and inp != node.id and position[inp] > k:
                out.append(Violation("order", node.id, f"input {inp!r} is listed after the node"))

    # outputs
    reachable = set(backbone)
    for node in spec.nodes:  # listing order; ordering violations already reported
        if node.input_ids and all(i in reachable for i in node.input_ids):
            reachable.add(node.id)
    if not spec.output_ids:
        out.append(Violation("missing-output", "-", "no outputs declared"))
    for oid in spec.output_ids:
        if oid not in seen_ids:
            out.append(Violation("missing-output", oid, "output id is not a node"))
        elif oid not in reachable:
            out.append(Violation("unreachable-output", oid, "output does not resolve to backbone features"))

    if max_level_jump is not None:
        for node in spec.nodes:
            dst = _level(spec, node.output_scale)
            for inp in node.input_ids:
                try:
                    src = _level(spec, spec.scale_of(inp))
                except KeyError:
                    continue
                if src is not None and dst is not None and abs(src - dst) > max_level_jump:
                    out.append(Violation("scale-jump", node.id, f"edge from {inp!r} spans {abs(src - dst)} levels"))
    return out


# -- JSON ---------------------------------------------------------------------


def topology_to_dict(spec: TopologySpec) -> dict:
    return {
        "format": TOPOLOGY_FORMAT,
        "version": TOPOLOGY_VERSION,
        "name": spec.name,
        "backbone_scales": [list(s.as_tuple()) for s in spec.backbone_scales],
        "nodes": [{"id": n.id, "inputs": list(n.input_ids), "output_scale": list(n.output_scale.as_tuple())} for n in spec.nodes],
        "outputs": list(spec.output_ids),
    }


def topology_from_dict(doc: dict) -> TopologySpec:
    if doc.get("format", TOPOLOGY_FORMAT) != TOPOLOGY_FORMAT:
        raise ValueError(f"not a topology document: format {doc.get('format')!r}")
    if doc.get("version", TOPOLOGY_VERSION) != TOPOLOGY_VERSION:
        raise ValueError(f"unsupported topology version {doc.get('version')!r}")
    return TopologySpec(
        backbone_scales=tuple(ScaleShape(*s) for s in doc["backbone_scales"]),
        nodes=tuple(NodeSpec(n["id"], tuple(n["inputs"]), ScaleShape(*n["output_scale"])) for n in doc["nodes"]),
        output_ids=tuple(doc["outputs"]),
        name=doc.get("name", ""),
    )


def dump_topology(spec: TopologySpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(spec), indent=2) + "\n")


def load_topology(path: str | Path) -> TopologySpec:
    return topology_from_dict(json.loads(Path(path).read_text()))
