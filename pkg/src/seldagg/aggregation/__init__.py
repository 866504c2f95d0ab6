"""Feature-aggregation graphs: nodes, topologies and their execution."""

from .aggregator import Aggregator, aggregator_forward, node_forward, node_params, resample_to
from .topology import (
    NodeSpec,
    ScaleShape,
    TopologyError,
    TopologySpec,
    Violation,
    bifpn_topology,
    count_nodes,
    dump_topology,
    load_topology,
    make_topology,
    panet_topology,
    sen_layer_sizes,
    sen_topology,
    topology_from_dict,
    topology_to_dict,
    validate_topology,
)

__all__ = [
    "Aggregator",
    "NodeSpec",
    "ScaleShape",
    "TopologyError",
    "TopologySpec",
    "Violation",
    "aggregator_forward",
    "bifpn_topology",
    "count_nodes",
    "dump_topology",
    "load_topology",
    "make_topology",
    "node_forward",
    "node_params",
    "panet_topology",
    "resample_to",
    "sen_layer_sizes",
    "sen_topology",
    "topology_from_dict",
    "topology_to_dict",
    "validate_topology",
]
