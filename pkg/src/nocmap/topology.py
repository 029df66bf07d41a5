"""Mesh geometry, node roles, X-Y routes and hop-distance classes.

Node ids are row-major: ``id = y * width + x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple


class NodeCoord(NamedTuple):
    x: int
    y: int


class NodeRole(Enum):
    PE = "PE"
    MC = "MC"


class TopologyError(ValueError):
    pass


# Per-hop timing. Two router stages keep PEs latency-bound at the default
# workload instead of saturating the MC injection ports.
ROUTER_DELAY = 2
LINK_DELAY = 1


@dataclass(frozen=True)
class TopologyConfig:
    width: int = 4
    height: int = 4
    mc_nodes: tuple[int, ...] = (9, 10)
    link_delay: int = LINK_DELAY
    router_delay: int = ROUTER_DELAY

    def __post_init__(self):
        object.__setattr__(self, "mc_nodes", tuple(sorted(set(int(m) for m in self.mc_nodes))))


@dataclass(frozen=True)
class DistanceClass:
    pe_id: int
    distance: int
    mc_id: int


# Default layouts on the 4x4 mesh.
TWO_MC = TopologyConfig(4, 4, (9, 10))
FOUR_MC = TopologyConfig(4, 4, (5, 6, 9, 10))

ARCHITECTURES = {"2MC": TWO_MC, "4MC": FOUR_MC}


def manhattan(a: NodeCoord, b: NodeCoord) -> int:
    return abs(a.x - b.x) + abs(a.y - b.y)


def xy_route(src: NodeCoord, dst: NodeCoord) -> list[NodeCoord]:
    """Dimension-order path from ``src`` to ``dst``, excluding ``src``.

    Column displacement is resolved fully before row displacement.
    """
    path = []
    x, y = src
    step = 1 if dst.x > x else -1
    while x != dst.x:
        x += step
        path.append(NodeCoord(x, y))
    step = 1 if dst.y > y else -1
    while y != dst.y:
        y += step
        path.append(NodeCoord(x, y))
    return path


class Topology:
    """Immutable, queryable view of a :class:`TopologyConfig`."""

    def __init__(self, config: TopologyConfig):
        if config.width < 1 or config.height < 1:
            raise TopologyError("mesh dimensions must be positive")
        n = config.width * config.height
        if not config.mc_nodes:
            raise TopologyError("at least one MC node is required")
        bad = [m for m in config.mc_nodes if not 0 <= m < n]
        if bad:
            raise TopologyError(f"MC ids out of range for {n} nodes: {bad}")
        if len(config.mc_nodes) >= n:
            raise TopologyError("topology has no PE nodes")
        if config.link_delay < 1 or config.router_delay < 1:
            raise TopologyError("link_delay and router_delay must be >= 1")
        self.config = config
        self.width = config.width
        self.height = config.height
        self.num_nodes = n
        self.mc_ids: tuple[int, ...] = config.mc_nodes
        mcs = set(self.mc_ids)
        self.pe_ids: tuple[int, ...] = tuple(i for i in range(n) if i not in mcs)
        self._nearest = {pe: self._nearest_mc(pe) for pe in self.pe_ids}

    def coord(self, node: int) -> NodeCoord:
        if not 0 <= node < self.num_nodes:
            raise TopologyError(f"node {node} outside {self.width}x{self.height} mesh")
        return NodeCoord(node % self.width, node // self.width)

    def node_id(self, c: NodeCoord) -> int:
        return c.y * self.width + c.x

    def role(self, node: int) -> NodeRole:
        self.coord(node)
        return NodeRole.MC if node in self.mc_ids else NodeRole.PE

    def hops(self, a: int, b: int) -> int:
        return manhattan(self.coord(a), self.coord(b))

    def route(self, a: int, b: int) -> list[int]:
        return [self.node_id(c) for c in xy_route(self.coord(a), self.coord(b))]

    def _nearest_mc(self, pe: int) -> tuple[int, int]:
        # ties go to the lower MC id
        return min((self.hops(pe, m), m) for m in self.mc_ids)

    def _lookup(self, pe: int) -> tuple[int, int]:
        try:
            return self._nearest[pe]
        except KeyError:
            raise TopologyError(f"node {pe} is not a PE") from None

    def nearest_mc(self, pe: int) -> int:
        return self._lookup(pe)[1]

    def distance(self, pe: int) -> int:
        return self._lookup(pe)[0]

    def __repr__(self):
        return f"Topology({self.width}x{self.height}, mc={list(self.mc_ids)})"


def build_topology(config: TopologyConfig) -> Topology:
    return Topology(config)


def classify_distances(topology: Topology) -> list[DistanceClass]:
    """One :class:`DistanceClass` per PE, in row-major PE order."""
    return [
        DistanceClass(pe, topology.distance(pe), topology.nearest_mc(pe))
        for pe in topology.pe_ids
    ]


def group_sizes(classes: Iterable[DistanceClass]) -> dict[int, int]:
    """Number of PEs per distance value, keyed by distance."""
    out: dict[int, int] = {}
    for c in classes:
        out[c.distance] = out.get(c.distance, 0) + 1
    return dict(sorted(out.items()))
