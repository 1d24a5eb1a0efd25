"""Simulated device topology and tile-to-device assignment.

Devices are linked by a Peer-to-Peer reachability graph. A transfer
between tiles on the same device is free, one between P2P-reachable
devices costs weight_p2p per byte and any other transfer is staged
through the host at weight_staged per byte. New tiles go to the
least-loaded device that minimizes the cost toward their already
assigned neighbors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import networkx as nx
import numpy as np

from progressive_lbm.errors import TopologyFormatError
from progressive_lbm.lattice import Stencil

logger = logging.getLogger(__name__)

Coords = tuple[int, ...]
BYTES_PER_VALUE = 8


class AssignmentPolicy(str, Enum):
    """'simple' takes the first available device; 'optimized' minimizes cost."""

    SIMPLE = "simple"
    OPTIMIZED = "optimized"


class ExchangeClass(str, Enum):
    INTRA = "intra"
    P2P = "p2p"
    STAGED = "staged"


@dataclass
class ExchangeCounters:
    """Transferred bytes per communication class."""

    intra: int = 0
    p2p: int = 0
    staged: int = 0

    def add(self, kind: ExchangeClass, size: int) -> None:
        if kind is ExchangeClass.INTRA:
            self.intra += size
        elif kind is ExchangeClass.P2P:
            self.p2p += size
        else:
            self.staged += size

    @property
    def total(self) -> int:
        return self.intra + self.p2p + self.staged

    def modeled_cost(self, weight_p2p: float, weight_staged: float) -> float:
        """Weighted bytes; intra-device traffic is free."""
        return weight_p2p * self.p2p + weight_staged * self.staged

    def snapshot(self) -> ExchangeCounters:
        return ExchangeCounters(self.intra, self.p2p, self.staged)

    def as_dict(self) -> dict[str, int]:
        return {"intra": self.intra, "p2p": self.p2p, "staged": self.staged}


@dataclass
class DeviceTopology:
    """Simulated devices with a symmetric P2P reachability matrix."""

    p2p: np.ndarray
    """Boolean matrix, symmetric with a true diagonal."""

    weight_p2p: float = 0.5
    weight_staged: float = 1.0
    counters: ExchangeCounters = field(default_factory=ExchangeCounters)
    source: Optional[Path] = None
    graph: nx.Graph = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.p2p = np.asarray(self.p2p, dtype=bool)
        errors = self.validate()
        if errors:
            raise TopologyFormatError(self.source, "; ".join(errors))
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(self.n_devices))
        for i in range(self.n_devices):
            for j in range(i + 1, self.n_devices):
                if self.p2p[i, j]:
                    self.graph.add_edge(i, j)

    @classmethod
    def fully_connected(cls, n_devices: int, **weights: float) -> DeviceTopology:
        return cls(np.ones((n_devices, n_devices), dtype=bool), **weights)

    @classmethod
    def without_p2p(cls, n_devices: int, **weights: float) -> DeviceTopology:
        """Every cross-device transfer is staged."""
        return cls(np.eye(n_devices, dtype=bool), **weights)

    @classmethod
    def from_hubs(cls, hubs: Sequence[Sequence[int]], **weights: float) -> DeviceTopology:
        """Full P2P inside each hub, none across hubs."""
        n = sum(len(h) for h in hubs)
        p2p = np.eye(n, dtype=bool)
        for hub in hubs:
            for i in hub:
                for j in hub:
                    p2p[i, j] = True
        return cls(p2p, **weights)

    @classmethod
    def from_file(cls, path: Path | str, **weights: float) -> DeviceTopology:
        """Read a topology file.

        The first non-comment line holds the device count; each of the
        next n lines holds n flags 0/1, either space separated or as one
        run of digits. Lines starting with '#' are ignored.

        Raises:
            TopologyFormatError: On any format or invariant violation.
        """
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise TopologyFormatError(path, f"cannot read file: {e}") from e
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        if not lines:
            raise TopologyFormatError(path, "empty file")
        try:
            n = int(lines[0])
        except ValueError as e:
            raise TopologyFormatError(
                path, f"first line must be the device count, got '{lines[0]}'"
            ) from e
        if n < 1:
            raise TopologyFormatError(path, "device count must be >= 1")
        rows = lines[1:]
        if len(rows) != n:
            raise TopologyFormatError(path, f"expected {n} matrix rows, found {len(rows)}")
        matrix = np.zeros((n, n), dtype=bool)
        for i, row in enumerate(rows):
            tokens = row.split() if " " in row or "\t" in row else list(row)
            if len(tokens) != n or any(t not in ("0", "1") for t in tokens):
                raise TopologyFormatError(path, f"row {i} must hold {n} flags 0/1, got '{row}'")
            matrix[i] = [t == "1" for t in tokens]
        topology = cls(matrix, source=path, **weights)
        logger.info(f"Loaded topology {path}: {n} devices, hubs {topology.hubs()}")
        return topology

    @property
    def n_devices(self) -> int:
        return int(self.p2p.shape[0])

    def validate(self) -> list[str]:
        errors = []
        if self.p2p.ndim != 2 or self.p2p.shape[0] != self.p2p.shape[1]:
            return [f"p2p matrix must be square (got shape {self.p2p.shape})"]
        if self.p2p.shape[0] < 1:
            errors.append("at least one device is required")
        if not np.array_equal(self.p2p, self.p2p.T):
            errors.append("p2p matrix must be symmetric")
        if not np.all(np.diag(self.p2p)):
            errors.append("p2p matrix must have a true diagonal")
        if not 0 < self.weight_p2p <= self.weight_staged:
            errors.append(
                f"weights must satisfy 0 < weight_p2p <= weight_staged "
                f"(got {self.weight_p2p}, {self.weight_staged})"
            )
        return errors

    def hubs(self) -> list[list[int]]:
        """Groups of devices connected through P2P links."""
        return sorted(sorted(c) for c in nx.connected_components(self.graph))

    def exchange_class(self, a: int, b: int) -> ExchangeClass:
        if a == b:
            return ExchangeClass.INTRA
        if self.p2p[a, b]:
            return ExchangeClass.P2P
        return ExchangeClass.STAGED

    def reachability(self) -> dict[str, list[tuple[int, int]]]:
        """Device pairs (i < j) by exchange class."""
        classes: dict[str, list[tuple[int, int]]] = {"p2p": [], "staged": []}
        for i in range(self.n_devices):
            for j in range(i + 1, self.n_devices):
                classes[self.exchange_class(i, j).value].append((i, j))
        return classes


@dataclass
class AssignmentState:
    """Tiles assigned to each device so far."""

    tiles_per_device: list[int]
    total: int = 0

    @classmethod
    def empty(cls, n_devices: int) -> AssignmentState:
        return cls([0] * n_devices)

    def record(self, device: int) -> None:
        self.tiles_per_device[device] += 1
        self.total += 1

    @property
    def spread(self) -> int:
        return max(self.tiles_per_device) - min(self.tiles_per_device)


class NeighborSource(Protocol):
    """What assignment needs to know about the mesh."""

    def face_neighbors(self, coords: Coords) -> list[Coords]: ...

    def owner_of(self, coords: Coords) -> Optional[int]: ...


def transfer_size(extent: int, d: int, n_components: int, stencil: Stencil) -> int:
    """Bytes moved across one tile face per exchange.

    face cells x components x (crossing populations + psi) x 8.
    """
    q_cross = stencil.crossing_count()
    return extent ** (d - 1) * n_components * (q_cross + 1) * BYTES_PER_VALUE


def gamma(device: int, neighbor_owner: int, size: int, topology: DeviceTopology) -> float:
    """Cost of placing a tile on device next to a neighbor on neighbor_owner."""
    kind = topology.exchange_class(device, neighbor_owner)
    if kind is ExchangeClass.INTRA:
        return 0.0
    if kind is ExchangeClass.P2P:
        return topology.weight_p2p * size
    return topology.weight_staged * size


def f_cost(
    coords: Coords,
    device: int,
    mesh: NeighborSource,
    topology: DeviceTopology,
    size: int,
) -> float:
    """Sum of gamma over the assigned face neighbors of a tile."""
    total = 0.0
    for neighbor in mesh.face_neighbors(coords):
        owner = mesh.owner_of(neighbor)
        if owner is not None:
            total += gamma(device, owner, size, topology)
    return total


def eligible_devices(state: AssignmentState, capacity: Optional[int] = None) -> list[int]:
    """Least-loaded devices, ascending; devices at capacity are excluded."""
    counts = state.tiles_per_device
    open_devices = [
        dev for dev, n in enumerate(counts) if capacity is None or n < capacity
    ]
    if not open_devices:
        return []
    least = min(counts[dev] for dev in open_devices)
    return [dev for dev in open_devices if counts[dev] == least]


def assign_device(
    coords: Coords,
    mesh: NeighborSource,
    topology: DeviceTopology,
    state: AssignmentState,
    policy: AssignmentPolicy,
    size: int,
    capacity: Optional[int] = None,
) -> int:
    """Choose and record the device for a new tile.

    Args:
        coords: The unassigned tile.
        mesh: Mesh providing neighbors and their owners.
        topology: Device topology.
        state: Assignment counts, updated in place.
        policy: simple or optimized.
        size: Transfer size per face.
        capacity: Optional tiles-per-device limit.

    Returns:
        The chosen device id.

    Raises:
        RuntimeError: If every device is at capacity.
    """
    candidates = eligible_devices(state, capacity)
    if not candidates:
        raise RuntimeError(f"No device can take tile {coords}: all devices at capacity")
    if policy is AssignmentPolicy.SIMPLE:
        chosen = candidates[0]
    else:
        chosen = min(
            candidates, key=lambda dev: (f_cost(coords, dev, mesh, topology, size), dev)
        )
    state.record(chosen)
    return chosen


def record_exchange(
    receiver_owner: int, neighbor_owner: int, size: int, topology: DeviceTopology
) -> ExchangeClass:
    """Account one halo transfer in the topology's byte counters."""
    kind = topology.exchange_class(receiver_owner, neighbor_owner)
    topology.counters.add(kind, size)
    return kind


def adjacency_graph(mesh: NeighborSource, tiles: Iterable[Coords]) -> nx.MultiGraph:
    """Tile adjacency with one edge per shared face.

    Two tiles wrapped around a periodic axis of two tiles share two faces
    and get two parallel edges.
    """
    graph = nx.MultiGraph()
    coords = sorted(tiles)
    graph.add_nodes_from(coords)
    for tile in coords:
        for neighbor in mesh.face_neighbors(tile):
            if neighbor > tile:
                graph.add_edge(tile, neighbor)
    return graph


def expected_exchange(
    mesh: NeighborSource,
    tiles: Iterable[Coords],
    topology: DeviceTopology,
    size: int,
    exchanges: int = 2,
) -> ExchangeCounters:
    """Closed-form bytes of `exchanges` halo exchanges over the current mesh.

    Each shared face moves size bytes in both directions per exchange,
    classed by the owners of the two tiles.
    """
    counters = ExchangeCounters()
    graph = adjacency_graph(mesh, tiles)
    for a, b in graph.edges():
        owner_a, owner_b = mesh.owner_of(a), mesh.owner_of(b)
        if owner_a is None or owner_b is None:
            raise ValueError(f"Unassigned tile in adjacency {a} - {b}")
        counters.add(topology.exchange_class(owner_a, owner_b), 2 * size * exchanges)
    return counters


@dataclass
class OwnerGrid:
    """Minimal mesh of owned tile coordinates, for replaying growth traces."""

    owners: dict[Coords, int] = field(default_factory=dict)

    def face_neighbors(self, coords: Coords) -> list[Coords]:
        found = []
        for axis in range(len(coords)):
            for step in (-1, 1):
                neighbor = tuple(c + step if a == axis else c for a, c in enumerate(coords))
                if neighbor in self.owners:
                    found.append(neighbor)
        return found

    def owner_of(self, coords: Coords) -> Optional[int]:
        return self.owners.get(coords)


@dataclass
class TraceResult:
    """Outcome of replaying one growth trace."""

    assignments: list[int]
    costs: list[float]
    spreads: list[int]

    @property
    def total_cost(self) -> float:
        return sum(self.costs)


def replay_trace(
    trace: Sequence[Coords],
    topology: DeviceTopology,
    policy: AssignmentPolicy,
    size: int = 1,
) -> TraceResult:
    """Assign tiles in trace order and report the cost of each decision."""
    grid = OwnerGrid()
    state = AssignmentState.empty(topology.n_devices)
    assignments, costs, spreads = [], [], []
    for coords in trace:
        device = assign_device(coords, grid, topology, state, policy, size)
        costs.append(f_cost(coords, device, grid, topology, size))
        grid.owners[coords] = device
        assignments.append(device)
        spreads.append(state.spread)
    return TraceResult(assignments, costs, spreads)
