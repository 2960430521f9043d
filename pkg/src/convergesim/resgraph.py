"""Cluster resource graph and nested allocations.

Nodes expose a core count and an optional kernel-bypass NIC device; an
allocation is a per-node grant of core counts carved out of a parent
allocation. The carve/release rules enforce hierarchical bounding: a
child's node set is a subset of its parent's, and on every node the core
counts granted to children never exceed the parent's own grant.

Core grants are counts per node, not individual core identities; nothing
here binds to specific core IDs, which keeps the accounting (and its
brute-force audit) simple. The bypass NIC is a pass-through device
shareable by all allocations on a node, not a partitioned resource.
"""

from dataclasses import dataclass, field

BYPASS_NIC = "bypass_nic"


class ResourceError(Exception):
    pass


class UnknownAllocationError(ResourceError):
    pass


class InsufficientCapacityError(ResourceError):
    """The request cannot be satisfied from the parent's free capacity."""


class AllocationInUseError(ResourceError):
    """Release attempted while child allocations are still live."""


@dataclass(frozen=True)
class ClusterSpec:
    node_count: int
    cores_per_node: int
    has_bypass_nic: bool = True
    # the device flag is per node: ids listed here lack the NIC even when
    # the cluster-wide flag is on
    nodes_without_nic: tuple[int, ...] = ()

    def validate(self):
        if self.node_count < 1:
            raise ValueError("node_count must be >= 1")
        if self.cores_per_node < 1:
            raise ValueError("cores_per_node must be >= 1")
        bad = [i for i in self.nodes_without_nic if not 0 <= i < self.node_count]
        if bad:
            raise ValueError(f"nodes_without_nic out of range: {bad}")


@dataclass(frozen=True)
class NodeRecord:
    node_id: int
    hostname: str
    cores: int
    devices: tuple[str, ...] = ()

    @property
    def has_bypass_nic(self) -> bool:
        return BYPASS_NIC in self.devices


@dataclass(frozen=True)
class ResourceRequest:
    nodes: int
    cores_per_node: int = 0  # ignored when exclusive
    exclusive: bool = True
    require_bypass_nic: bool = False

    def validate(self):
        if self.nodes < 1:
            raise ValueError("request.nodes must be >= 1")
        if not self.exclusive and self.cores_per_node < 1:
            raise ValueError("non-exclusive request needs cores_per_node >= 1")


@dataclass
class Allocation:
    alloc_id: int
    parent: int | None
    node_slices: dict[int, int]  # node_id -> granted core count
    lifetime: float | None = None
    children: set[int] = field(default_factory=set)
    released: bool = False

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.node_slices)

    @property
    def total_cores(self) -> int:
        return sum(self.node_slices.values())


class ResourceGraph:
    """Nodes plus the live allocation tree rooted at `root_allocation`."""

    def __init__(self, nodes: list[NodeRecord]):
        self.nodes = {n.node_id: n for n in nodes}
        hostnames = [n.hostname for n in nodes]
        if len(set(hostnames)) != len(hostnames):
            raise ValueError("hostnames must be unique")
        self._allocations: dict[int, Allocation] = {}
        self._next_alloc_id = 0
        root = Allocation(
            alloc_id=self._take_id(),
            parent=None,
            node_slices={n.node_id: n.cores for n in nodes},
        )
        self._allocations[root.alloc_id] = root
        self.root_allocation = root.alloc_id
        # append-only op log, consumed by external accounting audits
        self.oplog: list[tuple] = []

    def _take_id(self) -> int:
        self._next_alloc_id += 1
        return self._next_alloc_id

    def allocation(self, alloc_id: int) -> Allocation:
        alloc = self._allocations.get(alloc_id)
        if alloc is None or alloc.released:
            raise UnknownAllocationError(f"allocation {alloc_id} does not exist")
        return alloc

    def live_allocations(self) -> list[Allocation]:
        return [a for a in self._allocations.values() if not a.released]

    def free_cores(self, alloc_id: int, node_id: int) -> int:
        """Cores of `node_id` granted to `alloc_id` and not re-granted to a child."""
        alloc = self.allocation(alloc_id)
        held = alloc.node_slices.get(node_id, 0)
        for child_id in alloc.children:
            held -= self._allocations[child_id].node_slices.get(node_id, 0)
        return held

    def carve(self, parent_id: int, request: ResourceRequest,
              lifetime: float | None = None) -> Allocation:
        """Grant a child allocation out of the parent's free capacity.

        Node selection is first-fit in ascending node_id order, which keeps
        placement deterministic. Exclusive requests take every core of each
        granted node and require the node to be entirely free within the
        parent; non-exclusive requests take `cores_per_node` per node.
        """
        request.validate()
        parent = self.allocation(parent_id)
        chosen: dict[int, int] = {}
        for node_id in parent.node_ids:
            if len(chosen) == request.nodes:
                break
            node = self.nodes[node_id]
            if request.require_bypass_nic and not node.has_bypass_nic:
                continue
            free = self.free_cores(parent_id, node_id)
            if request.exclusive:
                if free == node.cores and parent.node_slices[node_id] == node.cores:
                    chosen[node_id] = node.cores
            else:
                if free >= request.cores_per_node:
                    chosen[node_id] = request.cores_per_node
        if len(chosen) < request.nodes:
            raise InsufficientCapacityError(
                f"allocation {parent_id} cannot satisfy {request.nodes} node(s) "
                f"(found {len(chosen)} candidate(s))"
            )
        child = Allocation(
            alloc_id=self._take_id(),
            parent=parent_id,
            node_slices=chosen,
            lifetime=lifetime,
        )
        self._allocations[child.alloc_id] = child
        parent.children.add(child.alloc_id)
        self.oplog.append(("carve", child.alloc_id, parent_id, dict(chosen)))
        return child

    def release(self, alloc_id: int) -> None:
        """Return an allocation's resources to its parent."""
        alloc = self.allocation(alloc_id)
        if alloc.parent is None:
            raise ResourceError("the root allocation cannot be released")
        if alloc.children:
            raise AllocationInUseError(
                f"allocation {alloc_id} still has live children {sorted(alloc.children)}"
            )
        alloc.released = True
        self._allocations[alloc.parent].children.discard(alloc_id)
        self.oplog.append(("release", alloc_id, alloc.parent, dict(alloc.node_slices)))

    def audit(self) -> None:
        """Assert the bounding and conservation invariants on the live tree.

        Per node: the root grant equals the node's core count, every
        allocation's children stay within its grant, and summing each live
        allocation's free cores recovers the node's core count exactly.
        """
        root = self._allocations[self.root_allocation]
        for node_id, node in self.nodes.items():
            if root.node_slices.get(node_id) != node.cores:
                raise AssertionError(f"root does not own all cores of node {node_id}")
        for alloc in self.live_allocations():
            for node_id in alloc.node_slices:
                if self.free_cores(alloc.alloc_id, node_id) < 0:
                    raise AssertionError(
                        f"children of allocation {alloc.alloc_id} oversubscribe node {node_id}"
                    )
            if alloc.parent is not None:
                parent = self._allocations[alloc.parent]
                for node_id, count in alloc.node_slices.items():
                    if node_id not in parent.node_slices:
                        raise AssertionError(
                            f"allocation {alloc.alloc_id} uses node {node_id} "
                            f"outside its parent"
                        )
                    if count > parent.node_slices[node_id]:
                        raise AssertionError(
                            f"allocation {alloc.alloc_id} exceeds parent grant on node {node_id}"
                        )
        for node_id, node in self.nodes.items():
            free_sum = sum(
                self.free_cores(a.alloc_id, node_id)
                for a in self.live_allocations()
                if node_id in a.node_slices
            )
            if free_sum != node.cores:
                raise AssertionError(
                    f"conservation broken on node {node_id}: free sum {free_sum} "
                    f"!= {node.cores}"
                )

    def root_fully_free(self) -> bool:
        return not self._allocations[self.root_allocation].children


def build_cluster(spec: ClusterSpec) -> ResourceGraph:
    """Materialize a cluster graph whose root allocation owns every core."""
    spec.validate()
    skip = set(spec.nodes_without_nic)
    nodes = [
        NodeRecord(
            node_id=i,
            hostname=f"node-{i:03d}",
            cores=spec.cores_per_node,
            devices=(BYPASS_NIC,) if spec.has_bypass_nic and i not in skip else (),
        )
        for i in range(spec.node_count)
    ]
    return ResourceGraph(nodes)
