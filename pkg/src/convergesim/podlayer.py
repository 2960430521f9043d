"""User-space Kubernetes modeled inside one allocation.

A cluster takes the allocation's first node as a control plane (labeled
to accept no workload pods) and the rest as workers. Pod sets place with
anti-affinity (one pod per node) by default; a daemonset places exactly
one pod on every worker and is the mechanism that exposes the host's
kernel-bypass NIC to pods. A pod's traffic uses the bypass path only if
it asked for the device, the node has one, and the exposing daemonset is
deployed; otherwise it falls back to the user-space TAP relay.

CPU limits are modeled as a hard ceiling on the share of cycles, not a
CPU-count bound and not burstable: demand above the ceiling inflates
runtime proportionally. The recommended configuration therefore requests
only the bypass-NIC device and relies on anti-affinity instead of CPU
limits.

Headless-service name resolution walks a local hostname table; the
per-lookup overhead is a sensitivity knob that defaults to zero because
it is a hypothesis, not a measurement.
"""

from dataclasses import dataclass, field

from .resgraph import ResourceGraph

JOB_SET = "job_set"
DEPLOYMENT = "deployment"
DAEMONSET = "daemonset"
POD_KINDS = (JOB_SET, DEPLOYMENT, DAEMONSET)

OS_BYPASS = "os_bypass"
TAP_RELAY = "tap_relay"


class PodLayerError(Exception):
    pass


class UnknownHostnameError(PodLayerError):
    pass


@dataclass(frozen=True)
class PodSpec:
    name: str
    kind: str = JOB_SET
    replicas: int = 1
    cpu_request: float = 0.0
    cpu_limit: float | None = None
    requires_bypass_nic: bool = False
    anti_affinity: bool = True

    def validate(self):
        if self.kind not in POD_KINDS:
            raise ValueError(f"unknown pod kind {self.kind!r}")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.cpu_limit is not None and self.cpu_request > self.cpu_limit:
            raise ValueError("cpu_request must not exceed cpu_limit")


@dataclass(frozen=True)
class PodPlacement:
    pod_id: int
    name: str            # pod hostname
    spec_name: str
    kind: str
    node_id: int
    node_cores: int
    cpu_request: float
    cpu_limit: float | None
    network_path: str
    effective_cpu_fraction: float


@dataclass
class KubeCluster:
    allocation: int
    control_plane_node: int
    worker_nodes: list[int]
    hostname_table: dict[str, int] = field(default_factory=dict)
    nic_exposed_nodes: set[int] = field(default_factory=set)
    placements: dict[int, PodPlacement] = field(default_factory=dict)
    lookup_overhead_s: float = 0.0
    _next_pod_id: int = 0
    _pods_by_spec: dict[str, list[int]] = field(default_factory=dict)


def start_usernetes(graph: ResourceGraph, alloc_id: int,
                    lookup_overhead_s: float = 0.0) -> KubeCluster:
    """Bring up the pod layer inside an allocation of at least 2 nodes."""
    alloc = graph.allocation(alloc_id)
    nodes = alloc.node_ids
    if len(nodes) < 2:
        raise PodLayerError(
            "a control plane plus at least one worker is required "
            f"(allocation has {len(nodes)} node(s))"
        )
    return KubeCluster(
        allocation=alloc_id,
        control_plane_node=nodes[0],
        worker_nodes=nodes[1:],
        lookup_overhead_s=lookup_overhead_s,
    )


def _resolve_path(graph: ResourceGraph, kube: KubeCluster, spec: PodSpec,
                  node_id: int) -> str:
    if not spec.requires_bypass_nic:
        return TAP_RELAY
    node = graph.nodes[node_id]
    if not node.has_bypass_nic:
        raise PodLayerError(f"node {node_id} has no bypass NIC device")
    if spec.kind == DAEMONSET or node_id in kube.nic_exposed_nodes:
        return OS_BYPASS
    return TAP_RELAY


def apply(graph: ResourceGraph, kube: KubeCluster, spec: PodSpec) -> list[PodPlacement]:
    """Place a pod set on the workers and register its hostnames.

    Daemonsets land one pod on every worker; job sets and deployments use
    anti-affinity placement (distinct nodes, error when replicas exceed
    the worker count). The control plane never receives workload pods.
    """
    spec.validate()
    if spec.kind == DAEMONSET:
        targets = list(kube.worker_nodes)
    elif spec.anti_affinity:
        if spec.replicas > len(kube.worker_nodes):
            raise PodLayerError(
                f"{spec.replicas} replicas do not fit {len(kube.worker_nodes)} "
                "workers with anti-affinity"
            )
        targets = kube.worker_nodes[: spec.replicas]
    else:
        targets = [kube.worker_nodes[i % len(kube.worker_nodes)]
                   for i in range(spec.replicas)]
    placements = []
    for i, node_id in enumerate(targets):
        hostname = f"{spec.name}-{i}"
        if hostname in kube.hostname_table:
            raise PodLayerError(f"hostname {hostname!r} already registered")
        path = _resolve_path(graph, kube, spec, node_id)
        node_cores = graph.nodes[node_id].cores
        fraction, _ = _throttle(node_cores, spec.cpu_limit,
                                max(spec.cpu_request, 1e-9))
        kube._next_pod_id += 1
        placement = PodPlacement(
            pod_id=kube._next_pod_id,
            name=hostname,
            spec_name=spec.name,
            kind=spec.kind,
            node_id=node_id,
            node_cores=node_cores,
            cpu_request=spec.cpu_request,
            cpu_limit=spec.cpu_limit,
            network_path=path,
            effective_cpu_fraction=fraction if spec.cpu_request > 0 else 1.0,
        )
        placements.append(placement)
        kube.hostname_table[hostname] = node_id
        kube.placements[placement.pod_id] = placement
    if spec.kind == DAEMONSET and spec.requires_bypass_nic:
        kube.nic_exposed_nodes.update(targets)
    kube._pods_by_spec.setdefault(spec.name, []).extend(p.pod_id for p in placements)
    return placements


def remove(kube: KubeCluster, spec_name: str) -> int:
    """Tear down a pod set; removing the exposing daemonset disables bypass."""
    pod_ids = kube._pods_by_spec.pop(spec_name, None)
    if pod_ids is None:
        raise PodLayerError(f"no pod set named {spec_name!r}")
    removed_exposing_daemonset = False
    for pod_id in pod_ids:
        placement = kube.placements.pop(pod_id)
        kube.hostname_table.pop(placement.name, None)
        if placement.kind == DAEMONSET and placement.network_path == OS_BYPASS:
            removed_exposing_daemonset = True
    if removed_exposing_daemonset:
        kube.nic_exposed_nodes.clear()
    return len(pod_ids)


def _throttle(node_cores: int, cpu_limit: float | None, demand: float):
    ceiling = float(node_cores) if cpu_limit is None else float(cpu_limit)
    fraction = min(1.0, ceiling / demand)
    inflation = max(1.0, demand / ceiling)
    return fraction, inflation


def effective_cpu(pod: PodPlacement, demand_cores: float) -> tuple[float, float]:
    """(usable fraction, runtime inflation) for a pod demanding `demand_cores`.

    Without a limit the node's core count is the ceiling; with a limit the
    limit is, and demand above it is throttled (cycles capped, runtime
    stretched), never burst over.
    """
    if demand_cores <= 0:
        raise ValueError("demand must be positive")
    return _throttle(pod.node_cores, pod.cpu_limit, float(demand_cores))


def resolve(kube: KubeCluster, hostname: str) -> tuple[int, float]:
    """Headless-service lookup: (node_id, per-lookup overhead seconds)."""
    node_id = kube.hostname_table.get(hostname)
    if node_id is None:
        raise UnknownHostnameError(f"hostname {hostname!r} is not registered")
    return node_id, kube.lookup_overhead_s
