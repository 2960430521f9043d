"""Independent oracles shared by the test modules.

These deliberately avoid the library's own code paths: combinatorial
enumeration for conflict probabilities, a replayed per-node accounting
mirror for allocation conservation, closed-form batch solutions for the
incremental learners, and a pairwise interval scan for placement overlap.
"""

import itertools

import numpy as np


def exhaustive_conflict_probability(node_count: int, gang: int) -> float:
    """Exact probability that two independent uniform gang-sized node picks
    from the same free set intersect, by enumerating every ordered pair."""
    subsets = [set(c) for c in itertools.combinations(range(node_count), gang)]
    total = conflicts = 0
    for a in subsets:
        for b in subsets:
            total += 1
            if a & b:
                conflicts += 1
    return conflicts / total


def batch_ridge(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Closed-form ridge weights (no intercept): (X'X + lam I)^-1 X'y."""
    d = X.shape[1]
    return np.linalg.solve(X.T @ X + lam * np.eye(d), X.T @ y)


class AccountingMirror:
    """Brute-force per-node interval accounting driven purely by the resource
    graph's op log; audits sibling bounding and exact conservation after
    every event."""

    def __init__(self, node_cores: dict[int, int], root_id: int,
                 root_slices: dict[int, int]):
        self.node_cores = dict(node_cores)
        self.parents = {root_id: None}
        self.slices = {root_id: dict(root_slices)}
        self.children: dict[int, set[int]] = {root_id: set()}
        self.events = 0

    def apply(self, op: tuple) -> None:
        kind, alloc_id, other_id, slices = op
        if kind == "carve":
            assert other_id in self.slices, "carve from unknown parent"
            assert alloc_id not in self.slices, "allocation id reused"
            self.parents[alloc_id] = other_id
            self.slices[alloc_id] = dict(slices)
            self.children[alloc_id] = set()
            self.children[other_id].add(alloc_id)
        elif kind == "release":
            assert alloc_id in self.slices, "release of unknown allocation"
            assert not self.children[alloc_id], "release with live children"
            del self.slices[alloc_id]
            del self.parents[alloc_id]
            self.children[other_id].discard(alloc_id)
            del self.children[alloc_id]
        else:
            raise AssertionError(f"unknown op {kind!r}")
        self.events += 1
        self.audit()

    def _free(self, alloc_id: int, node: int) -> int:
        held = self.slices[alloc_id].get(node, 0)
        for child in self.children[alloc_id]:
            held -= self.slices[child].get(node, 0)
        return held

    def audit(self) -> None:
        for node, cores in self.node_cores.items():
            total_free = 0
            for alloc_id in self.slices:
                free = self._free(alloc_id, node)
                assert free >= 0, (
                    f"sibling allocations overlap on node {node} "
                    f"under allocation {alloc_id}"
                )
                total_free += free
            assert total_free == cores, (
                f"conservation broken on node {node}: {total_free} != {cores}"
            )


def assert_no_cross_instance_overlap(records) -> None:
    """No two placements from different instances may share a node while
    overlapping in time."""
    for r1, r2 in itertools.combinations(records, 2):
        if r1.instance_id == r2.instance_id:
            continue
        end1 = r1.end_t if r1.end_t is not None else float("inf")
        end2 = r2.end_t if r2.end_t is not None else float("inf")
        if r1.start_t < end2 and r2.start_t < end1:
            shared = set(r1.node_ids) & set(r2.node_ids)
            assert not shared, (
                f"jobs {r1.job_id} and {r2.job_id} from different instances "
                f"share nodes {sorted(shared)}"
            )
