"""Four ways to run two schedulers over one cluster.

Sweeps gang size on a 16-node cluster for each comparator architecture
and prints the conflict, throughput, and deadlock picture: hierarchical
bounding is structurally conflict-free, optimistic shared state pays a
growing conflict tax as gangs widen, and the pessimistic two-level
broker deadlocks outright when two hoarding gangs each need more than
half the cluster.
"""

from convergesim.hiersched import TAXONOMY_MODES, TWO_LEVEL, make_jobs, run_taxonomy
from convergesim.resgraph import ClusterSpec

CLUSTER = ClusterSpec(node_count=16, cores_per_node=16)
JOBS_PER_SCHEDULER = 100
SEED = 123

print(f"{'mode':22s} {'gang':>4s} {'conflict':>9s} {'busyness':>9s} "
      f"{'jobs/s':>10s} {'deadlock':>9s}")
for mode in TAXONOMY_MODES:
    for gang in (1, 2, 4, 8):
        workload = make_jobs([gang] * (2 * JOBS_PER_SCHEDULER))
        m = run_taxonomy(mode, workload, CLUSTER, seed=SEED)
        print(f"{mode:22s} {gang:4d} {m.conflict_fraction:9.4f} "
              f"{m.busyness:9.3f} {m.throughput:10.1f} {str(m.deadlocked):>9s}")
    print()

print("two gang jobs, each wanting 9 of 16 nodes, offers split pessimistically:")
m = run_taxonomy(TWO_LEVEL, make_jobs([9, 9], duration_s=300.0), CLUSTER, seed=SEED)
print(f"  placements: {m.completed}, hoarding deadlock: {m.deadlocked} "
      f"(flagged after {m.makespan_s:.0f} virtual seconds without progress)")
