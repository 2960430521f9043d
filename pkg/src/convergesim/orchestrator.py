"""Scenario driver: the five-environment scaling replay, the scheduler
taxonomy comparison, and the hybrid simulate-and-learn run.

Every scenario builds a private engine seeded from the config (seeding is
mandatory; nothing reads the wall clock), carves its allocations from a
fresh cluster graph, and returns a ReportBundle. After a run the root
allocation is fully free again; leaked carves are a bug.

The hybrid scenario mirrors a batch job that creates two sub-allocations:
a service host (one node by default, where the streaming-ML service is
mounted) and a simulation partition (four nodes) whose workload manager
runs the proxy-app jobs. Completions stream (features, walltime) samples
to the service; a second batch of jobs then asks for predictions and the
realized walltimes score each model with R-squared. The two
sub-allocations never share a node. With `service_nodes >= 2` the service
host also brings up the pod layer (control plane, NIC daemonset, and the
service as a single-replica deployment); the one-node default skips the
pod layer because a control plane would leave no worker.

Training jobs run back to back by default (each takes the whole
simulation partition). `train_width` widens the partition to
`width * sim_nodes` nodes so that many jobs run concurrently; training
order then follows virtual completion order, still deterministic for a
fixed seed.
"""

import configparser
from dataclasses import dataclass, field

import numpy as np

from . import hiersched, mlserve, netmodel, podlayer, workloads
from .hiersched import Instance, Job, run_taxonomy
from .reporting import ReportBundle
from .resgraph import ClusterSpec, ResourceRequest, build_cluster
from .simkernel import Engine

SCALING_STUDY = "scaling_study"
TAXONOMY = "taxonomy"
HYBRID = "hybrid"
EXPERIMENTS = (SCALING_STUDY, TAXONOMY, HYBRID)

HYBRID_MODELS = ("linear_sgd", "bayesian", "passive_aggressive")

OSU_P2P_SIZES = tuple(4**k for k in range(12))       # 1 B .. 4 MiB
OSU_ALLREDUCE_SIZES = tuple(4**k for k in range(1, 12))  # 4 B .. 4 MiB


class ConfigError(Exception):
    pass


class ScenarioError(Exception):
    pass


@dataclass
class ScenarioConfig:
    experiment: str
    seed: int
    cluster: ClusterSpec = field(default_factory=lambda: ClusterSpec(33, 16))
    out_dir: str = "out"
    anchors_path: str | None = None
    # scaling study
    sizes: tuple[int, ...] = (4, 8, 16, 32)
    iterations: int = 20
    # taxonomy
    taxonomy_nodes: int = 16
    gang_min: int = 1
    gang_max: int = 8
    jobs_per_scheduler: int = 200
    decision_cost_s: float = hiersched.DEFAULT_DECISION_COST_S
    deadlock_horizon_s: float = hiersched.DEFAULT_DEADLOCK_HORIZON_S
    # hybrid
    train_count: int = 1000
    test_count: int = 250
    dim_min: int = 1
    dim_max: int = 8
    train_width: int = 1
    noise_sigma: float = 0.05
    sim_nodes: int = 4
    service_nodes: int = 1
    # per-variant regressor hyperparameters, e.g. {"linear_sgd": {"learning_rate": 0.02}}
    model_params: dict = field(default_factory=dict)
    # extra pod sets ([pod:<name>] sections) applied to any pod layer a
    # scenario brings up
    pod_specs: list = field(default_factory=list)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.seed is None:
            raise ConfigError("a seed is mandatory (runs never self-seed)")
        self.cluster.validate()
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not self.sizes:
            raise ConfigError("sizes must be non-empty")
        if self.experiment == SCALING_STUDY:
            table_sizes = set(workloads.table_sizes())
            bad = [s for s in self.sizes if s not in table_sizes]
            if bad:
                raise ConfigError(f"sizes {bad} have no reference rows")
            need = max(self.sizes) + 1  # pod-layer control plane
            if need > self.cluster.node_count:
                raise ConfigError(
                    f"cluster of {self.cluster.node_count} nodes is too small for "
                    f"size {max(self.sizes)} plus a control plane"
                )
        if not (1 <= self.dim_min <= self.dim_max):
            raise ConfigError("dim range must satisfy 1 <= dim_min <= dim_max")
        if self.train_count < 1 or self.test_count < 1:
            raise ConfigError("train_count and test_count must be >= 1")
        if self.train_width < 1:
            raise ConfigError("train_width must be >= 1")
        if self.experiment == HYBRID:
            need = self.service_nodes + self.sim_nodes * self.train_width
            if need > self.cluster.node_count:
                raise ConfigError(
                    f"hybrid needs {need} nodes, cluster has {self.cluster.node_count}"
                )
        if self.gang_min < 1 or self.gang_max < self.gang_min:
            raise ConfigError("gang range must satisfy 1 <= gang_min <= gang_max")
        if self.decision_cost_s <= 0:
            raise ConfigError("decision_cost must be positive")
        unknown_models = set(self.model_params) - set(HYBRID_MODELS)
        if unknown_models:
            raise ConfigError(f"unknown model variants {sorted(unknown_models)}")
        for spec in self.pod_specs:
            try:
                spec.validate()
            except ValueError as err:
                raise ConfigError(f"bad pod spec {spec.name!r}: {err}") from err

    def summary(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "cluster_nodes": self.cluster.node_count,
            "cores_per_node": self.cluster.cores_per_node,
            "sizes": list(self.sizes),
            "iterations": self.iterations,
            "taxonomy_nodes": self.taxonomy_nodes,
            "gang_min": self.gang_min,
            "gang_max": self.gang_max,
            "jobs_per_scheduler": self.jobs_per_scheduler,
            "decision_cost_s": self.decision_cost_s,
            "train_count": self.train_count,
            "test_count": self.test_count,
            "dim_min": self.dim_min,
            "dim_max": self.dim_max,
            "train_width": self.train_width,
            "noise_sigma": self.noise_sigma,
            "sim_nodes": self.sim_nodes,
            "service_nodes": self.service_nodes,
            "model_params": self.model_params,
            "pod_specs": [spec.name for spec in self.pod_specs],
        }


def load_config(path) -> ScenarioConfig:
    """Parse the INI-style scenario file (see README for the full grammar)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    try:
        experiment = parser.get("experiment", "kind")
        seed = parser.getint("experiment", "seed")
    except (configparser.Error, ValueError) as err:
        raise ConfigError(f"bad [experiment] section: {err}") from err
    cfg = ScenarioConfig(experiment=experiment, seed=seed)
    try:
        if parser.has_section("cluster"):
            cfg.cluster = ClusterSpec(
                node_count=parser.getint("cluster", "nodes", fallback=33),
                cores_per_node=parser.getint("cluster", "cores_per_node", fallback=16),
                has_bypass_nic=parser.getboolean("cluster", "bypass_nic", fallback=True),
            )
        if parser.has_option("experiment", "iterations"):
            cfg.iterations = parser.getint("experiment", "iterations")
        if parser.has_option("experiment", "sizes"):
            cfg.sizes = tuple(
                int(tok) for tok in parser.get("experiment", "sizes").split()
            )
        if parser.has_option("experiment", "anchors"):
            cfg.anchors_path = parser.get("experiment", "anchors")
        if parser.has_section("taxonomy"):
            sec = parser["taxonomy"]
            cfg.taxonomy_nodes = sec.getint("nodes", cfg.taxonomy_nodes)
            cfg.gang_min = sec.getint("gang_min", cfg.gang_min)
            cfg.gang_max = sec.getint("gang_max", cfg.gang_max)
            cfg.jobs_per_scheduler = sec.getint(
                "jobs_per_scheduler", cfg.jobs_per_scheduler
            )
            cfg.decision_cost_s = sec.getfloat("decision_cost", cfg.decision_cost_s)
            cfg.deadlock_horizon_s = sec.getfloat(
                "deadlock_horizon", cfg.deadlock_horizon_s
            )
        if parser.has_section("hybrid"):
            sec = parser["hybrid"]
            cfg.train_count = sec.getint("train_count", cfg.train_count)
            cfg.test_count = sec.getint("test_count", cfg.test_count)
            cfg.dim_min = sec.getint("dim_min", cfg.dim_min)
            cfg.dim_max = sec.getint("dim_max", cfg.dim_max)
            cfg.train_width = sec.getint("train_width", cfg.train_width)
            cfg.noise_sigma = sec.getfloat("noise_sigma", cfg.noise_sigma)
            cfg.sim_nodes = sec.getint("sim_nodes", cfg.sim_nodes)
            cfg.service_nodes = sec.getint("service_nodes", cfg.service_nodes)
        for section in parser.sections():
            if not section.startswith("pod:"):
                continue
            sec = parser[section]
            cfg.pod_specs.append(
                podlayer.PodSpec(
                    name=section[len("pod:"):],
                    kind=sec.get("kind", podlayer.DEPLOYMENT),
                    replicas=sec.getint("replicas", 1),
                    cpu_request=sec.getfloat("cpu_request", 0.0),
                    cpu_limit=sec.getfloat("cpu_limit", fallback=None),
                    requires_bypass_nic=sec.getboolean("requires_bypass_nic", False),
                    anti_affinity=sec.getboolean("anti_affinity", True),
                )
            )
        if parser.has_section("models"):
            sec = parser["models"]
            params: dict = {}
            if "learning_rate" in sec:
                params.setdefault("linear_sgd", {})["learning_rate"] = sec.getfloat(
                    "learning_rate"
                )
            if "alpha" in sec:
                params.setdefault("bayesian", {})["alpha"] = sec.getfloat("alpha")
            if "beta" in sec:
                params.setdefault("bayesian", {})["beta"] = sec.getfloat("beta")
            if "aggressiveness" in sec:
                params.setdefault("passive_aggressive", {})["C"] = sec.getfloat(
                    "aggressiveness"
                )
            if "epsilon" in sec:
                params.setdefault("passive_aggressive", {})["epsilon"] = sec.getfloat(
                    "epsilon"
                )
            cfg.model_params = params
        if parser.has_section("output"):
            cfg.out_dir = parser.get("output", "directory", fallback=cfg.out_dir)
    except ValueError as err:
        raise ConfigError(f"bad config value: {err}") from err
    cfg.validate()
    return cfg


def default_config(experiment: str, seed: int = 42) -> ScenarioConfig:
    cfg = ScenarioConfig(experiment=experiment, seed=seed)
    if experiment == HYBRID:
        cfg.cluster = ClusterSpec(5, 16)
    cfg.validate()
    return cfg


def run_scenario(cfg: ScenarioConfig) -> ReportBundle:
    cfg.validate()
    if cfg.experiment == SCALING_STUDY:
        return run_scaling_study(cfg)
    if cfg.experiment == TAXONOMY:
        return run_taxonomy_suite(cfg)
    return run_hybrid(cfg)


# --- scaling study ------------------------------------------------------------


def run_scaling_study(cfg: ScenarioConfig) -> ReportBundle:
    """Replay the five environments across the configured sizes.

    Per environment and size the driver carves an allocation (plus a
    control-plane node and the NIC daemonset for the in-cluster
    environment), samples one walltime per iteration while the virtual
    clock advances, records the benchmark curves, and releases the carve.
    Background-cluster environments toggle the overhead state instead of
    carving a second allocation; the background pods contend for the
    network, not for exclusive cores.
    """
    cfg.validate()
    engine = Engine(cfg.seed)
    graph = build_cluster(cfg.cluster)
    rng = engine.rng.stream("workloads.lammps")
    network = netmodel.calibrate(netmodel.load_anchors(cfg.anchors_path))
    bundle = ReportBundle(kind=SCALING_STUDY, seed=cfg.seed, config=cfg.summary())
    problem = workloads.LammpsProblem(*workloads.REFERENCE_PROBLEM)
    for env in workloads.ENVIRONMENTS:
        for size in cfg.sizes:
            need = size + 1 if env == workloads.USERNETES else size
            alloc = graph.carve(graph.root_allocation, ResourceRequest(nodes=need))
            kube = None
            if env == workloads.USERNETES:
                kube = podlayer.start_usernetes(graph, alloc.alloc_id)
                podlayer.apply(
                    graph, kube,
                    podlayer.PodSpec(
                        name=f"nic-exposer-{size}",
                        kind=podlayer.DAEMONSET,
                        requires_bypass_nic=True,
                    ),
                )
                for spec in cfg.pod_specs:
                    podlayer.apply(graph, kube, spec)
            ranks = size * cfg.cluster.cores_per_node
            values = []
            for it in range(cfg.iterations):
                if kube is not None:
                    podlayer.apply(
                        graph, kube,
                        podlayer.PodSpec(
                            name=f"lammps-{size}-{it}",
                            kind=podlayer.JOB_SET,
                            replicas=size,
                            requires_bypass_nic=True,
                        ),
                    )
                walltime = workloads.lammps_walltime(
                    env, size, ranks, problem, rng, mode="table"
                )
                finish = engine.now + walltime
                engine.schedule(finish, lambda: None, label=f"scaling:{env}:{size}:{it}")
                engine.run_until(finish)
                bundle.lammps_samples.append([env, size, ranks, it, walltime])
                values.append(walltime)
            graph.release(alloc.alloc_id)
            bundle.lammps_cells.append(
                {
                    "environment": env,
                    "nodes": size,
                    "ranks": ranks,
                    "mean_s": float(np.mean(values)),
                    "stddev_s": float(np.std(values, ddof=1)) if len(values) > 1 else 0.0,
                    "cpu_pct": workloads.cpu_utilization(env, size),
                }
            )
            bundle.osu_series.extend(_osu_rows(env, size, network))
    if not graph.root_fully_free():
        raise ScenarioError("scaling study leaked allocations")
    return bundle


def _osu_rows(env, size, network):
    rows = []
    for m in OSU_P2P_SIZES:
        rows.append(
            {
                "environment": env,
                "nodes": size,
                "benchmark": "latency",
                "message_bytes": m,
                "value": workloads.osu_replay(env, "latency", size, m, network),
            }
        )
        rows.append(
            {
                "environment": env,
                "nodes": size,
                "benchmark": "bw",
                "message_bytes": m,
                "value": workloads.osu_replay(env, "bw", size, m, network),
            }
        )
    rows.append(
        {
            "environment": env,
            "nodes": size,
            "benchmark": "barrier",
            "message_bytes": 0,
            "value": workloads.osu_replay(env, "barrier", size, 0, network),
        }
    )
    for m in OSU_ALLREDUCE_SIZES:
        rows.append(
            {
                "environment": env,
                "nodes": size,
                "benchmark": "allreduce",
                "message_bytes": m,
                "value": workloads.osu_replay(env, "allreduce", size, m, network),
            }
        )
    return rows


# --- taxonomy -----------------------------------------------------------------


def run_taxonomy_suite(cfg: ScenarioConfig) -> ReportBundle:
    """Sweep gang size across the four comparator architectures, plus the
    oversized-gang hoarding scenario that drives the two-level broker into
    deadlock."""
    cfg.validate()
    bundle = ReportBundle(kind=TAXONOMY, seed=cfg.seed, config=cfg.summary())
    cluster = ClusterSpec(cfg.taxonomy_nodes, cfg.cluster.cores_per_node)
    for mode in hiersched.TAXONOMY_MODES:
        for gang in range(cfg.gang_min, cfg.gang_max + 1):
            workload = hiersched.make_jobs([gang] * (2 * cfg.jobs_per_scheduler))
            metrics = run_taxonomy(
                mode, workload, cluster,
                decision_cost_s=cfg.decision_cost_s,
                seed=cfg.seed,
                deadlock_horizon_s=cfg.deadlock_horizon_s,
            )
            bundle.taxonomy_rows.append(_taxonomy_row(metrics, gang))
    oversized = cfg.taxonomy_nodes // 2 + 1
    workload = hiersched.make_jobs([oversized, oversized], duration_s=300.0)
    metrics = run_taxonomy(
        hiersched.TWO_LEVEL, workload, cluster,
        decision_cost_s=cfg.decision_cost_s,
        seed=cfg.seed,
        deadlock_horizon_s=cfg.deadlock_horizon_s,
    )
    bundle.taxonomy_rows.append(_taxonomy_row(metrics, oversized))
    return bundle


def _taxonomy_row(metrics: hiersched.SchedMetrics, gang: int) -> dict:
    return {
        "mode": metrics.mode,
        "gang_size": gang,
        "conflict_fraction": metrics.conflict_fraction,
        "busyness": metrics.busyness,
        "deadlocked": metrics.deadlocked,
        "throughput": metrics.throughput,
        "completed": metrics.completed,
        "attempts": metrics.attempts,
        "conflicts": metrics.conflicts,
        "rejected": metrics.rejected,
        "makespan_s": metrics.makespan_s,
    }


# --- hybrid -------------------------------------------------------------------


def run_hybrid(cfg: ScenarioConfig) -> ReportBundle:
    cfg.validate()
    if cfg.cluster.node_count < 5:
        raise ConfigError("the hybrid scenario needs a cluster of at least 5 nodes")
    engine = Engine(cfg.seed)
    graph = build_cluster(cfg.cluster)

    service_alloc = graph.carve(
        graph.root_allocation, ResourceRequest(nodes=cfg.service_nodes)
    )
    sim_alloc = graph.carve(
        graph.root_allocation,
        ResourceRequest(nodes=cfg.sim_nodes * cfg.train_width),
    )
    kube = None
    if cfg.service_nodes >= 2:
        kube = podlayer.start_usernetes(graph, service_alloc.alloc_id)
        podlayer.apply(
            graph, kube,
            podlayer.PodSpec(name="nic-exposer", kind=podlayer.DAEMONSET,
                             requires_bypass_nic=True),
        )
        podlayer.apply(
            graph, kube,
            podlayer.PodSpec(name="ml-server", kind=podlayer.DEPLOYMENT, replicas=1),
        )
        for spec in cfg.pod_specs:
            podlayer.apply(graph, kube, spec)

    service = mlserve.MLService(model_defaults=cfg.model_params)
    for variant in HYBRID_MODELS:
        resp = service.handle(
            mlserve.ServiceRequest(verb="create", name=variant, model_type=variant)
        )
        if resp.status != "ok":
            raise ScenarioError(f"could not create model {variant}: {resp}")

    instance = Instance(engine, graph, sim_alloc.alloc_id, cfg.decision_cost_s)
    dims_rng = engine.rng.stream("hybrid.dims")
    noise_rng = engine.rng.stream("hybrid.noise")
    ranks = cfg.sim_nodes * cfg.cluster.cores_per_node

    def make_job(job_id: int) -> tuple[Job, dict]:
        x, y, z = (
            int(v)
            for v in dims_rng.integers(cfg.dim_min, cfg.dim_max + 1, size=3)
        )
        problem = workloads.LammpsProblem(x, y, z)
        features = {"x": float(x), "y": float(y), "z": float(z)}

        def sampler():
            return workloads.lammps_walltime(
                workloads.BARE_METAL, cfg.sim_nodes, ranks, problem, noise_rng,
                mode="model", noise_sigma=cfg.noise_sigma,
            )

        job = Job(
            job_id=job_id,
            request=ResourceRequest(nodes=cfg.sim_nodes),
            duration=sampler,
        )
        return job, features

    def train_callback(features):
        def callback(job: Job):
            for variant in HYBRID_MODELS:
                resp = service.handle(
                    mlserve.ServiceRequest(
                        verb="train", name=variant, features=features,
                        y=job.realized_duration,
                    )
                )
                if resp.status != "ok":
                    raise ScenarioError(f"train failed: {resp}")
        return callback

    def test_callback(features):
        def callback(job: Job):
            for variant in HYBRID_MODELS:
                pred = service.handle(
                    mlserve.ServiceRequest(verb="predict", name=variant,
                                           features=features)
                )
                if pred.status != "ok":
                    raise ScenarioError(f"predict failed: {pred}")
                service.handle(
                    mlserve.ServiceRequest(
                        verb="record_truth", name=variant,
                        y_true=job.realized_duration,
                        y_pred=pred.get("prediction"),
                    )
                )
        return callback

    job_id = 0
    for _ in range(cfg.train_count):
        job_id += 1
        job, features = make_job(job_id)
        job.on_complete = train_callback(features)
        instance.submit(job)
    engine.drain()

    for _ in range(cfg.test_count):
        job_id += 1
        job, features = make_job(job_id)
        job.on_complete = test_callback(features)
        instance.submit(job)
    engine.drain()

    bundle = ReportBundle(kind=HYBRID, seed=cfg.seed, config=cfg.summary())
    models = {}
    for variant in HYBRID_MODELS:
        entry = service.entry(variant)
        metrics = service.handle(
            mlserve.ServiceRequest(verb="metrics", name=variant)
        )
        models[variant] = {
            "pairs": [[float(a), float(p)] for a, p in entry.truths],
            "r_squared": metrics.get("r_squared"),
            "samples_seen": entry.model.samples_seen,
        }
    bundle.hybrid = {
        "models": models,
        "train_count": cfg.train_count,
        "test_count": cfg.test_count,
        "service_nodes": sorted(service_alloc.node_ids),
        "sim_nodes": sorted(sim_alloc.node_ids),
        "makespan_s": engine.now,
    }

    graph.release(sim_alloc.alloc_id)
    graph.release(service_alloc.alloc_id)
    if not graph.root_fully_free():
        raise ScenarioError("hybrid scenario leaked allocations")
    return bundle
