import filecmp
import json
from pathlib import Path

import pytest

from convergesim import cli, mlcore, workloads
from convergesim.orchestrator import (
    HYBRID,
    SCALING_STUDY,
    TAXONOMY,
    ConfigError,
    ScenarioConfig,
    default_config,
    load_config,
    run_hybrid,
    run_scaling_study,
    run_scenario,
    run_taxonomy_suite,
)
from convergesim.reporting import ReportBundle, emit_report
from convergesim.resgraph import ClusterSpec


def small_scaling(seed=7):
    cfg = default_config(SCALING_STUDY, seed=seed)
    cfg.iterations = 3
    cfg.sizes = (4, 8)
    return cfg


def small_taxonomy(seed=7):
    cfg = default_config(TAXONOMY, seed=seed)
    cfg.jobs_per_scheduler = 40
    cfg.gang_max = 4
    return cfg


def small_hybrid(seed=7):
    cfg = default_config(HYBRID, seed=seed)
    cfg.train_count = 60
    cfg.test_count = 20
    return cfg


# --- config ---------------------------------------------------------------------


def test_config_file_roundtrip(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(
        "[cluster]\n"
        "nodes = 9\n"
        "cores_per_node = 8\n"
        "[experiment]\n"
        "kind = hybrid\n"
        "seed = 99\n"
        "[hybrid]\n"
        "train_count = 12\n"
        "test_count = 5\n"
        "dim_max = 4\n"
        "noise_sigma = 0.0\n"
        "[output]\n"
        "directory = results\n"
    )
    cfg = load_config(path)
    assert cfg.experiment == HYBRID
    assert cfg.seed == 99
    assert cfg.cluster == ClusterSpec(9, 8)
    assert (cfg.train_count, cfg.test_count) == (12, 5)
    assert cfg.dim_max == 4
    assert cfg.noise_sigma == 0.0
    assert cfg.out_dir == "results"


def test_config_requires_seed(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[experiment]\nkind = taxonomy\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_rejects_unknown_experiment():
    with pytest.raises(ConfigError):
        ScenarioConfig(experiment="benchmarking", seed=1).validate()


def test_config_rejects_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_scaling_needs_room_for_control_plane():
    cfg = default_config(SCALING_STUDY)
    cfg.cluster = ClusterSpec(32, 16)  # 32 workers + control plane will not fit
    with pytest.raises(ConfigError):
        cfg.validate()


def test_scaling_rejects_sizes_outside_reference_table():
    cfg = default_config(SCALING_STUDY)
    cfg.sizes = (4, 12)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_hybrid_needs_five_nodes():
    cfg = default_config(HYBRID)
    cfg.cluster = ClusterSpec(4, 16)
    with pytest.raises(ConfigError):
        cfg.validate()


# --- scaling study ---------------------------------------------------------------


def test_scaling_study_counts_and_aggregates():
    bundle = run_scaling_study(small_scaling())
    assert len(bundle.lammps_samples) == 5 * 2 * 3
    assert len(bundle.lammps_cells) == 10
    bundle.verify_aggregates()
    envs = {cell["environment"] for cell in bundle.lammps_cells}
    assert envs == set(workloads.ENVIRONMENTS)
    # ranks column mirrors cores-per-node times size
    for cell in bundle.lammps_cells:
        assert cell["ranks"] == cell["nodes"] * 16


def test_scaling_study_emits_benchmark_series():
    bundle = run_scaling_study(small_scaling())
    benchmarks = {row["benchmark"] for row in bundle.osu_series}
    assert benchmarks == {"bw", "latency", "barrier", "allreduce"}
    latency_rows = [
        r for r in bundle.osu_series
        if r["benchmark"] == "latency" and r["message_bytes"] == 1
    ]
    by_env = {r["environment"]: r["value"] for r in latency_rows if r["nodes"] == 4}
    assert by_env["usernetes"] > by_env["bare_metal"]


def test_scaling_in_cluster_environment_needs_one_extra_node():
    cfg = small_scaling()
    cfg.sizes = (4,)
    cfg.cluster = ClusterSpec(5, 16)  # 4 workers + 1 control plane: exactly enough
    bundle = run_scaling_study(cfg)
    assert len(bundle.lammps_samples) == 5 * 1 * 3


# --- taxonomy ----------------------------------------------------------------------


def test_taxonomy_suite_rows():
    cfg = small_taxonomy()
    bundle = run_taxonomy_suite(cfg)
    # 4 modes x 4 gang sizes, plus the oversized two-level scenario
    assert len(bundle.taxonomy_rows) == 4 * 4 + 1
    hier = [r for r in bundle.taxonomy_rows if r["mode"] == "hierarchical"]
    assert all(r["conflict_fraction"] == 0.0 for r in hier)
    oversized = bundle.taxonomy_rows[-1]
    assert oversized["mode"] == "two_level"
    assert oversized["gang_size"] == 9
    assert oversized["deadlocked"] is True
    shared = [r for r in bundle.taxonomy_rows if r["mode"] == "shared_state"]
    fractions = [r["conflict_fraction"] for r in shared]
    assert fractions == sorted(fractions)


# --- hybrid ------------------------------------------------------------------------


def test_hybrid_trains_and_scores_three_models():
    bundle = run_hybrid(small_hybrid())
    models = bundle.hybrid["models"]
    assert sorted(models) == ["bayesian", "linear_sgd", "passive_aggressive"]
    for info in models.values():
        assert len(info["pairs"]) == 20
        assert info["samples_seen"] == 60
        # the reported score matches a recomputation from the emitted pairs
        expected = mlcore.r_squared([tuple(p) for p in info["pairs"]])
        assert info["r_squared"] == pytest.approx(expected, rel=1e-12)


def test_hybrid_suballocations_never_share_nodes():
    bundle = run_hybrid(small_hybrid())
    service_nodes = set(bundle.hybrid["service_nodes"])
    sim_nodes = set(bundle.hybrid["sim_nodes"])
    assert service_nodes and sim_nodes
    assert not service_nodes & sim_nodes


def test_hybrid_with_pod_layer_service_host():
    cfg = small_hybrid()
    cfg.cluster = ClusterSpec(6, 16)
    cfg.service_nodes = 2
    bundle = run_hybrid(cfg)
    assert len(bundle.hybrid["service_nodes"]) == 2
    assert len(bundle.hybrid["models"]) == 3


def test_hybrid_train_width_widens_simulation_partition():
    cfg = small_hybrid()
    cfg.cluster = ClusterSpec(9, 16)
    cfg.train_width = 2
    bundle = run_hybrid(cfg)
    assert len(bundle.hybrid["sim_nodes"]) == 8
    for info in bundle.hybrid["models"].values():
        assert info["samples_seen"] == 60


def test_hybrid_model_hyperparameters_are_config_overridable(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(
        "[cluster]\nnodes = 5\n"
        "[experiment]\nkind = hybrid\nseed = 3\n"
        "[hybrid]\ntrain_count = 5\ntest_count = 2\n"
        "[models]\nlearning_rate = 0.5\nalpha = 2.5\nepsilon = 0.3\n"
    )
    cfg = load_config(path)
    assert cfg.model_params == {
        "linear_sgd": {"learning_rate": 0.5},
        "bayesian": {"alpha": 2.5},
        "passive_aggressive": {"epsilon": 0.3},
    }
    bundle = run_hybrid(cfg)
    assert bundle.config["model_params"]["bayesian"]["alpha"] == 2.5
    # a different learning rate must actually change the trained model
    base = run_hybrid(small_hybrid(seed=3))
    assert (
        bundle.hybrid["models"]["linear_sgd"]["pairs"]
        != base.hybrid["models"]["linear_sgd"]["pairs"]
    )


def test_config_rejects_unknown_model_variant():
    cfg = default_config(HYBRID)
    cfg.model_params = {"decision_tree": {"depth": 3}}
    with pytest.raises(ConfigError):
        cfg.validate()


def test_pod_sections_declare_extra_pod_sets(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(
        "[cluster]\nnodes = 7\n"
        "[experiment]\nkind = hybrid\nseed = 4\n"
        "[hybrid]\ntrain_count = 5\ntest_count = 2\nservice_nodes = 3\n"
        "[pod:task-queue]\nkind = deployment\nreplicas = 2\ncpu_request = 1\n"
        "[pod:db]\nkind = deployment\nreplicas = 1\ncpu_request = 2\ncpu_limit = 4\n"
    )
    cfg = load_config(path)
    assert [s.name for s in cfg.pod_specs] == ["task-queue", "db"]
    assert cfg.pod_specs[1].cpu_limit == 4.0
    bundle = run_hybrid(cfg)
    assert bundle.config["pod_specs"] == ["task-queue", "db"]
    assert len(bundle.hybrid["service_nodes"]) == 3


def test_bad_pod_section_is_config_error(tmp_path):
    path = tmp_path / "scenario.ini"
    path.write_text(
        "[cluster]\nnodes = 7\n"
        "[experiment]\nkind = hybrid\nseed = 4\n"
        "[pod:broken]\nreplicas = 0\n"
    )
    with pytest.raises(ConfigError):
        load_config(path)


def test_hybrid_noiseless_walltimes_follow_the_cost_surface():
    cfg = small_hybrid()
    cfg.noise_sigma = 0.0
    bundle = run_hybrid(cfg)
    t_s, k = workloads.volumetric_fit()
    actuals = {
        round(a, 9)
        for a, _ in bundle.hybrid["models"]["linear_sgd"]["pairs"]
    }
    allowed = {
        round(t_s + k * (x * y * z), 9)
        for x in range(1, 9) for y in range(1, 9) for z in range(1, 9)
    }
    assert actuals <= allowed


# --- emission ----------------------------------------------------------------------


def test_emit_report_files_and_table_columns(tmp_path):
    bundle = run_scaling_study(small_scaling())
    written = emit_report(bundle, tmp_path / "out")
    names = {p.name for p in written}
    assert {"bundle.json", "lammps_table.csv", "lammps_samples.csv",
            "osu_series.csv", "scaling_walltime.svg"} <= names
    header = (tmp_path / "out" / "lammps_table.csv").read_text().splitlines()[0]
    assert header == "environment,nodes,ranks,mean_s,stddev_s,cpu_pct"
    assert len((tmp_path / "out" / "lammps_table.csv").read_text().splitlines()) == 11


def test_csv_formats_numpy_scalars_as_plain_floats(tmp_path):
    import numpy as np

    from convergesim.reporting import _csv_text

    text = _csv_text(("v",), [{"v": np.float64(82.5)}])
    assert text == "v\n82.5\n"


def test_emit_rejects_unknown_format(tmp_path):
    from convergesim.reporting import ReportError

    bundle = run_taxonomy_suite(small_taxonomy())
    with pytest.raises(ReportError):
        emit_report(bundle, tmp_path, formats=("parquet",))


def test_emitted_bundle_roundtrips(tmp_path):
    bundle = run_taxonomy_suite(small_taxonomy())
    emit_report(bundle, tmp_path)
    text = (tmp_path / "bundle.json").read_text()
    clone = ReportBundle.from_json(text)
    assert clone.taxonomy_rows == bundle.taxonomy_rows
    assert clone.kind == bundle.kind


def test_hybrid_scatter_row_counts(tmp_path):
    bundle = run_hybrid(small_hybrid())
    emit_report(bundle, tmp_path)
    for name in ("linear_sgd", "bayesian", "passive_aggressive"):
        lines = (tmp_path / f"hybrid_{name}.csv").read_text().splitlines()
        assert len(lines) == 1 + 20  # header + one row per test job
        assert (tmp_path / f"hybrid_{name}.svg").exists()


def test_identical_runs_emit_identical_bytes(tmp_path):
    for maker in (small_scaling, small_taxonomy, small_hybrid):
        b1 = run_scenario(maker())
        b2 = run_scenario(maker())
        d1, d2 = tmp_path / f"{b1.kind}_1", tmp_path / f"{b1.kind}_2"
        f1 = emit_report(b1, d1)
        f2 = emit_report(b2, d2)
        assert [p.name for p in f1] == [p.name for p in f2]
        for a, b in zip(f1, f2):
            assert filecmp.cmp(a, b, shallow=False), a.name


# --- CLI ---------------------------------------------------------------------------


def write_config(tmp_path, seed=5):
    path = tmp_path / "scenario.ini"
    path.write_text(
        "[cluster]\nnodes = 5\ncores_per_node = 16\n"
        "[experiment]\nkind = hybrid\nseed = %d\n"
        "[hybrid]\ntrain_count = 30\ntest_count = 10\n"
        "[output]\ndirectory = %s\n" % (seed, tmp_path / "out")
    )
    return path


def test_cli_run_writes_reports(tmp_path, capsys):
    config = write_config(tmp_path)
    assert cli.main(["run", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    assert "wrote" in out
    assert (tmp_path / "out" / "bundle.json").exists()
    assert (tmp_path / "out" / "hybrid_summary.csv").exists()


def test_cli_run_seed_override(tmp_path):
    config = write_config(tmp_path)
    assert cli.main(["run", "--config", str(config), "--seed", "6",
                     "--out", str(tmp_path / "o2")]) == 0
    bundle = json.loads((tmp_path / "o2" / "bundle.json").read_text())
    assert bundle["seed"] == 6


def test_cli_run_bad_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nkind = nonsense\nseed = 1\n")
    assert cli.main(["run", "--config", str(bad)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_report_reemits_from_bundle(tmp_path, capsys):
    config = write_config(tmp_path)
    cli.main(["run", "--config", str(config)])
    bundle_path = tmp_path / "out" / "bundle.json"
    target = tmp_path / "again"
    assert cli.main(["report", "--bundle", str(bundle_path), "--format", "csv",
                     "--out", str(target)]) == 0
    assert (target / "hybrid_summary.csv").exists()
    assert not (target / "hybrid_linear_sgd.svg").exists()


def test_cli_report_missing_bundle_exits_one(tmp_path):
    assert cli.main(["report", "--bundle", str(tmp_path / "none.json"),
                     "--format", "csv"]) == 1


def test_cli_calibrate_prints_solution(tmp_path, capsys):
    anchors = Path("src/convergesim/data/network_anchors.json")
    assert cli.main(["calibrate", "--anchors", str(anchors)]) == 0
    out = capsys.readouterr().out
    assert "os_bypass" in out and "tap_relay" in out
    assert "7.46e-06" in out


def test_cli_calibrate_missing_file_exits_one(tmp_path):
    assert cli.main(["calibrate", "--anchors", str(tmp_path / "none.json")]) == 1
