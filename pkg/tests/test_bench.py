import numpy as np
import pytest

from sparsecov.bench import (
    ConfigError,
    DegenerateNotFoundError,
    ExperimentConfig,
    RmseRow,
    RmseTable,
    config_from_dict,
    derive_seed,
    find_degenerate_dataset,
    load_config,
    normalized_histograms,
    run_eig_study,
    run_rmse_sweep,
)
from sparsecov.estimators import DegenerateCaseError, dam, pem
from sparsecov.simulate import generate_snapshots

# 4-sensor ULA, two close sources: only 2 noise eigenvalues, so all-negative is common
DEGENERATE_PRONE = dict(array="ula:4", sources=(0.0866, -0.0866), snr_db=(25.0,), snapshots=(25,))


def test_config_defaults_and_validation():
    cfg = ExperimentConfig()
    assert cfg.q == 2 and cfg.sensor_array.n_sensors == 7
    with pytest.raises(ConfigError, match="trials"):
        ExperimentConfig(trials=0)
    with pytest.raises(ConfigError, match="estimators"):
        ExperimentConfig(estimators=("mle",))
    with pytest.raises(ConfigError, match="snr_db"):
        ExperimentConfig(snr_db=())
    with pytest.raises(ConfigError, match="array"):
        ExperimentConfig(array="hex:3")
    with pytest.raises(ConfigError, match="sources"):
        ExperimentConfig(array="ula:2", sources=(0.1, 0.2))


def test_config_from_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "array: coprime:4,3,5,2\n"
        "sources: [{u: 0.0866}, -0.0866]\n"
        "snr_db: 10\n"
        "snapshots: [5, 10]\n"
        "trials: 3\n"
        "pem: {epsilon: 1e-7, max_iterations: 50}\n"
    )
    cfg = load_config(path)
    assert cfg.sources == (0.0866, -0.0866)
    assert cfg.snr_db == (10.0,)
    assert cfg.pem.epsilon == 1e-7 and cfg.pem.max_iterations == 50
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"trails": 3})
    with pytest.raises(ConfigError):
        config_from_dict({"snapshots": ["many"]})


def test_derive_seed():
    a = derive_seed(1, 0, 0, 0)
    assert a == derive_seed(1, 0, 0, 0)
    assert 0 <= a < 2**64
    seeds = {derive_seed(1, i, j, k) for i in range(3) for j in range(3) for k in range(20)}
    assert len(seeds) == 180
    assert derive_seed(2, 0, 0, 0) != a


def test_high_snr_single_source():
    cfg = ExperimentConfig(sources=(0.0,), snr_db=(30.0,), snapshots=(1000,), trials=1,
                           estimators=("aem",), algorithms=("music",))
    row = run_rmse_sweep(cfg, threads=1).rows[0]
    assert row.trials_used == 1
    assert row.rmse_u < 0.01


def test_sweep_determinism_across_workers():
    cfg = ExperimentConfig(snr_db=(0.0, 10.0), snapshots=(5,), trials=6, estimators=("dam", "pem", "aem"), seed=5)
    a = run_rmse_sweep(cfg, threads=1).to_csv()
    b = run_rmse_sweep(cfg, threads=2).to_csv()
    assert a == b


def test_discard_rule_shared_across_estimators():
    cfg = ExperimentConfig(trials=40, estimators=("dam", "pem", "aem"), algorithms=("music",), seed=3,
                           **DEGENERATE_PRONE)
    log = []
    table = run_rmse_sweep(cfg, threads=1, trial_log=log)
    discarded = {r.trials_discarded for r in table.rows}
    assert len(discarded) == 1 and discarded.pop() > 0
    for r in table.rows:
        assert r.trials_used + r.trials_discarded == cfg.trials
    # every discarded dataset really has an all-negative noise spectrum
    for snr, T, k, outcome in log:
        if outcome.discarded:
            X = generate_snapshots(cfg.scenario(snr, T, outcome.seed), cfg.sensor_array)
            w = np.linalg.eigvalsh(dam(X, cfg.sensor_array))[::-1]
            assert np.all(w[2:] < 0)


def test_dam_mvdr_failures_are_row_local():
    cfg = ExperimentConfig(trials=10, estimators=("dam", "aem"), algorithms=("mvdr",), snr_db=(0.0,),
                           snapshots=(5,), seed=1)
    table = run_rmse_sweep(cfg, threads=1)
    aem_row = table.get(0.0, 5, "aem", "mvdr")
    dam_row = table.get(0.0, 5, "dam", "mvdr")
    assert aem_row.trials_used == 10
    assert dam_row.trials_used + dam_row.trials_discarded == 10


def test_empty_cell_renders_blank():
    table = RmseTable([RmseRow(0.0, 5, "pem", "music", float("nan"), float("nan"), 0, 4)])
    assert table.to_csv().splitlines()[1] == "0,5,pem,music,,,0,4"


@pytest.mark.slow
def test_rmse_improves_with_snr():
    cfg = ExperimentConfig(snr_db=(0.0, 20.0), snapshots=(10,), trials=200, seed=17)
    table = run_rmse_sweep(cfg)
    for est in cfg.estimators:
        for alg in cfg.algorithms:
            assert table.get(20.0, 10, est, alg).rmse_u <= table.get(0.0, 10, est, alg).rmse_u


def test_normalized_histograms():
    rng = np.random.default_rng(0)
    a, b = rng.exponential(size=500), rng.exponential(size=300)
    edges, ha, hb = normalized_histograms(a, b, 30)
    w = np.diff(edges)
    assert np.sum(ha * w) == pytest.approx(1, abs=1e-9)
    assert np.sum(hb * w) == pytest.approx(1, abs=1e-9)
    assert edges[0] == min(a.min(), b.min()) and edges[-1] == max(a.max(), b.max())
    _, he, _ = normalized_histograms(np.array([]), b, 5)
    assert np.all(he == 0)


def test_eig_study_bookkeeping():
    cfg = ExperimentConfig(snr_db=(0.0,), snapshots=(10,), seed=2)
    cell = run_eig_study(cfg, realizations=300, bins=20, threads=1).cell(0.0, 10)
    w = np.diff(cell.bin_edges)
    assert np.sum(cell.pdf_min_pos * w) == pytest.approx(1, abs=1e-9)
    assert np.sum(cell.pdf_min_abs_neg * w) == pytest.approx(1, abs=1e-9)
    counts = np.histogram(cell.min_pos, bins=cell.bin_edges)[0]
    assert counts.sum() == len(cell.min_pos) == 300 - cell.all_negative
    assert np.all(cell.min_pos > 0) and np.all(cell.min_abs_neg > 0)
    assert cell.to_csv().splitlines()[0] == "bin_left,bin_right,pdf_min_pos,pdf_min_abs_neg"
    assert len(cell.to_csv().splitlines()) == 21


def test_eig_study_counts_all_negative():
    cfg = ExperimentConfig(seed=3, **DEGENERATE_PRONE)
    cell = run_eig_study(cfg, realizations=60, bins=10, threads=1).cells[0]
    assert cell.all_negative > 0
    assert len(cell.min_pos) == 60 - cell.all_negative


def test_find_degenerate_dataset():
    cfg = ExperimentConfig(seed=3, **DEGENERATE_PRONE)
    seed, w = find_degenerate_dataset(cfg, 200)
    assert np.all(w[2:] < 0)
    D = dam(generate_snapshots(cfg.scenario(25.0, 25, seed), cfg.sensor_array), cfg.sensor_array)
    with pytest.raises(DegenerateCaseError):
        pem(D, 2)


def test_find_degenerate_not_found():
    cfg = ExperimentConfig(snr_db=(-30.0,), snapshots=(100_000,))
    with pytest.raises(DegenerateNotFoundError) as info:
        find_degenerate_dataset(cfg, 10)
    assert info.value.scanned == 10
