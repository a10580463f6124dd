import math
from dataclasses import replace

import numpy as np
import pytest

from conftest import make_detectors
from radloc.detector import DetectorSpec, ForwardModel, LikelihoodMode
from radloc.errors import ConfigError, DataError, DegenerateInputError, DegenerateLikelihoodError
from radloc.geometry import Scene, optical_depths
from radloc.measurement import MeasurementFrame, simulate_frames
from radloc.particle_filter import (
    Ensemble,
    RunOptions,
    cluster_radius,
    compute_log_weights,
    effective_sample_size,
    normalize_weights,
    posterior_summary,
    resample_sort_replace,
    retained_indices,
    run_sir,
)
from radloc.presets import get_preset
from radloc.priors import PriorSpec
from radloc.rng import RandomStream, make_streams


def weighted(states, log_weights):
    states = np.asarray(states, dtype=float)
    return Ensemble(states, np.asarray(log_weights, dtype=float), np.full(len(states), 1.0 / len(states)))


def test_normalize_equal():
    ens = normalize_weights(weighted([[0, 0, 1], [1, 1, 1]], [0.0, 0.0]))
    assert ens.norm_weights == pytest.approx([0.5, 0.5])


def test_normalize_ratio():
    ens = normalize_weights(weighted([[0, 0, 1], [1, 1, 1]], [math.log(2.0), 0.0]))
    assert ens.norm_weights == pytest.approx([2 / 3, 1 / 3])


def test_normalize_large_log_weights():
    ens = normalize_weights(weighted([[0, 0, 1], [1, 1, 1]], [-1e6, -1e6 - math.log(3.0)]))
    assert ens.norm_weights == pytest.approx([0.75, 0.25])


def test_normalize_all_minus_infinity():
    with pytest.raises(DegenerateLikelihoodError) as info:
        normalize_weights(weighted([[0, 0, 1], [1, 1, 1]], [-np.inf, np.nan]), step=4)
    assert info.value.step == 4


def test_effective_sample_size():
    assert effective_sample_size(weighted(np.zeros((8, 3)), np.zeros(8))) == pytest.approx(8.0)
    one_hot = weighted(np.zeros((4, 3)), [0.0, -np.inf, -np.inf, -np.inf])
    assert effective_sample_size(one_hot) == pytest.approx(1.0)


def unit_gain_detector():
    return DetectorSpec(position=(0.0, 0.0), area=1.0, efficiency=1.0, dwell=1.0)


def test_identical_particles_identical_weights():
    scene = Scene((-5, -5, 5, 5), [], (1.0, 100.0))
    ens = Ensemble.uniform(np.tile([1.0, 0.0, 4 * math.pi], (3, 1)))
    ens = compute_log_weights(ens, MeasurementFrame(1, (0,)), [unit_gain_detector()], scene, ForwardModel.QA,
                              LikelihoodMode(), include_background=False)
    assert ens.log_weights == pytest.approx([-1.0, -1.0, -1.0])


def test_frame_length_mismatch():
    scene = Scene((-5, -5, 5, 5), [], (1.0, 100.0))
    ens = Ensemble.uniform(np.array([[1.0, 0.0, 1.0], [2.0, 0.0, 1.0]]))
    with pytest.raises(DataError):
        compute_log_weights(ens, MeasurementFrame(1, (0, 1)), [unit_gain_detector()], scene, "qa",
                            LikelihoodMode(), False)


def test_true_source_outweighs_distant_particle():
    scenario = get_preset("case1")
    truth = scenario.source_truth
    frames = simulate_frames(truth, scenario.detectors, scenario.scene, scenario.model, 100, RandomStream(0, 1))
    ens = Ensemble.uniform(np.array([[truth.x, truth.y, truth.intensity],
                                     [truth.x - 30.0, truth.y - 40.0, truth.intensity]]))
    total = np.zeros(2)
    for frame in frames:
        ens = compute_log_weights(ens, frame, scenario.detectors, scenario.scene, scenario.model,
                                  scenario.likelihood, include_background=True)
        total += ens.log_weights
    assert total[0] > total[1]


def test_retained_are_top_weights():
    rng = np.random.default_rng(3)
    log_weights = rng.normal(size=10)
    ens = weighted(rng.normal(size=(10, 3)), log_weights)
    kept = retained_indices(ens, 0.6)
    assert len(kept) == 4
    assert set(kept) == set(np.argsort(-log_weights)[:4])


def test_ranking_ties_prefer_lower_index():
    ens = weighted(np.zeros((4, 3)), [0.0, 1.0, 1.0, np.nan])
    assert ens.ranking().tolist() == [1, 2, 0, 3]


def test_resample_replaces_lowest():
    scene = Scene((-5, -5, 5, 5), [], (1.0, 10.0))
    states = np.array([[float(i), 0.0, 2.0] for i in range(5)])
    ens = weighted(states, [0.0, 5.0, 1.0, 4.0, 2.0])
    out = resample_sort_replace(ens, 0.6, PriorSpec.box(scene), RandomStream(0))
    assert np.array_equal(out.states[[1, 3]], states[[1, 3]])
    assert not np.any(np.all(out.states[[0, 2, 4]] == states[[0, 2, 4]], axis=1))
    assert out.norm_weights.tolist() == [0.2] * 5
    assert out.log_weights.tolist() == [0.0] * 5


@pytest.mark.parametrize("n", [5, 10, 1000])
def test_resample_replacement_count(n):
    scene = Scene((-5, -5, 5, 5), [], (1.0, 10.0))
    rng = np.random.default_rng(n)
    states = np.column_stack([rng.uniform(-5, 5, (n, 2)), rng.uniform(1, 10, n)])
    log_weights = rng.normal(size=n)
    out = resample_sort_replace(weighted(states, log_weights), 0.6, PriorSpec.box(scene), RandomStream(1))
    changed = ~np.all(out.states == states, axis=1)
    assert changed.sum() == math.floor(0.6 * n)
    assert set(np.flatnonzero(~changed)) == set(np.argsort(-log_weights)[:n - math.floor(0.6 * n)])
    assert len(out.states) == n


def test_normalize_shift_invariance():
    log_weights = np.array([-3.0, 0.5, -1.2, 2.0])
    a = normalize_weights(weighted(np.zeros((4, 3)) + 1, log_weights))
    b = normalize_weights(weighted(np.zeros((4, 3)) + 1, log_weights - 1234.5))
    assert a.norm_weights == pytest.approx(b.norm_weights, rel=1e-12)
    assert a.norm_weights.sum() == pytest.approx(1.0, abs=1e-9)


def test_resample_with_nothing_to_replace():
    scene = Scene((-5, -5, 5, 5), [], (1.0, 10.0))
    states = np.random.default_rng(0).uniform(size=(10, 3))
    out = resample_sort_replace(weighted(states, np.arange(10.0)), 0.05, PriorSpec.box(scene), RandomStream(0))
    assert np.array_equal(out.states, states)
    assert out.norm_weights == pytest.approx(np.full(10, 0.1))


@pytest.mark.parametrize("f", [0.0, 1.0, 1.5, -0.2])
def test_resample_fraction_range(f):
    scene = Scene((-5, -5, 5, 5), [], (1.0, 10.0))
    with pytest.raises(ConfigError):
        resample_sort_replace(weighted(np.zeros((4, 3)) + 1, np.zeros(4)), f, PriorSpec.box(scene), RandomStream(0))


def test_attenuation_cache_recomputes_replaced_rows(tiny_rt_scenario):
    scenario = tiny_rt_scenario
    streams = make_streams(1)
    prior = PriorSpec.from_hull(scenario.scene, scenario.detectors)
    ens = Ensemble.uniform(prior.sample(20, streams["init"]))
    frame = MeasurementFrame(1, (3, 0, 1, 2))
    ens = compute_log_weights(ens, frame, scenario.detectors, scenario.scene, "rt", LikelihoodMode(), True)
    assert ens.depths.shape == (20, 4)

    ens = resample_sort_replace(normalize_weights(ens), 0.6, prior, streams["resample"])
    assert np.isnan(ens.depths).any(axis=1).sum() == 12

    ens = compute_log_weights(ens, frame, scenario.detectors, scenario.scene, "rt", LikelihoodMode(), True)
    positions = np.array([det.position for det in scenario.detectors])
    assert ens.depths == pytest.approx(optical_depths(ens.states[:, :2], positions, scenario.scene))


def test_summary_identical_particles():
    ens = Ensemble.uniform(np.tile([1.0, 2.0, 3.0], (5, 1)))
    summary = posterior_summary(ens)
    assert (summary.mean.x, summary.mean.y, summary.mean.intensity) == pytest.approx((1.0, 2.0, 3.0))
    assert np.allclose(summary.covariance, 0.0)


def test_summary_two_particles():
    summary = posterior_summary(Ensemble.uniform(np.array([[0.0, 0.0, 5.0], [2.0, 0.0, 5.0]])))
    assert (summary.mean.x, summary.mean.y, summary.mean.intensity) == pytest.approx((1.0, 0.0, 5.0))
    assert summary.map_particle.x == 0.0


def test_summary_weighted_mean():
    ens = Ensemble.with_weights(np.array([[0.0, 0.0, 1.0], [10.0, 0.0, 1.0]]), [0.9, 0.1])
    summary = posterior_summary(ens)
    assert summary.mean.x == pytest.approx(1.0)
    assert summary.covariance[0, 0] == pytest.approx(0.9 * 1.0 + 0.1 * 81.0)
    assert summary.map_particle.x == 0.0
    assert summary.to_dict()["mean"] == pytest.approx([1.0, 0.0, 1.0])


def test_cluster_radius_hand_geometry():
    states = np.array([
        [0.0, 0.0, 1.0],
        [2.0, 0.0, 1.0],
        [1.0, 3.0, 1.0],
        [50.0, 50.0, 1.0],
        [-50.0, 20.0, 1.0],
    ])
    ens = Ensemble.with_weights(states, [0.4, 0.3, 0.2, 0.05, 0.05])
    assert cluster_radius(ens, 0.6) == pytest.approx(3.0)


def test_cluster_radius_single_point():
    assert cluster_radius(Ensemble.uniform(np.tile([4.0, 4.0, 1.0], (10, 1))), 0.6) == 0.0


def test_cluster_radius_errors():
    with pytest.raises(DegenerateInputError):
        cluster_radius(Ensemble.uniform(np.array([[0.0, 0.0, 1.0]])), 0.6)
    with pytest.raises(ConfigError):
        cluster_radius(Ensemble.uniform(np.zeros((2, 3)) + 1), 0.4)


def test_run_sir_records_every_step(tiny_scenario):
    frames = simulate_frames(tiny_scenario.source_truth, tiny_scenario.detectors, tiny_scenario.scene,
                             tiny_scenario.model, tiny_scenario.n_frames, RandomStream(7, 1))
    result = run_sir(tiny_scenario, frames)
    assert len(result.r_series) == len(frames)
    assert [s.step for s in result.summary_series] == list(range(1, len(frames) + 1))
    assert len(result.ensemble_history) == len(frames)
    assert result.ensemble_history[-1].depths is None
    assert result.final_ensemble.norm_weights == pytest.approx(np.full(200, 1 / 200))
    assert result.detector_history is None
    assert result.detector_ids == ["D01", "D02", "D03", "D04"]
    assert result.final_summary is result.summary_series[-1]


def test_run_sir_is_deterministic(tiny_rt_scenario):
    frames = simulate_frames(tiny_rt_scenario.source_truth, tiny_rt_scenario.detectors, tiny_rt_scenario.scene,
                             tiny_rt_scenario.model, tiny_rt_scenario.n_frames, RandomStream(3, 1))
    a = run_sir(tiny_rt_scenario, frames)
    b = run_sir(tiny_rt_scenario, frames)
    for ea, eb in zip(a.ensemble_history, b.ensemble_history):
        assert np.array_equal(ea.states, eb.states)
        assert np.array_equal(ea.norm_weights, eb.norm_weights)
    assert a.r_series == b.r_series


def test_run_sir_keep_history_off(tiny_scenario):
    frames = [MeasurementFrame(k, (1, 1, 1, 1)) for k in range(1, 4)]
    result = run_sir(tiny_scenario, frames, RunOptions(keep_history=False))
    assert len(result.ensemble_history) == 1
    assert len(result.summary_series) == 3


def test_run_sir_needs_frames(tiny_scenario):
    with pytest.raises(DataError):
        run_sir(tiny_scenario, [])


def test_scenario_without_boundary_particle_is_rejected(tiny_scenario):
    with pytest.raises(ConfigError) as info:
        replace(tiny_scenario, n_particles=10, resample_fraction=0.05)
    assert info.value.field == "resample_fraction"
    assert replace(tiny_scenario, n_particles=10, resample_fraction=0.1).n_particles == 10


def test_uninformative_data_keeps_prior_mean(tiny_scenario):
    scenario = replace(tiny_scenario, prior="box", n_particles=500,
                       detectors=make_detectors([(-4.0, -4.0), (4.0, 4.0)], area=1e-15))
    frames = [MeasurementFrame(k, (0, 0)) for k in range(1, 6)]
    result = run_sir(scenario, frames, RunOptions(include_background=False))
    mean = result.final_summary.mean
    assert abs(mean.x) < 1.0 and abs(mean.y) < 1.0


def test_kde_importance_refit(tiny_scenario):
    scenario = replace(tiny_scenario, prior="kde", kde_start=2, kde_cadence=1)
    frames = simulate_frames(scenario.source_truth, scenario.detectors, scenario.scene, scenario.model, 4,
                             RandomStream(1, 1))
    result = run_sir(scenario, frames, RunOptions(kde_start=2, kde_cadence=1))
    assert len(result.r_series) == 4
    xy = result.final_ensemble.states[:, :2]
    assert np.all(np.abs(xy) <= 5.0)


def test_run_options_validation():
    with pytest.raises(ConfigError):
        RunOptions(kde_start=0)
    with pytest.raises(ConfigError):
        RunOptions(kde_cadence=0)
