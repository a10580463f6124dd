import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import UNIT_SQUARE
from radloc.detector import (
    D_FLOOR,
    DetectorSpec,
    ForwardModel,
    LikelihoodMode,
    Particle,
    expected_counts,
    log_likelihood,
    mci_to_bq,
    qa_response,
    rt_response,
    uci_to_bq,
)
from radloc.errors import ConfigError, DataError, DegenerateInputError
from radloc.geometry import BuildingPolygon, Scene
from radloc.measurement import MeasurementFrame
from radloc.presets import get_preset


def unit_detector(position=(0.0, 0.0)):
    return DetectorSpec(position=position, area=1.0, efficiency=1.0, dwell=1.0)


def test_qa_inverse_square():
    assert qa_response(Particle(1.0, 0.0, 1.0), unit_detector()) == pytest.approx(1 / (4 * math.pi))


def test_qa_urban_detector_four():
    source = Particle(158.0, 98.0, mci_to_bq(8.7))
    det = DetectorSpec(position=(190.2, 50.1), area=0.0058, efficiency=0.62, dwell=5.0, background_rate=300.0)
    assert qa_response(source, det) == pytest.approx(138.26, rel=1e-3)


def test_qa_distance_floor():
    on_top = qa_response(Particle(0.0, 0.0, 1.0), unit_detector())
    assert on_top == pytest.approx(1 / (4 * math.pi * D_FLOOR ** 2))
    assert np.isfinite(on_top)


def test_rt_equals_qa_without_buildings():
    scene = Scene((-10, -10, 10, 10), [], (1.0, 1e9))
    p = Particle(3.0, -2.0, 5e6)
    det = unit_detector((-4.0, 1.0))
    assert rt_response(p, det, scene) == qa_response(p, det)


def test_rt_equals_qa_on_random_pairs():
    rng = np.random.default_rng(21)
    scene = Scene((-50, -50, 50, 50), [], (1.0, 1e9))
    states = np.column_stack([rng.uniform(-50, 50, (10_000, 2)), rng.uniform(1e5, 1e9, 10_000)])
    dets = [unit_detector(tuple(p)) for p in rng.uniform(-50, 50, (3, 2))]
    qa = expected_counts(states, dets, scene, ForwardModel.QA)
    rt = expected_counts(states, dets, scene, ForwardModel.RT)
    assert np.allclose(rt, qa, rtol=1e-12, atol=0.0)


def test_rt_one_mean_free_path():
    scene = Scene((-2, -2, 3, 3), [BuildingPolygon(UNIT_SQUARE, 1.0)], (1.0, 1e9))
    p = Particle(-1.0, 0.5, 1e6)
    det = unit_detector((2.0, 0.5))
    assert rt_response(p, det, scene) == pytest.approx(math.exp(-1.0) * qa_response(p, det), rel=1e-12)


def test_rt_attenuation_is_additive():
    scene = Scene((-2, -2, 6, 3), [
        BuildingPolygon(UNIT_SQUARE, 1.0),
        BuildingPolygon([(2, 0), (3, 0), (3, 1), (2, 1)], 0.5),
    ], (1.0, 1e9))
    p = Particle(-1.0, 0.5, 1e6)
    det = unit_detector((5.0, 0.5))
    assert rt_response(p, det, scene) == pytest.approx(math.exp(-3.0) * qa_response(p, det), rel=1e-12)


def test_rt_never_exceeds_qa_in_urban_scene():
    scenario = get_preset("case1")
    xmin, ymin, xmax, ymax = scenario.scene.bounds
    rng = np.random.default_rng(4)
    states = np.column_stack([rng.uniform(xmin, xmax, 2000), rng.uniform(ymin, ymax, 2000),
                              rng.uniform(*scenario.scene.intensity_range, 2000)])
    qa = expected_counts(states, scenario.detectors, scenario.scene, ForwardModel.QA)
    rt = expected_counts(states, scenario.detectors, scenario.scene, ForwardModel.RT)
    assert np.all(rt <= qa)
    assert np.any(rt < qa)


def test_rt_requires_scene():
    with pytest.raises(ConfigError):
        expected_counts(np.array([[0.0, 0.0, 1.0]]), [unit_detector((1.0, 0.0))], model=ForwardModel.RT)


def test_expected_counts_background_is_optional():
    det = DetectorSpec(position=(0.0, 0.0), area=1.0, efficiency=1.0, dwell=5.0, background_rate=300.0)
    states = np.array([[1.0, 0.0, 4 * math.pi]])
    assert expected_counts(states, [det])[0, 0] == pytest.approx(5.0)
    assert expected_counts(states, [det], include_background=True)[0, 0] == pytest.approx(1505.0)


def test_expected_counts_rejects_non_finite():
    with pytest.raises(DegenerateInputError):
        expected_counts(np.array([[np.nan, 0.0, 1.0]]), [unit_detector()])


def test_poisson_zero_count():
    assert log_likelihood([0], [1.0]) == pytest.approx(-1.0)


def test_poisson_three_counts():
    assert log_likelihood(MeasurementFrame(1, (3,)), [2.0]) == pytest.approx(-1.712318, abs=1e-6)


def test_gaussian_exact_match():
    mode = LikelihoodMode.gaussian(1.0)
    assert log_likelihood([4, 7], [4.0, 7.0], mode) == pytest.approx(-1.837877, abs=1e-6)


def test_poisson_zero_expected_is_finite():
    value = log_likelihood([5], [0.0])
    assert np.isfinite(value)
    assert value < -100


def test_log_likelihood_vectorized():
    expected = np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 0.5]])
    values = log_likelihood([0, 3], expected)
    assert values.shape == (3,)
    assert values[0] == values[1]
    assert values[0] == pytest.approx(-1.0 + math.log(8 / 6) - 2.0)


@pytest.mark.parametrize("u", [0.4, 3.7, 12.2, 45.5])
def test_poisson_peaks_at_floor_of_expected(u):
    ys = np.arange(0, int(10 * u) + 1)
    values = [log_likelihood([y], [u]) for y in ys]
    assert ys[int(np.argmax(values))] == math.floor(u)


def test_log_likelihood_permutation_equivariant():
    rng = np.random.default_rng(12)
    counts = rng.poisson(20.0, 6)
    expected = rng.uniform(5.0, 40.0, (50, 6))
    order = rng.permutation(6)
    rows = rng.permutation(50)
    for mode in (LikelihoodMode.poisson(), LikelihoodMode.gaussian(3.0)):
        base = log_likelihood(counts, expected, mode)
        assert log_likelihood(counts[order], expected[:, order], mode) == pytest.approx(base, rel=1e-12)
        assert log_likelihood(counts, expected[rows], mode) == pytest.approx(base[rows], rel=1e-12)


def test_poisson_and_gaussian_rank_alike_at_high_counts():
    rng = np.random.default_rng(30)
    counts = np.full(4, 100)
    expected = 100.0 + rng.normal(0.0, 3.0, (1000, 4))
    poisson = log_likelihood(counts, expected)
    gaussian = log_likelihood(counts, expected, LikelihoodMode.gaussian(10.0))
    rho, _ = spearmanr(poisson, gaussian)
    assert rho > 0.99


def test_log_likelihood_length_mismatch():
    with pytest.raises(DataError):
        log_likelihood([1, 2], [1.0])


def test_log_likelihood_negative_count():
    with pytest.raises(DataError):
        log_likelihood([-1], [1.0])


def test_likelihood_mode_parse():
    assert LikelihoodMode.parse("poisson") == LikelihoodMode.poisson()
    mode = LikelihoodMode.parse("gaussian:2.5")
    assert mode.kind == "gaussian" and mode.sigma == 2.5
    assert LikelihoodMode.parse(str(LikelihoodMode.gaussian(0.1))) == LikelihoodMode.gaussian(0.1)


@pytest.mark.parametrize("text", ["gaussian", "gaussian:-1", "gaussian:abc", "laplace", "poisson:2"])
def test_likelihood_mode_parse_errors(text):
    with pytest.raises(ConfigError):
        LikelihoodMode.parse(text)


@pytest.mark.parametrize("field, value", [
    ("area", 0.0),
    ("efficiency", 1.5),
    ("dwell", -1.0),
    ("background_rate", -0.1),
])
def test_detector_spec_validation(field, value):
    params = {"position": (0.0, 0.0), "area": 1.0, "efficiency": 0.5, "dwell": 1.0, field: value}
    with pytest.raises(ConfigError):
        DetectorSpec(**params)


def test_particle_validation():
    with pytest.raises(DegenerateInputError):
        Particle(float("inf"), 0.0, 1.0)
    with pytest.raises(ConfigError):
        Particle(0.0, 0.0, 0.0)


def test_activity_units():
    assert mci_to_bq(8.7) == pytest.approx(3.219e8)
    assert uci_to_bq(7.6) == pytest.approx(2.812e5)
