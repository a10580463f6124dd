import numpy as np
import pytest

from conftest import URBAN_POSITIONS, make_detectors
from radloc.errors import ConfigError, DegenerateInputError
from radloc.geometry import Scene, points_in_hull
from radloc.particle_filter import init_ensemble
from radloc.priors import (
    KDE_INTENSITY_FLOOR_FRACTION,
    KDE_POSITION_FLOOR,
    KdeModel,
    PriorSpec,
    geometric_prior,
    kde_fit,
    kde_sample,
)
from radloc.rng import RandomStream


@pytest.fixture
def lsi_scene():
    return Scene((-5.0, -5.0, 5.0, 5.0), [], (1e4, 1e7))


@pytest.fixture
def wide_scene():
    return Scene((-100.0, -100.0, 100.0, 100.0), [], (1.0, 1e12))


def test_box_prior_stays_in_domain(lsi_scene):
    states = PriorSpec.box(lsi_scene).sample(1000, RandomStream(0))
    assert states.shape == (1000, 3)
    assert np.all(np.abs(states[:, :2]) <= 5.0)
    assert np.all((states[:, 2] >= 1e4) & (states[:, 2] <= 1e7))


def test_hull_prior_stays_in_hull():
    scene = Scene((0.0, 0.0, 250.0, 180.0), [], (1e8, 5e10))
    prior = PriorSpec.from_hull(scene, make_detectors(URBAN_POSITIONS))
    states = prior.sample(2000, RandomStream(1))
    assert points_in_hull(prior.hull, states[:, :2]).all()


def test_init_ensemble_two_particles(lsi_scene):
    ens = init_ensemble(PriorSpec.box(lsi_scene), 2, RandomStream(0))
    assert ens.norm_weights.tolist() == [0.5, 0.5]
    assert ens.log_weights.tolist() == [0.0, 0.0]


def test_init_ensemble_needs_two(lsi_scene):
    with pytest.raises(ConfigError):
        init_ensemble(PriorSpec.box(lsi_scene), 1, RandomStream(0))


def test_kde_identical_particles_use_floors(lsi_scene):
    states = np.tile([1.0, -2.0, 1e5], (50, 1))
    kde = kde_fit(states, lsi_scene)
    log_floor = KDE_INTENSITY_FLOOR_FRACTION * np.log(1e7 / 1e4)
    assert kde.bandwidths == pytest.approx([KDE_POSITION_FLOOR, KDE_POSITION_FLOOR, log_floor])

    draws = kde_sample(kde, 2000, lsi_scene, RandomStream(2))
    assert np.all(np.abs(draws[:, 0] - 1.0) < 5 * KDE_POSITION_FLOOR)
    assert np.all(np.abs(draws[:, 1] + 2.0) < 5 * KDE_POSITION_FLOOR)
    assert np.all(np.abs(np.log(draws[:, 2]) - np.log(1e5)) < 5 * log_floor)


def test_kde_two_clusters_equal_mass(lsi_scene):
    rng = np.random.default_rng(0)
    left = np.column_stack([rng.normal(-3, 0.2, 100), rng.normal(-3, 0.2, 100), np.full(100, 1e6)])
    right = np.column_stack([rng.normal(3, 0.2, 100), rng.normal(3, 0.2, 100), np.full(100, 1e6)])
    kde = kde_fit(np.vstack([left, right]), lsi_scene)
    draws = kde_sample(kde, 10_000, lsi_scene, RandomStream(4))
    assert np.mean(draws[:, 0] < 0) == pytest.approx(0.5, abs=0.02)


def test_kde_moments(wide_scene):
    rng = np.random.default_rng(1)
    states = np.column_stack([rng.normal(2.0, 3.0, 300), rng.normal(-1.0, 1.5, 300),
                              np.exp(rng.normal(10.0, 0.5, 300))])
    kde = kde_fit(states, wide_scene)
    draws = kde_sample(kde, 100_000, wide_scene, RandomStream(6))
    log_draws = np.column_stack([draws[:, :2], np.log(draws[:, 2])])

    support = kde.support
    expected_cov = np.cov(support, rowvar=False, bias=True) + np.diag(kde.bandwidths ** 2)
    standard_errors = np.sqrt(np.diag(expected_cov) / len(draws))
    assert np.all(np.abs(log_draws.mean(axis=0) - support.mean(axis=0)) < 4 * standard_errors)
    assert np.diag(np.cov(log_draws, rowvar=False)) == pytest.approx(np.diag(expected_cov), rel=0.05)


def test_kde_single_point_tiny_bandwidth(lsi_scene):
    kde = KdeModel(np.array([[0.5, 0.5, np.log(1e5)]]), np.array([1e-3, 1e-3, 1e-3]))
    draws = kde_sample(kde, 500, lsi_scene, RandomStream(0))
    assert np.all(np.abs(draws[:, :2] - 0.5) < 5e-3)
    assert len(kde) == 1
    assert kde.support_points[0].x == 0.5


def test_kde_mass_outside_domain(lsi_scene):
    kde = KdeModel(np.array([[50.0, 50.0, np.log(1e5)]]), np.array([0.1, 0.1, 0.1]))
    with pytest.raises(DegenerateInputError):
        kde_sample(kde, 10, lsi_scene, RandomStream(0))


def test_kde_sampling_is_deterministic(lsi_scene):
    kde = kde_fit(np.array([[0.0, 0.0, 1e5], [1.0, 1.0, 2e5], [-1.0, 0.5, 3e5]]), lsi_scene)
    a = kde_sample(kde, 100, lsi_scene, RandomStream(5, 3))
    b = kde_sample(kde, 100, lsi_scene, RandomStream(5, 3))
    assert np.array_equal(a, b)


def test_prior_spec_validation(lsi_scene):
    with pytest.raises(ConfigError):
        PriorSpec("gaussian", lsi_scene)
    with pytest.raises(ConfigError):
        PriorSpec("hull", lsi_scene)
    with pytest.raises(ConfigError):
        PriorSpec("kde", lsi_scene)


def test_geometric_prior_kde_falls_back_to_box(lsi_scene):
    collinear = make_detectors([(-1.0, 0.0), (0.0, 0.0), (1.0, 0.0)])
    assert geometric_prior("kde", lsi_scene, collinear).kind == "box"
    assert geometric_prior("kde", lsi_scene, make_detectors([(0, 0), (1, 0), (0, 1)])).kind == "hull"
    with pytest.raises(DegenerateInputError):
        geometric_prior("hull", lsi_scene, collinear)
