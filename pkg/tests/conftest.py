import numpy as np
import pytest

from radloc.detector import DetectorSpec, ForwardModel, Particle
from radloc.geometry import BuildingPolygon, Scene
from radloc.rng import RandomStream
from radloc.scenario import Scenario

# 도시 영역 NaI 검출기 위치 (m)
URBAN_POSITIONS = [
    (68.8, 35.8), (66.4, 119.5), (4.1, 48.1), (190.2, 50.1), (94.0, 99.9),
    (189.2, 19.2), (154.5, 3.0), (188.9, 141.3), (119.9, 160.0), (214.5, 77.9),
]

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


@pytest.fixture(autouse=True)
def run_log(tmp_path, monkeypatch):
    """실행 기록을 임시 파일로"""
    path = tmp_path / "run-log.json"
    monkeypatch.setenv("RADLOC_RUN_LOG", str(path))
    return path


@pytest.fixture
def rng():
    return RandomStream(1234, 0)


@pytest.fixture
def unit_square_scene():
    return Scene((-2.0, -2.0, 3.0, 3.0), [BuildingPolygon(UNIT_SQUARE, 1.0)], (1.0, 10.0))


@pytest.fixture
def empty_scene():
    return Scene((-5.0, -5.0, 5.0, 5.0), [], (1e4, 1e7))


def make_detectors(positions, area=0.002, efficiency=0.3, dwell=1.0, background_rate=0.0):
    return [
        DetectorSpec(position=p, area=area, efficiency=efficiency, dwell=dwell,
                     background_rate=background_rate, id=f"D{i + 1:02d}")
        for i, p in enumerate(positions)
    ]


@pytest.fixture
def tiny_scenario(empty_scene):
    """빠른 실행용 QA 시나리오: 모서리 검출기 4대"""
    return Scenario(
        scene=Scene((-5.0, -5.0, 5.0, 5.0), [], (1e5, 1e8)),
        detectors=make_detectors([(-4.0, -4.0), (4.0, -4.0), (4.0, 4.0), (-4.0, 4.0)], background_rate=1.0),
        source_truth=Particle(1.0, -1.0, 1e7),
        model=ForwardModel.QA,
        prior="hull",
        n_particles=200,
        resample_fraction=0.6,
        n_frames=6,
        seed=7,
        name="tiny",
    )


@pytest.fixture
def tiny_rt_scenario():
    """건물 하나가 있는 RT 시나리오"""
    scene = Scene((-5.0, -5.0, 5.0, 5.0), [BuildingPolygon([(-1, 1), (1, 1), (1, 2), (-1, 2)], 2.0)], (1e5, 1e8))
    return Scenario(
        scene=scene,
        detectors=make_detectors([(-4.0, -4.0), (4.0, -4.0), (4.0, 4.0), (-4.0, 4.0)], background_rate=1.0),
        source_truth=Particle(0.5, -1.5, 1e7),
        model=ForwardModel.RT,
        prior="hull",
        n_particles=100,
        resample_fraction=0.6,
        n_frames=5,
        seed=3,
        name="tiny-rt",
    )


def states_equal(a, b) -> bool:
    return np.array_equal(np.asarray(a), np.asarray(b))
