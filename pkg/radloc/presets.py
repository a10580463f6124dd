# radloc/presets.py - 내장 실험 시나리오 (하드코딩 데이터)
"""
내장 시나리오

- case1 / case2: 250 m × 180 m 도시 영역, NaI 검출기 10대, 건물 12동, RT 모델
- case1_mobile / case1_kde: case1 + 이동형 검출기 (평균 추적 / KDE 중요도 분포)
- lsi_a04, lsi_c01 … lsi_c04: 10 m × 10 m 실내 배치, QA 모델, 1초 측정
"""

import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

from .detector import DetectorSpec, ForwardModel, Particle, mci_to_bq, uci_to_bq
from .errors import ConfigError
from .geometry import BuildingPolygon, Scene
from .mobility import MoveConfig
from .scenario import Scenario, load_scenario

logger = logging.getLogger("radloc.presets")


def _rect(x0: float, y0: float, x1: float, y1: float) -> List[Tuple[float, float]]:
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


class ScenarioPresets:
    """내장 시나리오 데이터 관리 클래스"""

    def __init__(self):
        # 도시 영역 NaI 3"×3" 검출기 위치 (m)
        self.urban_detector_positions = [
            (68.8, 35.8), (66.4, 119.5), (4.1, 48.1), (190.2, 50.1), (94.0, 99.9),
            (189.2, 19.2), (154.5, 3.0), (188.9, 141.3), (119.9, 160.0), (214.5, 77.9),
        ]
        self.urban_detector = {"area": 0.0058, "efficiency": 0.62, "dwell": 5.0, "background_rate": 300.0}

        # 균질 건물 (꼭짓점, 평균 자유 행로 m); 광학 두께 1~5
        self.urban_buildings = [
            (_rect(15, 60, 55, 100), 20.0),
            (_rect(20, 5, 55, 30), 12.0),
            (_rect(80, 10, 140, 30), 15.0),
            (_rect(80, 50, 110, 85), 10.0),
            (_rect(125, 55, 150, 85), 8.0),
            (_rect(165, 60, 180, 90), 5.0),
            (_rect(200, 95, 240, 130), 10.0),
            ([(130, 115), (175, 115), (175, 150), (155, 150), (155, 135), (130, 135)], 9.0),
            (_rect(20, 130, 50, 170), 15.0),
            (_rect(70, 130, 105, 150), 7.0),
            (_rect(205, 5, 245, 40), 20.0),
            (_rect(165, 20, 180, 40), 6.0),
        ]
        self.urban_bounds = (0.0, 0.0, 250.0, 180.0)
        self.urban_intensity_range = (1e8, 5e10)
        # 8.7 mCi 세슘-137
        self.urban_sources = {"case1": (158.0, 98.0), "case2": (120.0, 40.0)}
        self.urban_intensity = mci_to_bq(8.7)

        # LSI A04 검출기 21대 (m)
        self.lsi_a04_positions = [
            (-4.2, -4.1), (-1.5, -4.3), (1.6, -4.0), (4.3, -4.2), (4.1, -1.2), (4.4, 1.7), (4.2, 4.3),
            (1.3, 4.1), (-1.7, 4.4), (-4.3, 4.0), (-4.0, 1.4), (-4.4, -1.6), (-2.1, -2.0), (0.2, -2.4),
            (2.3, -1.9), (2.2, 0.4), (1.9, 2.2), (-0.3, 2.3), (-2.4, 1.8), (-2.2, -0.2), (0.9, 0.8),
        ]
        # LSI C 배치: A04와 비슷하되 조금씩 이동, 한 대 추가
        offsets = [(0.15, 0.1), (-0.1, 0.15), (0.1, -0.1), (-0.15, -0.1)]
        self.lsi_c_positions = [
            (round(x + offsets[i % 4][0], 2), round(y + offsets[i % 4][1], 2))
            for i, (x, y) in enumerate(self.lsi_a04_positions)
        ] + [(-0.8, -1.0)]
        # NaI 2"×2": 반지름 1 inch 원형 단면
        self.lsi_detector = {"area": math.pi * 0.0254 ** 2, "efficiency": 0.3, "dwell": 1.0,
                             "background_rate": 2.0}
        self.lsi_bounds = (-5.0, -5.0, 5.0, 5.0)
        self.lsi_intensity_range = (1e4, 1e7)
        # (µCi, 위치 cm)
        self.lsi_sources = {
            "lsi_a04": (35.0, (0.0, 0.0)),
            "lsi_c01": (7.6, (0.0, 0.0)),
            "lsi_c02": (7.6, (71.0, 71.0)),
            "lsi_c03": (7.6, (141.0, 141.0)),
            "lsi_c04": (7.6, (283.0, 283.0)),
        }

    def _detectors(self, positions, params: Dict[str, float]) -> List[DetectorSpec]:
        return [DetectorSpec(position=p, id=f"D{i + 1:02d}", **params) for i, p in enumerate(positions)]

    def urban(self, name: str) -> Scenario:
        base = "case1" if name.startswith("case1") else name
        scene = Scene(
            self.urban_bounds,
            [BuildingPolygon(vertices, mfp) for vertices, mfp in self.urban_buildings],
            self.urban_intensity_range,
        )
        x, y = self.urban_sources[base]
        mobility = None
        if name == "case1_mobile":
            mobility = MoveConfig(step_length=1.0, cadence=1)
        elif name == "case1_kde":
            mobility = MoveConfig(step_length=1.0, cadence=3, mode="kde")
        return Scenario(
            scene=scene,
            detectors=self._detectors(self.urban_detector_positions, self.urban_detector),
            source_truth=Particle(x, y, self.urban_intensity),
            model=ForwardModel.RT,
            prior="kde" if name == "case1_kde" else "hull",
            n_particles=1000,
            resample_fraction=0.6,
            n_frames=100,
            mobility=mobility,
            name=name,
        )

    def lsi(self, name: str) -> Scenario:
        uci, (x_cm, y_cm) = self.lsi_sources[name]
        positions = self.lsi_a04_positions if name == "lsi_a04" else self.lsi_c_positions
        scenario = Scenario(
            scene=Scene(self.lsi_bounds, [], self.lsi_intensity_range),
            detectors=self._detectors(positions, self.lsi_detector),
            source_truth=Particle(x_cm / 100.0, y_cm / 100.0, uci_to_bq(uci)),
            model=ForwardModel.QA,
            prior="box" if name == "lsi_a04" else "hull",
            n_particles=1000,
            resample_fraction=0.6,
            n_frames=120,
            name=name,
        )
        if name != "lsi_a04":
            # 배경 데이터는 A04 배치에서 측정
            scenario = replace(scenario, background_detectors=self._detectors(self.lsi_a04_positions,
                                                                              self.lsi_detector))
        return scenario

    @property
    def names(self) -> List[str]:
        return ["case1", "case2", "case1_mobile", "case1_kde"] + list(self.lsi_sources)

    def get(self, name: str) -> Scenario:
        if name in self.lsi_sources:
            return self.lsi(name)
        if name in ("case1", "case2", "case1_mobile", "case1_kde"):
            return self.urban(name)
        raise ConfigError(f"알 수 없는 내장 시나리오: {name} (가능: {', '.join(self.names)})", field="scenario")


# 전역 인스턴스
_presets = None


def get_presets() -> ScenarioPresets:
    """내장 시나리오 인스턴스 반환"""
    global _presets
    if _presets is None:
        _presets = ScenarioPresets()
    return _presets


def initialize_presets() -> None:
    """내장 시나리오 초기화"""
    global _presets
    _presets = ScenarioPresets()
    logger.debug("내장 시나리오 초기화 완료")


def get_preset(name: str) -> Scenario:
    return get_presets().get(name)


def resolve_scenario(name_or_path: Union[str, Path]) -> Scenario:
    """내장 시나리오 이름 또는 JSON 파일 경로"""
    presets = get_presets()
    if str(name_or_path) in presets.names:
        return presets.get(str(name_or_path))
    path = Path(name_or_path)
    if not path.exists():
        raise ConfigError(f"내장 시나리오도 파일도 아닙니다: {name_or_path}", field="scenario")
    return load_scenario(path)


def get_preset_stats() -> Dict[str, Any]:
    """내장 시나리오 통계"""
    presets = get_presets()
    return {
        "names": presets.names,
        "urban_detectors": len(presets.urban_detector_positions),
        "urban_buildings": len(presets.urban_buildings),
        "lsi_a04_detectors": len(presets.lsi_a04_positions),
        "lsi_c_detectors": len(presets.lsi_c_positions),
    }
