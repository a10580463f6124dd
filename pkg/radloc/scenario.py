# radloc/scenario.py - 시나리오 설정 로드/저장
"""
JSON 시나리오 파일

섹션: name, scene, buildings, detectors, background_detectors(선택),
source(선택), filter, mobility(선택). 모르는 키는 ConfigError로 거부합니다.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from .detector import DetectorSpec, ForwardModel, LikelihoodMode, Particle, uci_to_bq
from .errors import ConfigError, RadlocError
from .geometry import BuildingPolygon, Scene
from .measurement import BinMode
from .mobility import MoveConfig
from .priors import PRIOR_KINDS

logger = logging.getLogger("radloc.scenario")

SECTIONS = {"name", "scene", "buildings", "detectors", "background_detectors", "source", "filter", "mobility"}
SCENE_KEYS = {"bounds", "intensity_range"}
BUILDING_KEYS = {"vertices", "mean_free_path"}
DETECTOR_KEYS = {"id", "x", "y", "area", "efficiency", "dwell", "background_rate"}
SOURCE_KEYS = {"x", "y", "intensity_bq", "intensity_uci"}
FILTER_KEYS = {"n_particles", "resample_fraction", "prior", "likelihood", "model", "seed", "n_frames",
               "bin_mode", "kde_start", "kde_cadence"}
MOBILITY_KEYS = {"step_length", "cadence", "max_random_tries", "mode"}


@dataclass
class Scenario:
    """실험 하나를 정의하는 장면, 검출기, 선원, 필터 설정"""

    scene: Scene
    detectors: List[DetectorSpec]
    source_truth: Optional[Particle] = None
    model: ForwardModel = ForwardModel.RT
    likelihood: LikelihoodMode = field(default_factory=LikelihoodMode)
    prior: str = "hull"
    n_particles: int = 1000
    resample_fraction: float = 0.6
    n_frames: int = 100
    seed: int = 0
    mobility: Optional[MoveConfig] = None
    background_detectors: Optional[List[DetectorSpec]] = None
    bin_mode: BinMode = BinMode.BIN12
    kde_start: int = 10
    kde_cadence: int = 3
    name: str = ""

    def __post_init__(self):
        self.model = _enum(ForwardModel, self.model, "filter.model")
        self.bin_mode = _enum(BinMode, self.bin_mode, "filter.bin_mode")
        if not self.detectors:
            raise ConfigError("검출기가 하나 이상 필요합니다", field="detectors")
        ids = [det.id for det in self.detectors]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"검출기 id가 중복됩니다: {ids}", field="detectors")
        if self.n_particles < 2:
            raise ConfigError(f"입자 수는 2 이상이어야 합니다: {self.n_particles}", field="n_particles")
        if not 0.0 < self.resample_fraction < 1.0:
            raise ConfigError(f"(0, 1) 범위가 아닙니다: {self.resample_fraction}", field="resample_fraction")
        if math.floor(self.resample_fraction * self.n_particles) < 1:
            raise ConfigError(f"floor(f·N) = 0이면 교체되는 입자가 없습니다 "
                              f"(f={self.resample_fraction}, N={self.n_particles})", field="resample_fraction")
        if self.n_frames < 1:
            raise ConfigError(f"프레임 수는 1 이상이어야 합니다: {self.n_frames}", field="n_frames")
        if self.seed < 0:
            raise ConfigError(f"seed는 음수가 될 수 없습니다: {self.seed}", field="seed")
        if self.prior not in PRIOR_KINDS:
            raise ConfigError(f"prior는 {PRIOR_KINDS} 중 하나여야 합니다: {self.prior}", field="prior")
        if self.kde_start < 1 or self.kde_cadence < 1:
            raise ConfigError("kde_start와 kde_cadence는 1 이상이어야 합니다", field="kde_start")
        if self.source_truth is not None and not self.scene.contains_xy((self.source_truth.x,
                                                                         self.source_truth.y))[0]:
            raise ConfigError(f"선원이 영역 밖에 있습니다: {self.source_truth}", field="source")

    @property
    def detector_ids(self) -> List[str]:
        return [det.id for det in self.detectors]


def _enum(enum_cls, value, field_name: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ConfigError(f"{value!r}는 허용되지 않습니다 ({choices})", field=field_name) from None


def _check_keys(data: Any, allowed: Iterable[str], where: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"객체(JSON object)여야 합니다: {type(data).__name__}", field=where)
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"알 수 없는 키: {', '.join(unknown)}", field=f"{where}.{unknown[0]}")
    return data


def _require(data: Dict[str, Any], key: str, where: str):
    if key not in data:
        raise ConfigError("필수 키가 없습니다", field=f"{where}.{key}")
    return data[key]


def _number(data: Dict[str, Any], key: str, where: str, default=None, cast=float):
    value = data.get(key, default) if default is not None else _require(data, key, where)
    if isinstance(value, bool):
        raise ConfigError(f"숫자여야 합니다: {value!r}", field=f"{where}.{key}")
    try:
        result = cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"숫자여야 합니다: {value!r}", field=f"{where}.{key}") from None
    if cast is int and result != value:
        raise ConfigError(f"정수여야 합니다: {value!r}", field=f"{where}.{key}")
    return result


def _parse_detectors(items: Any, where: str) -> List[DetectorSpec]:
    if not isinstance(items, list):
        raise ConfigError("검출기 목록(JSON array)이어야 합니다", field=where)
    detectors = []
    for index, item in enumerate(items):
        label = f"{where}[{index}]"
        _check_keys(item, DETECTOR_KEYS, label)
        detectors.append(DetectorSpec(
            position=(_number(item, "x", label), _number(item, "y", label)),
            area=_number(item, "area", label),
            efficiency=_number(item, "efficiency", label),
            dwell=_number(item, "dwell", label),
            background_rate=_number(item, "background_rate", label, default=0.0),
            id=str(item.get("id", f"D{index + 1:02d}")),
        ))
    return detectors


def _parse_source(data: Any) -> Particle:
    _check_keys(data, SOURCE_KEYS, "source")
    if ("intensity_bq" in data) == ("intensity_uci" in data):
        raise ConfigError("intensity_bq와 intensity_uci 중 정확히 하나가 필요합니다", field="source")
    if "intensity_bq" in data:
        intensity = _number(data, "intensity_bq", "source")
    else:
        intensity = uci_to_bq(_number(data, "intensity_uci", "source"))
    return Particle(_number(data, "x", "source"), _number(data, "y", "source"), intensity)


def scenario_from_dict(data: Dict[str, Any]) -> Scenario:
    """JSON 딕셔너리 → 검증된 Scenario"""
    _check_keys(data, SECTIONS, "scenario")
    scene_data = _check_keys(_require(data, "scene", "scenario"), SCENE_KEYS, "scene")

    buildings = []
    for index, item in enumerate(data.get("buildings", [])):
        label = f"buildings[{index}]"
        _check_keys(item, BUILDING_KEYS, label)
        vertices = _require(item, "vertices", label)
        try:
            vertices = [(float(x), float(y)) for x, y in vertices]
        except (TypeError, ValueError):
            raise ConfigError("꼭짓점은 [x, y] 쌍의 목록이어야 합니다", field=f"{label}.vertices") from None
        buildings.append(BuildingPolygon(vertices, _number(item, "mean_free_path", label)))

    try:
        bounds = tuple(float(v) for v in _require(scene_data, "bounds", "scene"))
        intensity_range = tuple(float(v) for v in _require(scene_data, "intensity_range", "scene"))
    except (TypeError, ValueError):
        raise ConfigError("bounds/intensity_range는 숫자 목록이어야 합니다", field="scene") from None
    if len(bounds) != 4 or len(intensity_range) != 2:
        raise ConfigError("bounds는 4개, intensity_range는 2개 값이어야 합니다", field="scene")
    scene = Scene(bounds, buildings, intensity_range)

    detectors = _parse_detectors(_require(data, "detectors", "scenario"), "detectors")
    background = None
    if data.get("background_detectors") is not None:
        background = _parse_detectors(data["background_detectors"], "background_detectors")
    source = _parse_source(data["source"]) if data.get("source") is not None else None

    flt = _check_keys(data.get("filter", {}), FILTER_KEYS, "filter")
    mobility = None
    if data.get("mobility") is not None:
        mob = _check_keys(data["mobility"], MOBILITY_KEYS, "mobility")
        mobility = MoveConfig(
            step_length=_number(mob, "step_length", "mobility", default=1.0),
            cadence=_number(mob, "cadence", "mobility", default=1, cast=int),
            max_random_tries=_number(mob, "max_random_tries", "mobility", default=64, cast=int),
            mode=str(mob.get("mode", "mean-pursuit")),
        )

    return Scenario(
        scene=scene,
        detectors=detectors,
        source_truth=source,
        model=flt.get("model", ForwardModel.RT.value),
        likelihood=LikelihoodMode.parse(flt.get("likelihood", "poisson")),
        prior=str(flt.get("prior", "hull")),
        n_particles=_number(flt, "n_particles", "filter", default=1000, cast=int),
        resample_fraction=_number(flt, "resample_fraction", "filter", default=0.6),
        n_frames=_number(flt, "n_frames", "filter", default=100, cast=int),
        seed=_number(flt, "seed", "filter", default=0, cast=int),
        mobility=mobility,
        background_detectors=background,
        bin_mode=flt.get("bin_mode", BinMode.BIN12.value),
        kde_start=_number(flt, "kde_start", "filter", default=10, cast=int),
        kde_cadence=_number(flt, "kde_cadence", "filter", default=3, cast=int),
        name=str(data.get("name", "")),
    )


def _detector_dict(det: DetectorSpec) -> Dict[str, Any]:
    return {
        "id": det.id,
        "x": det.position.x,
        "y": det.position.y,
        "area": det.area,
        "efficiency": det.efficiency,
        "dwell": det.dwell,
        "background_rate": det.background_rate,
    }


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Scenario → JSON 딕셔너리 (scenario_from_dict의 역)"""
    data: Dict[str, Any] = {
        "name": scenario.name,
        "scene": {
            "bounds": list(scenario.scene.bounds),
            "intensity_range": list(scenario.scene.intensity_range),
        },
        "buildings": [
            {"vertices": [list(v) for v in b.vertices], "mean_free_path": b.mean_free_path}
            for b in scenario.scene.buildings
        ],
        "detectors": [_detector_dict(det) for det in scenario.detectors],
        "filter": {
            "n_particles": scenario.n_particles,
            "resample_fraction": scenario.resample_fraction,
            "prior": scenario.prior,
            "likelihood": str(scenario.likelihood),
            "model": scenario.model.value,
            "seed": scenario.seed,
            "n_frames": scenario.n_frames,
            "bin_mode": scenario.bin_mode.value,
            "kde_start": scenario.kde_start,
            "kde_cadence": scenario.kde_cadence,
        },
    }
    if scenario.background_detectors is not None:
        data["background_detectors"] = [_detector_dict(det) for det in scenario.background_detectors]
    if scenario.source_truth is not None:
        s = scenario.source_truth
        data["source"] = {"x": s.x, "y": s.y, "intensity_bq": s.intensity}
    if scenario.mobility is not None:
        m = scenario.mobility
        data["mobility"] = {"step_length": m.step_length, "cadence": m.cadence,
                            "max_random_tries": m.max_random_tries, "mode": m.mode}
    return data


def load_scenario(path: Union[str, Path]) -> Scenario:
    """시나리오 JSON 파일 로드 및 검증"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"시나리오 파일을 읽을 수 없습니다: {e}", field=str(path)) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON 파싱 오류: {e.msg}", field=path.name, line=e.lineno) from e
    try:
        scenario = scenario_from_dict(data)
    except RadlocError:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"시나리오 형식 오류: {e}", field=path.name) from e
    logger.debug("시나리오 로드: %s (검출기 %d개)", path, len(scenario.detectors))
    return scenario


def save_scenario(scenario: Scenario, path: Union[str, Path]) -> Path:
    """시나리오를 JSON 파일로 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(scenario), f, indent=2, ensure_ascii=False)
    return path
