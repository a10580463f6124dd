# radloc/mobility.py - 이동형 검출기 전략
"""
검출기를 사후 평균 쪽으로 step_length씩 이동

직선 이동이 건물에 막히면 좌표축 방향(목표에 더 가까워지는 쪽 먼저),
그래도 막히면 임의 방향을 max_random_tries번까지 시도합니다.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .detector import DetectorSpec, ForwardModel
from .errors import ConfigError
from .geometry import Point2, Scene, point_in_building, segment_blocked
from .measurement import simulate_observation
from .particle_filter import PosteriorSummary, RunOptions, RunResult, filter_loop
from .rng import RandomStream, make_streams

logger = logging.getLogger("radloc.mobility")

MOBILITY_MODES = ("mean-pursuit", "kde")


@dataclass(frozen=True)
class MoveConfig:
    """이동 거리, 이동 주기 (프레임), 임의 방향 시도 횟수, 중요도 분포 모드"""

    step_length: float = 1.0
    cadence: int = 1
    max_random_tries: int = 64
    mode: str = "mean-pursuit"

    def __post_init__(self):
        if not self.step_length > 0:
            raise ConfigError(f"step_length는 양수여야 합니다: {self.step_length}", field="mobility.step_length")
        if self.cadence < 1:
            raise ConfigError(f"cadence는 1 이상이어야 합니다: {self.cadence}", field="mobility.cadence")
        if self.max_random_tries < 0:
            raise ConfigError(f"max_random_tries는 음수가 될 수 없습니다: {self.max_random_tries}",
                              field="mobility.max_random_tries")
        if self.mode not in MOBILITY_MODES:
            raise ConfigError(f"알 수 없는 이동 모드: {self.mode}", field="mobility.mode")


def _blocked(a: np.ndarray, b: np.ndarray, scene: Scene) -> bool:
    if not scene.contains_xy(b)[0]:
        return True
    return segment_blocked(a, b, scene)


def _coordinate_candidates(pos: np.ndarray, target: np.ndarray, step: float) -> List[np.ndarray]:
    """±x, ±y 중 목표 쪽 두 후보를 이동 후 거리 순으로"""
    delta = target - pos
    candidates = []
    for axis in (0, 1):
        move = np.zeros(2)
        move[axis] = step if delta[axis] >= 0 else -step
        candidates.append(pos + move)
    # sorted는 안정 정렬: 같은 거리면 x 방향 먼저
    return sorted(candidates, key=lambda c: float(np.linalg.norm(target - c)))


def move_detector(det: DetectorSpec, target: Sequence[float], scene: Scene, cfg: MoveConfig, rng) -> DetectorSpec:
    """검출기 한 대를 목표 쪽으로 한 걸음 이동 (건물 통과 금지)"""
    pos = np.asarray(det.position, dtype=float)
    target = np.asarray(target, dtype=float)
    if point_in_building(pos, scene) is not None:
        logger.warning("검출기 %s가 건물 안에 있어 이동하지 않습니다", det.id)
        return det
    delta = target - pos
    distance = float(np.linalg.norm(delta))
    if distance == 0.0:
        return det

    # 남은 거리가 step_length보다 짧으면 목표 위로
    candidate = target if distance < cfg.step_length else pos + cfg.step_length * delta / distance
    if not _blocked(pos, candidate, scene):
        return det.moved_to(candidate)

    for candidate in _coordinate_candidates(pos, target, cfg.step_length):
        if not _blocked(pos, candidate, scene):
            return det.moved_to(candidate)

    for _ in range(cfg.max_random_tries):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        candidate = pos + cfg.step_length * np.array([np.cos(theta), np.sin(theta)])
        if not _blocked(pos, candidate, scene):
            return det.moved_to(candidate)

    logger.warning("검출기 %s: 모든 방향이 막혀 제자리에 머뭅니다", det.id)
    return det


def run_sir_mobile(scenario,
                   options: Optional[RunOptions] = None,
                   streams: Optional[Dict[str, RandomStream]] = None) -> RunResult:
    """관측 시뮬레이션과 SIR 단계 사이에 검출기 이동을 끼워 넣어 실행"""
    if scenario.source_truth is None:
        raise ConfigError("이동형 검출기 실행에는 선원(source)이 필요합니다", field="source")
    if ForwardModel(scenario.model) is not ForwardModel.RT:
        raise ConfigError("이동형 검출기 실행은 RT 모델만 지원합니다", field="model")
    cfg = scenario.mobility or MoveConfig()
    streams = streams or make_streams(scenario.seed)
    scene = scenario.scene

    def next_frame(k: int, dets: List[DetectorSpec]):
        return simulate_observation(scenario.source_truth, dets, scene, scenario.model,
                                    streams["measurement"], time_index=k)

    def mover(k: int, summary: PosteriorSummary, dets: List[DetectorSpec]) -> List[DetectorSpec]:
        if k % cfg.cadence:
            return dets
        target = Point2(summary.mean.x, summary.mean.y)
        # 검출기 인덱스 순서로 순차 이동
        return [move_detector(det, target, scene, cfg, streams["mobility"]) for det in dets]

    importance_kind = "kde" if cfg.mode == "kde" else None
    return filter_loop(scenario, scenario.n_frames, next_frame, options, streams,
                       mover=mover, importance_kind=importance_kind)
