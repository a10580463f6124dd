# radloc/particle_filter.py - SIR 입자 필터 핵심
"""
SIR (Sampling Importance Resampling) 입자 필터

한 프레임마다:
    가중치 (로그 우도) → 정규화 (softmax) → 요약/r_k → 정렬-교체 재표본화
예측 단계는 항등 사상입니다 (고정 선원).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from .detector import (
    DetectorSpec, ForwardModel, LikelihoodMode, Particle, detector_arrays, expected_counts, log_likelihood,
)
from .errors import ConfigError, DataError, DegenerateInputError, DegenerateLikelihoodError
from .geometry import Point2, Scene, optical_depths
from .measurement import MeasurementFrame
from .priors import PRIOR_KINDS, PriorSpec, geometric_prior, kde_fit
from .rng import RandomStream, make_streams

logger = logging.getLogger("radloc.particle_filter")


@dataclass
class Ensemble:
    """입자 상태 (N, 3)와 로그/정규화 가중치

    depths는 (입자, 검출기)별 광학 두께 캐시이며 NaN 행은 다시 계산합니다.
    """

    states: np.ndarray
    log_weights: np.ndarray
    norm_weights: np.ndarray
    depths: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    depth_key: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.states)
        if self.log_weights.shape != (n,) or self.norm_weights.shape != (n,):
            raise DegenerateInputError(f"입자 수 {n}와 가중치 길이가 다릅니다")

    @classmethod
    def uniform(cls, states: np.ndarray) -> "Ensemble":
        states = np.atleast_2d(np.asarray(states, dtype=float))
        n = len(states)
        return cls(states, np.zeros(n), np.full(n, 1.0 / n))

    @classmethod
    def with_weights(cls, states: np.ndarray, weights: Sequence[float]) -> "Ensemble":
        """정규화된 가중치로 직접 구성 (로그 가중치 = ln w)"""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        weights = np.asarray(weights, dtype=float)
        with np.errstate(divide="ignore"):
            log_weights = np.log(weights)
        return cls(states, log_weights, weights / weights.sum())

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def particles(self) -> List[Particle]:
        return [Particle.from_array(row) for row in self.states]

    def ranking(self) -> np.ndarray:
        """가중치 내림차순 인덱스 (동률은 낮은 인덱스 우선)"""
        key = np.where(np.isnan(self.log_weights), -np.inf, self.log_weights)
        return np.argsort(-key, kind="stable")


@dataclass
class PosteriorSummary:
    """경험적 사후 분포 요약"""

    mean: Particle
    covariance: np.ndarray
    map_particle: Particle
    ess: float
    retained_mean: Optional[Point2] = None
    step: Optional[int] = None
    r_k: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "step": self.step,
            "mean": [self.mean.x, self.mean.y, self.mean.intensity],
            "covariance": self.covariance.tolist(),
            "map_particle": [self.map_particle.x, self.map_particle.y, self.map_particle.intensity],
            "ess": self.ess,
            "retained_mean": list(self.retained_mean) if self.retained_mean is not None else None,
            "r_k": self.r_k,
        }


@dataclass
class RunOptions:
    """run_sir 실행 옵션"""

    include_background: bool = True
    kde_start: int = 10
    kde_cadence: int = 3
    keep_history: bool = True

    def __post_init__(self):
        if self.kde_start < 1:
            raise ConfigError(f"kde_start는 1 이상이어야 합니다: {self.kde_start}", field="kde_start")
        if self.kde_cadence < 1:
            raise ConfigError(f"kde_cadence는 1 이상이어야 합니다: {self.kde_cadence}", field="kde_cadence")


@dataclass
class RunResult:
    """필터 실행 결과 (history는 재표본화 직전의 가중 앙상블)"""

    ensemble_history: List[Ensemble]
    r_series: List[float]
    summary_series: List[PosteriorSummary]
    final_ensemble: Ensemble
    detector_history: Optional[List[np.ndarray]] = None
    detector_ids: List[str] = field(default_factory=list)

    @property
    def final_summary(self) -> PosteriorSummary:
        return self.summary_series[-1]


def _check_fraction(f: float) -> None:
    if not (0.0 < f < 1.0):
        raise ConfigError(f"재표본화 비율은 (0, 1) 범위여야 합니다: {f}", field="resample_fraction")


def init_ensemble(prior: PriorSpec, n: int, rng) -> Ensemble:
    """사전 분포에서 n개 입자, 가중치 1/n"""
    if n < 2:
        raise ConfigError(f"입자 수는 2 이상이어야 합니다: {n}", field="n_particles")
    return Ensemble.uniform(prior.sample(n, rng))


def _attenuation(ens: Ensemble, positions: np.ndarray, scene: Scene):
    """캐시된 광학 두께를 재사용하고 무효화된 행만 다시 계산"""
    if ens.depths is None or ens.depth_key is None or not np.array_equal(ens.depth_key, positions):
        return optical_depths(ens.states[:, :2], positions, scene)
    stale = np.isnan(ens.depths).any(axis=1)
    if not stale.any():
        return ens.depths
    depths = ens.depths.copy()
    depths[stale] = optical_depths(ens.states[stale, :2], positions, scene)
    return depths


def compute_log_weights(ens: Ensemble,
                        frame: MeasurementFrame,
                        dets: Sequence[DetectorSpec],
                        scene: Scene,
                        model,
                        mode: LikelihoodMode,
                        include_background: bool) -> Ensemble:
    """입자별 로그 가중치 = 로그 우도 (배경 B·Δt 포함 여부는 호출자가 선택)"""
    if len(frame) != len(dets):
        raise DataError(f"프레임 {frame.time_index}: 계수 {len(frame)}개, 검출기 {len(dets)}개")
    model = ForwardModel(model)
    depths = key = None
    if model is ForwardModel.RT:
        key, _, _ = detector_arrays(dets)
        depths = _attenuation(ens, key, scene)
    expected = expected_counts(ens.states, dets, scene, model, include_background=include_background, depths=depths)
    log_weights = np.atleast_1d(log_likelihood(frame, expected, mode))
    return replace(ens, log_weights=log_weights, depths=depths, depth_key=key)


def normalize_weights(ens: Ensemble, step: Optional[int] = None) -> Ensemble:
    """최댓값을 뺀 softmax로 가중치 정규화"""
    log_weights = np.where(np.isnan(ens.log_weights), -np.inf, ens.log_weights)
    if np.any(np.isposinf(log_weights)) or not np.any(np.isfinite(log_weights)):
        raise DegenerateLikelihoodError("유한한 로그 가중치가 없습니다", step=step)
    return replace(ens, log_weights=log_weights, norm_weights=softmax(log_weights))


def effective_sample_size(ens: Ensemble) -> float:
    """ESS = 1 / Σ w̄², 로그 가중치에서 log-sum-exp로 계산"""
    lw = np.where(np.isnan(ens.log_weights), -np.inf, ens.log_weights)
    if not np.any(np.isfinite(lw)):
        return 0.0
    return float(np.exp(2.0 * logsumexp(lw) - logsumexp(2.0 * lw)))


def retained_indices(ens: Ensemble, f: float) -> np.ndarray:
    """상위 N - floor(f·N)개 입자 인덱스 (가중치 내림차순)"""
    _check_fraction(f)
    n_keep = ens.n - math.floor(f * ens.n)
    return ens.ranking()[:n_keep]


def resample_sort_replace(ens: Ensemble, f: float, importance: PriorSpec, rng) -> Ensemble:
    """가중치 하위 floor(f·N)개를 중요도 분포의 새 표본으로 교체, 가중치는 1/N로 초기화"""
    _check_fraction(f)
    n = ens.n
    n_replace = math.floor(f * n)
    states = ens.states.copy()
    depths = ens.depths
    if n_replace > 0:
        replaced = ens.ranking()[n - n_replace:]
        states[replaced] = importance.sample(n_replace, rng)
        if depths is not None:
            depths = depths.copy()
            depths[replaced] = np.nan
    return Ensemble(states, np.zeros(n), np.full(n, 1.0 / n), depths=depths, depth_key=ens.depth_key)


def posterior_summary(ens: Ensemble, f: Optional[float] = None) -> PosteriorSummary:
    """가중 평균, 공분산, 최대 가중 입자 (f가 주어지면 잔류 집합 평균 포함)"""
    if ens.n == 0:
        raise DegenerateInputError("빈 앙상블입니다")
    w = ens.norm_weights
    mean = np.average(ens.states, axis=0, weights=w)
    centered = ens.states - mean
    covariance = (centered * w[:, None]).T @ centered
    retained_mean = None
    if f is not None:
        x, y = ens.states[retained_indices(ens, f), :2].mean(axis=0)
        retained_mean = Point2(float(x), float(y))
    return PosteriorSummary(
        mean=Particle.from_array(mean),
        covariance=covariance,
        map_particle=Particle.from_array(ens.states[ens.ranking()[0]]),
        ess=effective_sample_size(ens),
        retained_mean=retained_mean,
    )


def cluster_radius(ens: Ensemble, f: float) -> float:
    """경계 입자와 상위 (1-f) 입자 집합의 (비가중) 위치 평균 사이 거리"""
    if ens.n < 2:
        raise DegenerateInputError(f"r_k에는 2개 이상의 입자가 필요합니다: {ens.n}")
    _check_fraction(f)
    n_replace = math.floor(f * ens.n)
    if n_replace == 0:
        raise ConfigError(f"floor(f·N) = 0이면 경계 입자가 없습니다 (f={f}, N={ens.n})",
                          field="resample_fraction")
    order = ens.ranking()
    n_keep = ens.n - n_replace
    centre = ens.states[order[:n_keep], :2].mean(axis=0)
    boundary = ens.states[order[n_keep], :2]
    return float(np.linalg.norm(boundary - centre))


def _importance_stream(prior: PriorSpec, streams: Dict[str, RandomStream]) -> RandomStream:
    return streams["kde"] if prior.kind == "kde" else streams["resample"]


FrameSource = Callable[[int, List[DetectorSpec]], MeasurementFrame]
Mover = Callable[[int, PosteriorSummary, List[DetectorSpec]], List[DetectorSpec]]


def filter_loop(scenario,
                n_frames: int,
                next_frame: FrameSource,
                options: Optional[RunOptions] = None,
                streams: Optional[Dict[str, RandomStream]] = None,
                mover: Optional[Mover] = None,
                importance_kind: Optional[str] = None) -> RunResult:
    """프레임 공급자와 (선택적) 검출기 이동 훅을 받는 공통 SIR 루프"""
    options = options or RunOptions()
    streams = streams or make_streams(scenario.seed)
    if n_frames < 1:
        raise DataError("필터에는 1개 이상의 프레임이 필요합니다")
    kind = importance_kind or scenario.prior
    if kind not in PRIOR_KINDS:
        raise ConfigError(f"알 수 없는 prior 종류: {kind}", field="prior")
    f = scenario.resample_fraction
    _check_fraction(f)

    scene = scenario.scene
    dets = list(scenario.detectors)
    importance = geometric_prior(kind, scene, dets)
    ens = init_ensemble(importance, scenario.n_particles, streams["init"])

    history: List[Ensemble] = []
    r_series: List[float] = []
    summaries: List[PosteriorSummary] = []
    detector_history: List[np.ndarray] = []

    for k in range(1, n_frames + 1):
        frame = next_frame(k, dets)
        detector_history.append(detector_arrays(dets)[0])
        ens = compute_log_weights(ens, frame, dets, scene, scenario.model, scenario.likelihood,
                                  options.include_background)
        ens = normalize_weights(ens, step=k)

        summary = posterior_summary(ens, f)
        summary.step = k
        summary.r_k = cluster_radius(ens, f)
        summaries.append(summary)
        r_series.append(summary.r_k)
        if options.keep_history or k == n_frames:
            history.append(replace(ens, depths=None, depth_key=None))
        logger.debug("step %d: mean=(%.2f, %.2f) r_k=%.3f ess=%.1f",
                     k, summary.mean.x, summary.mean.y, summary.r_k, summary.ess)

        if kind == "kde" and k >= options.kde_start and (k - options.kde_start) % options.kde_cadence == 0:
            support = ens.states[retained_indices(ens, f)]
            importance = PriorSpec.from_kde(scene, kde_fit(support, scene))
            logger.debug("step %d: KDE 중요도 분포 갱신 (지지점 %d개)", k, len(support))

        ens = resample_sort_replace(ens, f, importance, _importance_stream(importance, streams))
        if mover is not None:
            dets = mover(k, summary, dets)

    return RunResult(
        ensemble_history=history,
        r_series=r_series,
        summary_series=summaries,
        final_ensemble=ens,
        detector_history=detector_history if mover is not None else None,
        detector_ids=[det.id for det in scenario.detectors],
    )


def run_sir(scenario,
            frames: Sequence[MeasurementFrame],
            options: Optional[RunOptions] = None,
            streams: Optional[Dict[str, RandomStream]] = None) -> RunResult:
    """고정 검출기에서 주어진 프레임들로 SIR 필터 실행"""
    frames = list(frames)
    if not frames:
        raise DataError("필터에는 1개 이상의 프레임이 필요합니다")
    return filter_loop(scenario, len(frames), lambda k, dets: frames[k - 1], options, streams)
