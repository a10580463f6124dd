# radloc/diagnostics.py - 수렴 진단과 위치 오차
"""
경험적 수렴 점검

- localization_error: 사후 평균과 실제 선원 사이 (x, y) 거리
- mse_slope_experiment: N에 따른 MSE의 log-log 기울기 (≈ -1 기대)
- radius_monotonicity_stat: r_k가 줄어드는 연속 쌍의 비율
"""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .detector import Particle
from .errors import ConfigError, DegenerateInputError
from .measurement import MeasurementFrame, simulate_frames
from .particle_filter import PosteriorSummary, RunOptions, run_sir
from .rng import STREAM_IDS, RandomStream, make_streams, named_stream

logger = logging.getLogger("radloc.diagnostics")

# 보정용 임계값 (보고서에 함께 기록)
SLOPE_TARGET = -1.0
SLOPE_TOLERANCE = 0.3
MONOTONE_THRESHOLD = 0.9
DEFAULT_TAIL_FRACTION = 0.5

TestFunction = Callable[[np.ndarray], np.ndarray]


@dataclass
class ConvergenceReport:
    """MSE 스케일링과 r_k 단조성 보고서"""

    n_values: List[int]
    mse_values: List[float]
    loglog_slope: float
    radius_monotone_fraction: Optional[float] = None
    final_error_m: Optional[float] = None
    reference_n: int = 0
    seeds: int = 0
    n_steps: int = 1
    phi: str = ""
    tail_fraction: float = DEFAULT_TAIL_FRACTION
    slope_tolerance: float = SLOPE_TOLERANCE
    monotone_threshold: float = MONOTONE_THRESHOLD
    r_series: List[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.n_values) != len(self.mse_values):
            raise DegenerateInputError("n_values와 mse_values 길이가 다릅니다")

    @property
    def slope_ok(self) -> bool:
        return bool(np.isfinite(self.loglog_slope)) and abs(self.loglog_slope - SLOPE_TARGET) <= self.slope_tolerance

    @property
    def monotone_ok(self) -> Optional[bool]:
        if self.radius_monotone_fraction is None:
            return None
        return bool(self.radius_monotone_fraction >= self.monotone_threshold)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["loglog_slope"] = None if not np.isfinite(self.loglog_slope) else self.loglog_slope
        data["slope_ok"] = self.slope_ok
        data["monotone_ok"] = self.monotone_ok
        return data


def localization_error(summary: PosteriorSummary, truth: Particle) -> float:
    """사후 평균과 실제 선원의 (x, y) 유클리드 거리"""
    return float(math.hypot(summary.mean.x - truth.x, summary.mean.y - truth.y))


def radius_monotonicity_stat(r_series: Sequence[float], tail_fraction: float = DEFAULT_TAIL_FRACTION) -> float:
    """후반 tail_fraction 구간에서 r_{k+1} ≤ r_k 인 연속 쌍의 비율"""
    if not 0.0 < tail_fraction <= 1.0:
        raise ConfigError(f"tail_fraction은 (0, 1] 범위여야 합니다: {tail_fraction}", field="tail")
    r = np.asarray(r_series, dtype=float)
    tail = r[len(r) - math.ceil(tail_fraction * len(r)):]
    if len(tail) < 2:
        raise DegenerateInputError(f"꼬리 구간에 2개 이상의 r_k가 필요합니다: {len(tail)}")
    return float(np.mean(np.diff(tail) <= 0.0))


def loglog_slope(n_values: Sequence[int], mse_values: Sequence[float]) -> float:
    """ln MSE 대 ln N 최소제곱 기울기 (MSE가 0이면 nan)"""
    mse = np.asarray(mse_values, dtype=float)
    if len(mse) < 2 or np.any(mse <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(mse), 1)
    return float(slope)


def _seed_streams(seed: int, index: int) -> Dict[str, RandomStream]:
    """반복 index의 입자 스트림 (관측 스트림과 독립)"""
    return {name: stream.child(index) for name, stream in make_streams(seed).items()}


def _reference_streams(seed: int) -> Dict[str, RandomStream]:
    reference = STREAM_IDS["reference"]
    return {name: RandomStream(seed, reference, (stream_id,)) for name, stream_id in STREAM_IDS.items()}


def _estimate(scenario, frames, n: int, test_function: TestFunction, options: RunOptions,
              streams: Dict[str, RandomStream]) -> float:
    """⟨π^N, φ⟩ = Σ φ(p_i)·w_i / Σ w_i (마지막 프레임의 재표본화 직전 앙상블)"""
    result = run_sir(replace(scenario, n_particles=n), frames, replace(options, keep_history=False), streams)
    ens = result.ensemble_history[-1]
    values = np.asarray(test_function(ens.states), dtype=float)
    if values.shape != (ens.n,) or not np.all(np.isfinite(values)):
        raise ConfigError("시험 함수가 유계가 아니거나 입자별 실수를 반환하지 않습니다", field="phi")
    return float(np.average(values, weights=ens.norm_weights))


def mse_slope_experiment(scenario,
                         test_function: TestFunction,
                         n_values: Sequence[int],
                         reference_n: int,
                         seeds: int,
                         frames: Optional[Sequence[MeasurementFrame]] = None,
                         n_steps: int = 1,
                         options: Optional[RunOptions] = None,
                         tail_fraction: float = DEFAULT_TAIL_FRACTION,
                         trajectory: bool = True,
                         phi_name: str = "") -> ConvergenceReport:
    """N별 MSE (시드 평균)와 log-log 기울기, 그리고 전체 실행의 r_k 단조성

    관측 프레임은 한 번만 생성해 고정하고 시드마다 입자 스트림만 바꿉니다.
    기준 사후 분포는 reference_n개 입자의 별도 실행으로 대신합니다.
    """
    n_values = [int(n) for n in n_values]
    if not n_values or min(n_values) < 2:
        raise ConfigError(f"N 값은 모두 2 이상이어야 합니다: {n_values}", field="n")
    if reference_n <= max(n_values):
        raise ConfigError(f"reference_n({reference_n})은 최대 N({max(n_values)})보다 커야 합니다",
                          field="reference_n")
    if seeds < 1:
        raise ConfigError(f"시드 수는 1 이상이어야 합니다: {seeds}", field="seeds")
    if n_steps < 1:
        raise ConfigError(f"n_steps는 1 이상이어야 합니다: {n_steps}", field="n_steps")
    options = options or RunOptions()

    n_needed = max(n_steps, scenario.n_frames if trajectory else n_steps)
    if frames is None:
        if scenario.source_truth is None:
            raise ConfigError("관측 프레임이 없으면 선원(source)이 필요합니다", field="source")
        frames = simulate_frames(scenario.source_truth, scenario.detectors, scenario.scene, scenario.model,
                                 n_needed, named_stream(scenario.seed, "measurement"))
    frames = list(frames)
    if len(frames) < n_steps:
        raise ConfigError(f"프레임 {len(frames)}개로는 n_steps={n_steps}를 실행할 수 없습니다", field="n_steps")
    window = frames[:n_steps]

    reference = _estimate(scenario, window, reference_n, test_function, options, _reference_streams(scenario.seed))
    logger.info("기준 추정치 (N=%d): %.6g", reference_n, reference)

    mse_values = []
    for n in n_values:
        errors = [
            (_estimate(scenario, window, n, test_function, options, _seed_streams(scenario.seed, s)) - reference) ** 2
            for s in range(seeds)
        ]
        mse_values.append(float(np.mean(errors)))
        logger.info("N=%d: MSE=%.6g", n, mse_values[-1])

    report = ConvergenceReport(
        n_values=n_values,
        mse_values=mse_values,
        loglog_slope=loglog_slope(n_values, mse_values),
        reference_n=int(reference_n),
        seeds=int(seeds),
        n_steps=int(n_steps),
        phi=phi_name,
        tail_fraction=tail_fraction,
    )

    if trajectory:
        result = run_sir(scenario, frames[:scenario.n_frames], replace(options, keep_history=False),
                         make_streams(scenario.seed))
        report.r_series = list(result.r_series)
        if math.ceil(tail_fraction * len(result.r_series)) >= 2:
            report.radius_monotone_fraction = radius_monotonicity_stat(result.r_series, tail_fraction)
        if scenario.source_truth is not None:
            report.final_error_m = localization_error(result.final_summary, scenario.source_truth)
    return report


def format_report(report: ConvergenceReport) -> str:
    """사람이 읽을 수 있는 진단 보고서"""
    lines = [
        f"phi: {report.phi or '-'}",
        f"reference_n: {report.reference_n}  seeds: {report.seeds}  n_steps: {report.n_steps}",
        "N        MSE",
    ]
    lines += [f"{n:<8d} {mse:.6e}" for n, mse in zip(report.n_values, report.mse_values)]
    slope = "nan" if not np.isfinite(report.loglog_slope) else f"{report.loglog_slope:.3f}"
    lines.append(f"loglog_slope: {slope} (target {SLOPE_TARGET:+.1f} ± {report.slope_tolerance})")
    if report.radius_monotone_fraction is not None:
        lines.append(f"radius_monotone_fraction: {report.radius_monotone_fraction:.3f} "
                     f"(tail {report.tail_fraction}, threshold {report.monotone_threshold})")
    if report.final_error_m is not None:
        lines.append(f"final_error_m: {report.final_error_m:.3f}")
    return "\n".join(lines)
