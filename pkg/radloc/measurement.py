# radloc/measurement.py - 관측 시뮬레이션과 배경 처리
"""
측정 프레임 생성 및 IRSS 방식 배경 처리

- simulate_observation: y_i ~ Poisson(u_i(q0) + B_i·Δt_i)
- subtract_background: 배경 Poisson 표본을 빼고 음수는 0으로
- augment_measurements: 평균 응답으로부터 Poisson 증강 프레임 생성
- 21-bin 스펙트럼 → 광전 피크(bin 12) 또는 전체 합
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .detector import DetectorSpec, ForwardModel, Particle, detector_arrays, expected_counts
from .errors import ConfigError, DataError
from .geometry import Scene

N_SPECTRAL_BINS = 21
# 세슘-137 광전 피크 (621-704 keV), 1부터 센 번호
PHOTOPEAK_BIN = 12


class BinMode(str, Enum):
    BIN12 = "bin12"
    TOTAL = "total"


@dataclass(frozen=True)
class MeasurementFrame:
    """시각 k의 검출기별 계수 벡터"""

    time_index: int
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise DataError(f"프레임 {self.time_index}: 계수는 음수가 될 수 없습니다")
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return len(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)


def reduce_spectrum(bins: Sequence[int], mode: Union[BinMode, str] = BinMode.BIN12) -> int:
    """21-bin 스펙트럼을 하나의 계수로 축약"""
    if len(bins) != N_SPECTRAL_BINS:
        raise DataError(f"스펙트럼 bin 개수는 {N_SPECTRAL_BINS}이어야 합니다: {len(bins)}")
    if BinMode(mode) is BinMode.BIN12:
        return int(bins[PHOTOPEAK_BIN - 1])
    return int(sum(bins))


def _poisson_frame(means: np.ndarray, rng, time_index: int) -> MeasurementFrame:
    if not np.all(np.isfinite(means)):
        raise DataError(f"프레임 {time_index}: Poisson 평균에 비유한값이 있습니다")
    return MeasurementFrame(time_index, tuple(rng.poisson(means)))


def simulate_observation(source: Optional[Particle],
                         dets: Sequence[DetectorSpec],
                         scene: Scene,
                         model: Union[ForwardModel, str],
                         rng,
                         time_index: int = 1) -> MeasurementFrame:
    """선원 q0에 대한 검출기 관측 한 프레임 (source가 None이면 배경만)"""
    _, _, background = detector_arrays(dets)
    means = background.copy()
    if source is not None:
        means = means + expected_counts(source.as_array(), dets, scene, model)[0]
    return _poisson_frame(means, rng, time_index)


def simulate_frames(source: Optional[Particle],
                    dets: Sequence[DetectorSpec],
                    scene: Scene,
                    model: Union[ForwardModel, str],
                    n_frames: int,
                    rng) -> List[MeasurementFrame]:
    """고정 검출기 배치에서 n_frames개 프레임 생성"""
    if n_frames < 1:
        raise ConfigError(f"프레임 수는 1 이상이어야 합니다: {n_frames}", field="n_frames")
    _, _, background = detector_arrays(dets)
    means = background.copy()
    if source is not None:
        means = means + expected_counts(source.as_array(), dets, scene, model)[0]
    return [_poisson_frame(means, rng, k) for k in range(1, n_frames + 1)]


def subtract_background(raw: MeasurementFrame, bg_means: Sequence[float], rng) -> MeasurementFrame:
    """배경 Poisson 표본을 빼고 음수는 0으로 설정"""
    bg_means = np.asarray(bg_means, dtype=float)
    if bg_means.shape != (len(raw),):
        raise DataError(f"배경 평균 길이 {bg_means.size}와 프레임 길이 {len(raw)}가 다릅니다")
    if np.any(bg_means < 0) or not np.all(np.isfinite(bg_means)):
        raise DataError("배경 평균은 음수가 될 수 없습니다")
    draws = rng.poisson(bg_means)
    return MeasurementFrame(raw.time_index, tuple(np.maximum(raw.as_array() - draws, 0)))


def augment_measurements(base_means: Sequence[float], n_frames: int, rng) -> List[MeasurementFrame]:
    """평균 응답 base_means로부터 독립 Poisson 프레임 n_frames개"""
    base_means = np.asarray(base_means, dtype=float)
    if n_frames < 1:
        raise ConfigError(f"증강 프레임 수는 1 이상이어야 합니다: {n_frames}", field="augment")
    if np.any(base_means < 0) or not np.all(np.isfinite(base_means)):
        raise DataError("증강 평균은 음수가 될 수 없습니다")
    return [_poisson_frame(base_means, rng, k) for k in range(1, n_frames + 1)]


def mean_counts(frames: Sequence[MeasurementFrame]) -> np.ndarray:
    """프레임들의 검출기별 시간 평균"""
    if not frames:
        raise DataError("평균을 낼 프레임이 없습니다")
    return np.mean([f.as_array() for f in frames], axis=0)
