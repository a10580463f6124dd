# radloc/detector.py - 검출기 순방향 모델과 우도 커널
"""
검출기 응답 모델

- QA (quadratic attenuation): I·ε·A·Δt / (4π d²)
- RT (ray tracing): QA × exp(-Σ ℓ_h/λ_h)
- 로그 우도: 독립 Poisson 또는 공통 σ의 Gaussian
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DataError, DegenerateInputError
from .geometry import Point2, Scene, optical_depths

# 입자가 검출기 위에 놓일 때의 거리 하한 (m)
D_FLOOR = 0.1
# ln(u) 안의 기대 계수 하한
U_FLOOR = 1e-12
# 1 Ci = 3.7e10 Bq
BQ_PER_CI = 3.7e10


def uci_to_bq(uci: float) -> float:
    """µCi → Bq"""
    return uci * 1e-6 * BQ_PER_CI


def mci_to_bq(mci: float) -> float:
    """mCi → Bq"""
    return mci * 1e-3 * BQ_PER_CI


class ForwardModel(str, Enum):
    QA = "qa"
    RT = "rt"


@dataclass(frozen=True)
class DetectorSpec:
    """검출기 위치, 면적, 효율, 측정 시간, 배경 계수율"""

    position: Point2
    area: float
    efficiency: float
    dwell: float
    background_rate: float = 0.0
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "position", Point2(float(self.position[0]), float(self.position[1])))
        label = self.id or "detector"
        if not all(np.isfinite(self.position)):
            raise ConfigError("검출기 위치가 유한하지 않습니다", field=f"{label}.position")
        if not self.area > 0:
            raise ConfigError(f"면적은 양수여야 합니다: {self.area}", field=f"{label}.area")
        if not 0 < self.efficiency <= 1:
            raise ConfigError(f"효율은 (0, 1] 범위여야 합니다: {self.efficiency}", field=f"{label}.efficiency")
        if not self.dwell > 0:
            raise ConfigError(f"측정 시간은 양수여야 합니다: {self.dwell}", field=f"{label}.dwell")
        if not self.background_rate >= 0:
            raise ConfigError(f"배경 계수율은 음수가 될 수 없습니다: {self.background_rate}",
                              field=f"{label}.background_rate")

    @property
    def background_mean(self) -> float:
        """프레임당 배경 평균 B·Δt"""
        return self.background_rate * self.dwell

    def moved_to(self, position: Sequence[float]) -> "DetectorSpec":
        return replace(self, position=Point2(float(position[0]), float(position[1])))


@dataclass(frozen=True)
class Particle:
    """선원 가설 (x, y, 세기)"""

    x: float
    y: float
    intensity: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.intensity)):
            raise DegenerateInputError(f"입자 좌표/세기에 비유한값이 있습니다: {self}")
        if not self.intensity > 0:
            raise ConfigError(f"세기는 양수여야 합니다: {self.intensity}", field="intensity")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.intensity], dtype=float)

    @classmethod
    def from_array(cls, row: Sequence[float]) -> "Particle":
        return cls(float(row[0]), float(row[1]), float(row[2]))


@dataclass(frozen=True)
class LikelihoodMode:
    """우도 종류: poisson 또는 gaussian(sigma)"""

    kind: str = "poisson"
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("poisson", "gaussian"):
            raise ConfigError(f"알 수 없는 우도 종류: {self.kind}", field="likelihood")
        if self.kind == "gaussian" and not (self.sigma is not None and self.sigma > 0):
            raise ConfigError(f"Gaussian 우도의 sigma는 양수여야 합니다: {self.sigma}", field="likelihood")

    @classmethod
    def poisson(cls) -> "LikelihoodMode":
        return cls("poisson")

    @classmethod
    def gaussian(cls, sigma: float) -> "LikelihoodMode":
        return cls("gaussian", float(sigma))

    def __str__(self) -> str:
        return self.kind if self.kind == "poisson" else f"gaussian:{self.sigma!r}"

    @classmethod
    def parse(cls, text: str) -> "LikelihoodMode":
        """"poisson" 또는 "gaussian:SIGMA" 문자열 해석"""
        kind, _, sigma = str(text).strip().lower().partition(":")
        if kind == "poisson" and not sigma:
            return cls.poisson()
        if kind == "gaussian":
            try:
                return cls.gaussian(float(sigma))
            except ValueError:
                raise ConfigError(f"Gaussian sigma를 해석할 수 없습니다: {text!r}", field="likelihood") from None
        raise ConfigError(f"우도 형식은 poisson 또는 gaussian:SIGMA 입니다: {text!r}", field="likelihood")


def detector_arrays(detectors: Sequence[DetectorSpec]):
    """검출기 목록 → (위치 (d,2), 감도 ε·A·Δt (d,), 배경 평균 (d,))"""
    positions = np.array([det.position for det in detectors], dtype=float).reshape(-1, 2)
    gain = np.array([det.efficiency * det.area * det.dwell for det in detectors], dtype=float)
    background = np.array([det.background_mean for det in detectors], dtype=float)
    return positions, gain, background


def expected_counts(states: np.ndarray,
                    detectors: Sequence[DetectorSpec],
                    scene: Optional[Scene] = None,
                    model: Union[ForwardModel, str] = ForwardModel.QA,
                    include_background: bool = False,
                    depths: Optional[np.ndarray] = None) -> np.ndarray:
    """입자 상태 (N,3)에 대한 기대 계수 (N,d)

    depths가 주어지면 RT 광학 두께 Σℓ/λ 계산을 건너뜁니다.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if not np.all(np.isfinite(states)):
        raise DegenerateInputError("입자 상태에 비유한값이 있습니다")
    model = ForwardModel(model)
    positions, gain, background = detector_arrays(detectors)

    delta = states[:, None, :2] - positions[None, :, :]
    dist2 = np.maximum(np.sum(delta * delta, axis=-1), D_FLOOR * D_FLOOR)
    counts = states[:, 2:3] * gain[None, :] / (4.0 * np.pi * dist2)

    if model is ForwardModel.RT:
        if depths is None:
            if scene is None:
                raise ConfigError("RT 모델에는 장면(scene)이 필요합니다", field="model")
            depths = optical_depths(states[:, :2], positions, scene)
        counts = counts * np.exp(-depths)
    if include_background:
        counts = counts + background[None, :]
    return counts


def qa_response(p: Particle, det: DetectorSpec) -> float:
    """자유 공간 역제곱 응답 (배경 제외)"""
    return float(expected_counts(p.as_array(), [det], model=ForwardModel.QA)[0, 0])


def rt_response(p: Particle, det: DetectorSpec, scene: Scene) -> float:
    """건물 감쇠를 포함한 광선 추적 응답 (배경 제외)"""
    return float(expected_counts(p.as_array(), [det], scene, model=ForwardModel.RT)[0, 0])


def _observed_counts(observed) -> np.ndarray:
    counts = getattr(observed, "counts", observed)
    return np.asarray(counts, dtype=float).reshape(-1)


def log_likelihood(observed, expected, mode: LikelihoodMode = LikelihoodMode()) -> Union[float, np.ndarray]:
    """관측 y와 기대 u의 로그 우도

    expected는 (d,) 또는 (N, d); (N, d)이면 입자별 값 (N,)을 반환합니다.
    """
    y = _observed_counts(observed)
    u = np.asarray(expected, dtype=float)
    if u.shape[-1] != y.shape[0]:
        raise DataError(f"관측 길이 {y.shape[0]}와 기대값 길이 {u.shape[-1]}가 다릅니다")
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise DataError("관측 계수는 음수가 될 수 없습니다")

    if mode.kind == "poisson":
        if np.any(y != np.floor(y)):
            raise DataError("Poisson 우도의 관측 계수는 정수여야 합니다")
        u = np.maximum(u, U_FLOOR)
        terms = y * np.log(u) - u - gammaln(y + 1.0)
        result = np.sum(terms, axis=-1)
    else:
        sigma2 = mode.sigma * mode.sigma
        ss = np.sum((y - u) ** 2, axis=-1)
        result = -0.5 * y.shape[0] * np.log(2.0 * np.pi * sigma2) - ss / (2.0 * sigma2)

    if np.ndim(result) == 0:
        return float(result)
    return result
