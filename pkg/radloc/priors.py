# radloc/priors.py - 사전 분포와 KDE 중요도 분포
"""
입자 초기화/재표본화에 쓰이는 분포

- box: 영역 경계 × 세기 범위 위 균일 분포
- hull: 검출기 볼록 껍질 × 세기 범위 위 균일 분포
- kde: (x, y, ln I) 공간의 Gaussian 곱 커널 KDE
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.neighbors import KernelDensity

from .detector import DetectorSpec, Particle
from .errors import ConfigError, DegenerateInputError
from .geometry import ConvexHull, Scene, convex_hull, sample_uniform_box, sample_uniform_hull_batch

logger = logging.getLogger("radloc.priors")

PRIOR_KINDS = ("box", "hull", "kde")

# 위치 bandwidth 하한 (m)
KDE_POSITION_FLOOR = 0.1
# ln I bandwidth 하한 = ln 세기 범위의 1%
KDE_INTENSITY_FLOOR_FRACTION = 0.01
# 기각 샘플링 포기 조건
KDE_MIN_ACCEPTANCE = 1e-3
KDE_MIN_TRIALS = 10_000


@dataclass
class KdeModel:
    """KDE 지지점 (x, y, ln I)과 차원별 bandwidth (m, m, ln Bq)"""

    support: np.ndarray
    bandwidths: np.ndarray
    estimator: KernelDensity = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        self.support = np.atleast_2d(np.asarray(self.support, dtype=float))
        self.bandwidths = np.asarray(self.bandwidths, dtype=float)
        if len(self.support) < 1:
            raise DegenerateInputError("KDE 지지점이 없습니다")
        if self.bandwidths.shape != (3,) or np.any(self.bandwidths <= 0):
            raise DegenerateInputError(f"bandwidth는 양수 3개여야 합니다: {self.bandwidths}")
        if self.estimator is None:
            # 표준화된 좌표에서 bandwidth=1 커널 = 차원별 bandwidth 곱 커널
            self.estimator = KernelDensity(bandwidth=1.0, kernel="gaussian").fit(self.support / self.bandwidths)

    @property
    def support_points(self):
        return [Particle(x, y, float(np.exp(log_i))) for x, y, log_i in self.support]

    def __len__(self) -> int:
        return len(self.support)


def _as_states(particles: Union[np.ndarray, Sequence[Particle]]) -> np.ndarray:
    if isinstance(particles, np.ndarray):
        return np.atleast_2d(particles.astype(float))
    return np.array([p.as_array() for p in particles], dtype=float).reshape(-1, 3)


def kde_fit(particles: Union[np.ndarray, Sequence[Particle]], scene: Optional[Scene] = None) -> KdeModel:
    """Scott 규칙 bandwidth h = σ̂·n^(-1/7)로 KDE 적합 (하한 적용)"""
    states = _as_states(particles)
    if len(states) < 1:
        raise DegenerateInputError("KDE에는 1개 이상의 입자가 필요합니다")
    if np.any(states[:, 2] <= 0):
        raise DegenerateInputError("KDE 입자 세기는 양수여야 합니다")
    support = np.column_stack([states[:, :2], np.log(states[:, 2])])

    n = len(support)
    sigma = support.std(axis=0, ddof=1) if n > 1 else np.zeros(3)
    bandwidths = sigma * n ** (-1.0 / (3 + 4))

    if scene is not None:
        i_min, i_max = scene.intensity_range
        log_floor = KDE_INTENSITY_FLOOR_FRACTION * (np.log(i_max) - np.log(i_min))
    else:
        log_floor = KDE_INTENSITY_FLOOR_FRACTION
    floors = np.array([KDE_POSITION_FLOOR, KDE_POSITION_FLOOR, log_floor])
    bandwidths = np.maximum(bandwidths, floors)
    logger.debug("KDE 적합: n=%d, bandwidths=%s", n, np.round(bandwidths, 4).tolist())
    return KdeModel(support, bandwidths)


def kde_sample(kde: KdeModel, n: int, scene: Scene, rng) -> np.ndarray:
    """KDE에서 n개 입자 상태 (n, 3) 추출, 영역/세기 범위 밖은 기각 후 재추출"""
    if n < 1:
        raise ConfigError(f"표본 수는 1 이상이어야 합니다: {n}", field="n")
    log_min, log_max = np.log(scene.intensity_range)
    accepted = []
    have = drawn = 0
    while have < n:
        batch = max(2 * (n - have), 64)
        draws = kde.estimator.sample(batch, random_state=rng.sklearn_seed()) * kde.bandwidths
        drawn += batch
        ok = scene.contains_xy(draws[:, :2]) & (draws[:, 2] >= log_min) & (draws[:, 2] <= log_max)
        accepted.append(draws[ok])
        have += int(ok.sum())
        if drawn >= KDE_MIN_TRIALS and have / drawn < KDE_MIN_ACCEPTANCE:
            raise DegenerateInputError(
                f"KDE 질량이 영역 밖에 있습니다 (수락률 {have / drawn:.2e}, 시도 {drawn})")
    states = np.concatenate(accepted)[:n]
    states[:, 2] = np.exp(states[:, 2])
    return states


@dataclass
class PriorSpec:
    """입자 샘플링 분포: box / hull / kde"""

    kind: str
    scene: Scene
    hull: Optional[ConvexHull] = None
    kde: Optional[KdeModel] = None

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise ConfigError(f"알 수 없는 prior 종류: {self.kind}", field="prior")
        if self.kind == "hull" and self.hull is None:
            raise ConfigError("hull prior에는 볼록 껍질이 필요합니다", field="prior")
        if self.kind == "hull" and not self.hull.area > 0:
            raise DegenerateInputError("면적이 0인 볼록 껍질입니다")
        if self.kind == "kde" and self.kde is None:
            raise ConfigError("kde prior에는 KDE 모델이 필요합니다", field="prior")

    @classmethod
    def box(cls, scene: Scene) -> "PriorSpec":
        return cls("box", scene)

    @classmethod
    def from_hull(cls, scene: Scene, detectors: Sequence[DetectorSpec]) -> "PriorSpec":
        return cls("hull", scene, hull=convex_hull([det.position for det in detectors]))

    @classmethod
    def from_kde(cls, scene: Scene, kde: KdeModel) -> "PriorSpec":
        return cls("kde", scene, kde=kde)

    def sample(self, n: int, rng) -> np.ndarray:
        """상태 배열 (n, 3) = (x, y, I)"""
        if self.kind == "kde":
            return kde_sample(self.kde, n, self.scene, rng)
        if self.kind == "hull":
            xy = sample_uniform_hull_batch(self.hull, n, rng)
        else:
            xy = sample_uniform_box(self.scene.bounds, n, rng)
        i_min, i_max = self.scene.intensity_range
        return np.column_stack([xy, rng.uniform(i_min, i_max, n)])


def geometric_prior(kind: str, scene: Scene, detectors: Sequence[DetectorSpec]) -> PriorSpec:
    """box/hull/kde 설정값에 맞는 초기 분포 (kde는 KDE 적합 전까지 hull, 퇴화 시 box)"""
    if kind not in PRIOR_KINDS:
        raise ConfigError(f"알 수 없는 prior 종류: {kind}", field="prior")
    if kind == "box":
        return PriorSpec.box(scene)
    try:
        return PriorSpec.from_hull(scene, detectors)
    except DegenerateInputError:
        if kind == "hull":
            raise
        logger.warning("검출기 배치가 퇴화되어 box prior로 시작합니다")
        return PriorSpec.box(scene)
