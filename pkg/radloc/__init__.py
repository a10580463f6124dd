# radloc/__init__.py - 방사선 선원 위치 추정 패키지
"""
radloc - SIR 입자 필터 기반 방사선 점선원 위치 추정

주요 기능:
- 검출기 네트워크 계수로부터 선원 위치 (x, y)와 세기 I 추정
- 자유 공간 역제곱(QA) 모델과 건물 감쇠 광선 추적(RT) 모델
- 정렬-교체 재표본화, 볼록 껍질/KDE 중요도 분포
- 이동형 검출기 (사후 평균 추적, 건물 회피)
- MSE 스케일링, 군집 반경 r_k 단조성 진단
"""

# 기하 (geometry.py)
from .geometry import (
    BuildingPolygon,
    ConvexHull,
    Point2,
    Scene,
    chord_lengths,
    convex_hull,
    point_in_hull,
    sample_uniform_hull,
)

# 검출기 모델 (detector.py)
from .detector import (
    DetectorSpec,
    ForwardModel,
    LikelihoodMode,
    Particle,
    log_likelihood,
    mci_to_bq,
    qa_response,
    rt_response,
    uci_to_bq,
)

# 관측 (measurement.py, rng.py)
from .measurement import (
    BinMode,
    MeasurementFrame,
    augment_measurements,
    simulate_observation,
    subtract_background,
)
from .rng import RandomStream, make_streams, named_stream

# 필터 (particle_filter.py, priors.py)
from .priors import KdeModel, PriorSpec, kde_fit, kde_sample
from .particle_filter import (
    Ensemble,
    PosteriorSummary,
    RunOptions,
    RunResult,
    cluster_radius,
    compute_log_weights,
    effective_sample_size,
    init_ensemble,
    normalize_weights,
    posterior_summary,
    resample_sort_replace,
    run_sir,
)

# 이동형 검출기 (mobility.py)
from .mobility import MoveConfig, move_detector, run_sir_mobile

# 진단 (diagnostics.py)
from .diagnostics import (
    ConvergenceReport,
    localization_error,
    mse_slope_experiment,
    radius_monotonicity_stat,
)

# 데이터 입출력 (scenario.py, dataio.py, presets.py)
from .scenario import Scenario, load_scenario, save_scenario
from .dataio import export_results, ingest_counts, match_background, write_counts
from .presets import get_preset, get_presets, resolve_scenario

# 예외 (errors.py)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    DegenerateLikelihoodError,
    RadlocError,
)

# 매니저 (manager.py)
from .manager import get_manager, get_manager_status, is_manager_ready

__version__ = "1.0.0"
__title__ = "radloc - SIR particle filter radiation source localization"
__description__ = "검출기 네트워크 계수 기반 방사선 점선원 위치 추정 (SIR 입자 필터)"

__all__ = [
    # 기하
    'BuildingPolygon', 'ConvexHull', 'Point2', 'Scene',
    'chord_lengths', 'convex_hull', 'point_in_hull', 'sample_uniform_hull',
    # 검출기 모델
    'DetectorSpec', 'ForwardModel', 'LikelihoodMode', 'Particle',
    'log_likelihood', 'mci_to_bq', 'qa_response', 'rt_response', 'uci_to_bq',
    # 관측
    'BinMode', 'MeasurementFrame', 'augment_measurements', 'simulate_observation', 'subtract_background',
    'RandomStream', 'make_streams', 'named_stream',
    # 필터
    'KdeModel', 'PriorSpec', 'kde_fit', 'kde_sample',
    'Ensemble', 'PosteriorSummary', 'RunOptions', 'RunResult',
    'cluster_radius', 'compute_log_weights', 'effective_sample_size', 'init_ensemble',
    'normalize_weights', 'posterior_summary', 'resample_sort_replace', 'run_sir',
    # 이동형 검출기
    'MoveConfig', 'move_detector', 'run_sir_mobile',
    # 진단
    'ConvergenceReport', 'localization_error', 'mse_slope_experiment', 'radius_monotonicity_stat',
    # 데이터 입출력
    'Scenario', 'load_scenario', 'save_scenario',
    'export_results', 'ingest_counts', 'match_background', 'write_counts',
    'get_preset', 'get_presets', 'resolve_scenario',
    # 예외
    'ConfigError', 'DataError', 'DegenerateInputError', 'DegenerateLikelihoodError', 'RadlocError',
    # 매니저
    'get_manager', 'get_manager_status', 'is_manager_ready',
]
