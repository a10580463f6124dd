# radloc/manager.py - 실행 매니저 (CLI와 HTTP 서비스 공용)
"""
simulate / localize / replay / diagnose 실행을 묶는 매니저

모든 실행은 하나의 루트 시드에서 분기한 이름 붙은 스트림을 사용하고,
실행마다 JSON 실행 기록을 한 건 남깁니다.
"""

import json
import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Union

from utils.logging import append_json_to_file, make_run_record, run_log_path

from .dataio import align_frames, export_results, ingest_counts, match_background, write_counts
from .detector import LikelihoodMode
from .diagnostics import DEFAULT_TAIL_FRACTION, format_report, localization_error, mse_slope_experiment
from .errors import ConfigError, DataError, RadlocError
from .measurement import augment_measurements, mean_counts, simulate_frames, subtract_background
from .mobility import MoveConfig, run_sir_mobile
from .particle_filter import RunOptions, RunResult, run_sir
from .presets import get_preset_stats, get_presets, resolve_scenario
from .rng import make_streams
from .scenario import Scenario

logger = logging.getLogger("radloc.manager")

# 배경 전용 시뮬레이션 기본 길이 (초)
BACKGROUND_DURATION_S = 60.0


def apply_overrides(scenario: Scenario, overrides: Optional[Dict[str, Any]] = None) -> Scenario:
    """CLI/HTTP 덮어쓰기 값을 시나리오에 적용"""
    if not overrides:
        return scenario
    changes: Dict[str, Any] = {}
    for key in ("seed", "n_particles", "prior", "model", "bin_mode"):
        if overrides.get(key) is not None:
            changes[key] = overrides[key]
    if overrides.get("frames") is not None:
        changes["n_frames"] = overrides["frames"]
    if overrides.get("likelihood") is not None:
        changes["likelihood"] = LikelihoodMode.parse(overrides["likelihood"])

    mobility = overrides.get("mobility")
    if mobility == "off":
        changes["mobility"] = None
    elif mobility in ("mean-pursuit", "kde"):
        current = scenario.mobility or MoveConfig(cadence=3 if mobility == "kde" else 1)
        changes["mobility"] = replace(current, mode=mobility)
    elif mobility is not None:
        raise ConfigError(f"mobility는 off, mean-pursuit, kde 중 하나입니다: {mobility}", field="mobility")
    return replace(scenario, **changes)


def _output_file(out: Union[str, Path], default_name: str) -> Path:
    out = Path(out)
    if out.suffix.lower() == ".csv":
        return out
    return out / default_name


def _run_options(scenario: Scenario, include_background: bool) -> RunOptions:
    return RunOptions(include_background=include_background, kde_start=scenario.kde_start,
                      kde_cadence=scenario.kde_cadence)


class RunManager:
    """radloc 실행 매니저 클래스"""

    def __init__(self, run_log: Optional[str] = None):
        self.initialized = False
        self.run_log = run_log
        self.presets = None
        self.stats: Dict[str, Any] = {}
        self.runs = 0
        self.last_run: Optional[Dict[str, Any]] = None

    def initialize(self) -> bool:
        """매니저 초기화"""
        self.presets = get_presets()
        self.stats = get_preset_stats()
        self.initialized = True
        logger.debug("실행 매니저 초기화 완료")
        return True

    def is_ready(self) -> bool:
        return self.initialized and self.presets is not None

    def get_status(self) -> Dict[str, Any]:
        return {
            "initialized": self.initialized,
            "ready": self.is_ready(),
            "stats": self.stats,
            "runs": self.runs,
            "last_run": self.last_run,
            "timestamp": time.time(),
        }

    def load(self, name_or_path: Union[str, Path, Scenario], overrides: Optional[Dict[str, Any]] = None) -> Scenario:
        """내장 이름/파일 경로/Scenario 객체 → 덮어쓰기 적용된 Scenario"""
        scenario = name_or_path if isinstance(name_or_path, Scenario) else resolve_scenario(name_or_path)
        return apply_overrides(scenario, overrides)

    def _recorded(self, verb: str, scenario: Scenario, action: Callable[[], Dict[str, Any]]) -> Dict[str, Any]:
        """실행하고 성공/실패 기록을 남김"""
        started = time.perf_counter()
        try:
            outcome = action()
        except Exception as e:
            self._append(make_run_record(verb, scenario.name, scenario.seed, scenario.n_particles,
                                         scenario.n_frames, started=started, success=False,
                                         error=f"{type(e).__name__}: {e}"))
            raise
        record = make_run_record(verb, scenario.name, scenario.seed, scenario.n_particles,
                                 outcome.get("frames", scenario.n_frames), outcome.get("final_error"),
                                 started=started)
        self._append(record)
        self.runs += 1
        self.last_run = record
        return outcome

    def _append(self, record: Dict[str, Any]) -> None:
        path = self.run_log or run_log_path()
        try:
            append_json_to_file(path, record)
        except OSError as e:
            logger.warning("실행 기록을 저장하지 못했습니다 (%s): %s", path, e)

    # --- simulate -----------------------------------------------------------

    def simulate(self, scenario: Scenario, out: Union[str, Path], background_only: bool = False,
                 n_frames: Optional[int] = None) -> Dict[str, Any]:
        """관측 프레임을 생성해 계수 CSV로 저장"""
        def action():
            streams = make_streams(scenario.seed)
            if background_only:
                dets = scenario.background_detectors or scenario.detectors
                frames_needed = n_frames or max(1, math.ceil(BACKGROUND_DURATION_S / dets[0].dwell))
                source = None
                path = _output_file(out, "background.csv")
                stream = streams["background"]
            else:
                if scenario.source_truth is None:
                    raise ConfigError("시뮬레이션에는 선원(source)이 필요합니다", field="source")
                dets = scenario.detectors
                frames_needed = n_frames or scenario.n_frames
                source = scenario.source_truth
                path = _output_file(out, "counts.csv")
                stream = streams["measurement"]
            frames = simulate_frames(source, dets, scenario.scene, scenario.model, frames_needed, stream)
            write_counts(frames, [det.id for det in dets], path, dwell=dets[0].dwell)
            return {"counts": str(path), "frames": len(frames), "detectors": len(dets)}

        return self._recorded("simulate", scenario, action)

    # --- localize -----------------------------------------------------------

    def run_localize(self, scenario: Scenario) -> RunResult:
        """시뮬레이션 관측 + SIR (mobility가 있으면 이동형 검출기)"""
        if scenario.source_truth is None:
            raise ConfigError("localize에는 선원(source)이 필요합니다", field="source")
        streams = make_streams(scenario.seed)
        options = _run_options(scenario, include_background=True)
        if scenario.mobility is not None:
            return run_sir_mobile(scenario, options, streams)
        frames = simulate_frames(scenario.source_truth, scenario.detectors, scenario.scene, scenario.model,
                                 scenario.n_frames, streams["measurement"])
        return run_sir(scenario, frames, options, streams)

    def localize(self, scenario: Scenario, out: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
        def action():
            result = self.run_localize(scenario)
            return self._finish(result, scenario, out)

        return self._recorded("localize", scenario, action)

    # --- replay -------------------------------------------------------------

    def prepare_replay_frames(self, scenario: Scenario, counts: Union[str, Path],
                              background: Optional[Union[str, Path]] = None,
                              augment: Optional[int] = None):
        """계수 로드 → (배경 차감) → (Poisson 증강), 반환: (프레임, 배경 포함 여부)"""
        streams = make_streams(scenario.seed)
        frames, ids = ingest_counts(counts, scenario.bin_mode)
        if not frames:
            raise DataError(f"계수 파일에 프레임이 없습니다: {counts}")
        frames = align_frames(frames, ids, scenario.detector_ids)

        include_background = True
        if background is not None:
            bg_dets = scenario.background_detectors or scenario.detectors
            bg_frames, bg_ids = ingest_counts(background, scenario.bin_mode)
            bg_frames = align_frames(bg_frames, bg_ids, [det.id for det in bg_dets])
            bg_means = match_background(scenario.detectors, bg_dets, bg_frames)
            frames = [subtract_background(frame, bg_means, streams["background"]) for frame in frames]
            include_background = False

        if augment:
            frames = augment_measurements(mean_counts(frames), augment, streams["augment"])
        else:
            frames = frames[:scenario.n_frames]
        return frames, include_background

    def run_replay(self, scenario: Scenario, counts, background=None, augment: Optional[int] = None) -> RunResult:
        frames, include_background = self.prepare_replay_frames(scenario, counts, background, augment)
        return run_sir(scenario, frames, _run_options(scenario, include_background), make_streams(scenario.seed))

    def replay(self, scenario: Scenario, counts, out: Optional[Union[str, Path]] = None, background=None,
               augment: Optional[int] = None) -> Dict[str, Any]:
        def action():
            result = self.run_replay(scenario, counts, background, augment)
            return self._finish(result, scenario, out)

        return self._recorded("replay", scenario, action)

    # --- diagnose -----------------------------------------------------------

    def diagnose(self, scenario: Scenario, phi: str, test_function, n_values: Sequence[int], seeds: int,
                 reference_n: Optional[int] = None, n_steps: int = 1,
                 tail_fraction: float = DEFAULT_TAIL_FRACTION,
                 out: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
        """MSE 스케일링과 r_k 단조성 보고서"""
        def action():
            reference = reference_n or 64 * max(n_values)
            report = mse_slope_experiment(scenario, test_function, n_values, reference, seeds,
                                          n_steps=n_steps, options=_run_options(scenario, True),
                                          tail_fraction=tail_fraction, phi_name=phi)
            document = report.to_dict()
            document.update({"scenario": scenario.name, "seed": scenario.seed})
            if out is not None:
                out_dir = Path(out)
                out_dir.mkdir(parents=True, exist_ok=True)
                with open(out_dir / "report.json", "w", encoding="utf-8") as f:
                    json.dump(document, f, indent=2, ensure_ascii=False)
                (out_dir / "report.txt").write_text(format_report(report) + "\n", encoding="utf-8")
            document["text"] = format_report(report)
            document["final_error"] = report.final_error_m
            return document

        return self._recorded("diagnose", scenario, action)

    # --- 공통 ---------------------------------------------------------------

    def _finish(self, result: RunResult, scenario: Scenario, out: Optional[Union[str, Path]]) -> Dict[str, Any]:
        final = result.final_summary
        error = None
        if scenario.source_truth is not None:
            error = localization_error(final, scenario.source_truth)
        outcome: Dict[str, Any] = {
            "scenario": scenario.name,
            "seed": scenario.seed,
            "frames": len(result.summary_series),
            "final": final.to_dict(),
            "final_error": error,
            "r_series": list(result.r_series),
        }
        if out is not None:
            paths = export_results(result, scenario, out, seed=scenario.seed)
            outcome["files"] = {name: str(path) for name, path in paths.items()}
        return outcome


# 전역 매니저 인스턴스
_manager: Optional[RunManager] = None


def get_manager() -> RunManager:
    """매니저 인스턴스 반환"""
    global _manager
    if _manager is None:
        _manager = RunManager()
        _manager.initialize()
    return _manager


def is_manager_ready() -> bool:
    try:
        return get_manager().is_ready()
    except RadlocError:
        return False


def get_manager_status() -> Dict[str, Any]:
    """매니저 상태 반환"""
    try:
        return get_manager().get_status()
    except RadlocError as e:
        return {"initialized": False, "ready": False, "error": str(e), "timestamp": time.time()}
