# utils/logging.py - 로깅 유틸리티 모듈
"""
로깅 관련 공통 함수들

- debug_log / debug_error: [RADLOC-DEBUG] / [RADLOC-ERROR] 태그 로그
- JSON 실행 기록 파일 ({"logs": [...]}, 최대 MAX_LOGS개)
"""

import json
import logging
import os
import shutil
import time
from datetime import datetime
from typing import Any, Dict, List, Optional

import psutil

DEFAULT_RUN_LOG = "run-log.json"
MAX_LOGS = 100

_logger = logging.getLogger("radloc")


def configure_logging(verbose: bool = False) -> None:
    """radloc 로거 설정 (RADLOC_LOG_LEVEL 환경 변수, --verbose면 DEBUG)"""
    level_name = "DEBUG" if verbose else os.environ.get("RADLOC_LOG_LEVEL", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    if not _logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(message)s"))
        _logger.addHandler(handler)
    _logger.setLevel(level)


def debug_log(message: str, data: Any = None) -> None:
    _logger.debug(f"🔧 [RADLOC-DEBUG] {message}")
    if data is not None:
        _logger.debug(f"   데이터: {data}")


def debug_error(message: str, error: Optional[BaseException] = None, traceback: bool = False) -> None:
    _logger.error(f"❌ [RADLOC-ERROR] {message}")
    if error is not None:
        show = traceback or _logger.isEnabledFor(logging.DEBUG)
        _logger.error(f"   오류: {error}", exc_info=error if show else None)


def run_log_path() -> str:
    """실행 기록 파일 경로 (RADLOC_RUN_LOG)"""
    return os.environ.get("RADLOC_RUN_LOG", DEFAULT_RUN_LOG)


def append_json_to_file(path: str, new_entry: Dict[str, Any], max_logs: int = MAX_LOGS) -> None:
    """JSON 엔트리를 로그 파일에 추가 (오래된 항목부터 max_logs개 초과분 삭제)"""
    data = load_logs_from_file(path)
    logs = data.get("logs")
    if not isinstance(logs, list):
        logs = []
    logs.append(new_entry)
    if len(logs) > max_logs:
        logs = logs[-max_logs:]

    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"logs": logs}, f, ensure_ascii=False, indent=2)


def load_logs_from_file(path: str) -> Dict[str, List]:
    """로그 파일에서 데이터 로드 (없거나 손상되면 빈 기록)"""
    try:
        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            if isinstance(data, dict):
                return data
        return {"logs": []}
    except (OSError, json.JSONDecodeError) as e:
        debug_error("로그 로드 실패", e)
        return {"logs": []}


def get_log_stats(path: str) -> Dict[str, Any]:
    """로그 파일 통계 정보"""
    logs = load_logs_from_file(path).get("logs", [])
    if not logs:
        return {
            "total_logs": 0,
            "file_size": 0,
            "successful_runs": 0,
            "latest_log": None,
            "oldest_log": None,
        }
    return {
        "total_logs": len(logs),
        "file_size": os.path.getsize(path) if os.path.exists(path) else 0,
        "successful_runs": sum(1 for log in logs if log.get("success")),
        "latest_log": logs[-1].get("time"),
        "oldest_log": logs[0].get("time"),
    }


def clear_logs(path: str) -> bool:
    """로그 파일 초기화"""
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"logs": []}, f, ensure_ascii=False, indent=2)
        return True
    except OSError as e:
        debug_error("로그 초기화 실패", e)
        return False


def backup_logs(path: str, backup_dir: str = "backups") -> Optional[str]:
    """로그 파일 백업 (파일명에 타임스탬프 포함)"""
    if not os.path.exists(path):
        return None
    try:
        os.makedirs(backup_dir, exist_ok=True)
        name, ext = os.path.splitext(os.path.basename(path))
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        backup_path = os.path.join(backup_dir, f"{name}_{timestamp}{ext}")
        shutil.copy2(path, backup_path)
        debug_log(f"로그 백업 완료: {backup_path}")
        return backup_path
    except OSError as e:
        debug_error("로그 백업 실패", e)
        return None


def process_stats() -> Dict[str, float]:
    """현재 프로세스의 메모리/CPU 사용량"""
    process = psutil.Process()
    with process.oneshot():
        memory = process.memory_info()
        return {
            "rss_mb": round(memory.rss / 2**20, 2),
            "cpu_seconds": round(sum(process.cpu_times()[:2]), 3),
        }


def make_run_record(verb: str, scenario: str = "", seed: Optional[int] = None,
                    n_particles: Optional[int] = None, frames: Optional[int] = None,
                    final_error: Optional[float] = None, started: Optional[float] = None,
                    success: bool = True, error: Optional[str] = None) -> Dict[str, Any]:
    """실행 기록 한 건"""
    record = {
        "time": datetime.now().isoformat(timespec="seconds"),
        "verb": verb,
        "scenario": scenario,
        "seed": seed,
        "n_particles": n_particles,
        "frames": frames,
        "final_error": final_error,
        "runtime_s": round(time.perf_counter() - started, 3) if started is not None else None,
        "peak_rss_mb": process_stats()["rss_mb"],
        "success": success,
    }
    if error:
        record["error"] = error
    return record
