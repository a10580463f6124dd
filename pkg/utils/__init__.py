# utils/__init__.py - 유틸리티 모듈 초기화
"""
유틸리티 모듈

CLI와 HTTP 서비스가 공통으로 사용하는 로깅/파서 함수들을 제공합니다.
"""

from .logging import (
    MAX_LOGS,
    append_json_to_file,
    backup_logs,
    clear_logs,
    configure_logging,
    debug_error,
    debug_log,
    get_log_stats,
    load_logs_from_file,
    make_run_record,
    process_stats,
    run_log_path,
)
from .parsers import (
    extract_first_json,
    parse_int_list,
    parse_overrides,
    parse_phi,
)

__all__ = [
    'MAX_LOGS',
    'append_json_to_file',
    'backup_logs',
    'clear_logs',
    'configure_logging',
    'debug_error',
    'debug_log',
    'get_log_stats',
    'load_logs_from_file',
    'make_run_record',
    'process_stats',
    'run_log_path',
    'extract_first_json',
    'parse_int_list',
    'parse_overrides',
    'parse_phi',
]
