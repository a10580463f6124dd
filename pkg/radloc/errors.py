# radloc/errors.py - 예외 계층
"""
radloc 예외 계층

CLI 종료 코드와 HTTP 응답 분류는 이 계층을 기준으로 결정됩니다.
"""

from typing import Optional


class RadlocError(Exception):
    """radloc 기본 예외 (내부 오류, 종료 코드 1)"""

    category = "internal"
    exit_code = 1


class ConfigError(RadlocError, ValueError):
    """시나리오/옵션 설정 오류 (종료 코드 2)"""

    category = "config"
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        prefix = ""
        if field:
            prefix = f"[{field}] "
        if line is not None:
            prefix = f"{prefix}(line {line}) "
        super().__init__(f"{prefix}{message}")


class DegenerateInputError(RadlocError, ValueError):
    """퇴화된 기하 입력 (공선 점, 면적 0 껍질, 길이 0 선분)"""

    category = "config"
    exit_code = 2


class DataError(RadlocError, ValueError):
    """계수 데이터 오류 (스키마, 누락 시간, 길이 불일치)"""

    category = "data"
    exit_code = 3

    def __init__(self, message: str, detector_id: Optional[str] = None, time_s: Optional[int] = None):
        self.detector_id = detector_id
        self.time_s = time_s
        super().__init__(message)


class DegenerateLikelihoodError(RadlocError):
    """모든 로그 가중치가 -inf 또는 비유한값"""

    category = "degenerate-likelihood"
    exit_code = 4

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


def exit_code_for(error: BaseException) -> int:
    """예외에 대응하는 CLI 종료 코드"""
    if isinstance(error, RadlocError):
        return error.exit_code
    return 1
