# utils/parsers.py - CLI/HTTP 입력값 파서
import json
import re
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

# 시험 함수 φ 이름 → 상태 열 (None이면 상수 1)
PHI_COLUMNS = {"x": 0, "y": 1, "intensity": 2, "one": None}

OVERRIDE_TYPES = {
    "seed": int,
    "n_particles": int,
    "frames": int,
    "model": str,
    "likelihood": str,
    "prior": str,
    "mobility": str,
    "bin_mode": str,
}


def extract_first_json(s: str) -> Optional[Dict[str, Any]]:
    """문자열에서 첫 번째 유효한 JSON 객체 추출 (중첩 괄호 고려)"""
    start = -1
    depth = 0
    for i, char in enumerate(s):
        if char == '{':
            if start == -1:
                start = i
            depth += 1
        elif char == '}' and start != -1:
            depth -= 1
            if depth == 0:
                try:
                    parsed = json.loads(s[start:i + 1])
                    if isinstance(parsed, dict):
                        return parsed
                except json.JSONDecodeError:
                    pass
                start = -1
    return None


def parse_int_list(text: str) -> List[int]:
    """"100,400,1600" → [100, 400, 1600]"""
    items = [item.strip() for item in str(text).split(",") if item.strip()]
    if not items:
        raise ValueError(f"정수 목록이 비어 있습니다: {text!r}")
    try:
        return [int(item) for item in items]
    except ValueError:
        raise ValueError(f"정수 목록을 해석할 수 없습니다: {text!r}") from None


def parse_phi(text: str) -> Tuple[str, Callable[[np.ndarray], np.ndarray]]:
    """시험 함수 φ: x | y | intensity | one, 선택적으로 "SCALE*name" """
    spec = str(text).strip().lower().replace(" ", "")
    match = re.fullmatch(r"(?:([-+]?[0-9.]+(?:e[-+]?\d+)?)\*)?(x|y|intensity|one)", spec)
    if not match:
        raise ValueError(f"알 수 없는 시험 함수: {text!r} (x, y, intensity, one, SCALE*name)")
    scale = float(match.group(1)) if match.group(1) else 1.0
    column = PHI_COLUMNS[match.group(2)]

    def phi(states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        values = np.ones(len(states)) if column is None else states[:, column]
        return scale * values

    return spec, phi


def parse_overrides(raw: Optional[Dict[str, Any]]) -> Dict[str, Any]:
    """HTTP/CLI 덮어쓰기 값 검사 (알 수 없는 키나 타입 오류는 ValueError)"""
    if not raw:
        return {}
    if not isinstance(raw, dict):
        raise ValueError("overrides는 JSON 객체여야 합니다")
    overrides = {}
    for key, value in raw.items():
        if key not in OVERRIDE_TYPES:
            raise ValueError(f"알 수 없는 덮어쓰기 키: {key}")
        if value is None:
            continue
        expected = OVERRIDE_TYPES[key]
        if expected is int and (isinstance(value, bool) or not isinstance(value, int)):
            raise ValueError(f"{key}는 정수여야 합니다: {value!r}")
        if expected is str and not isinstance(value, str):
            raise ValueError(f"{key}는 문자열이어야 합니다: {value!r}")
        overrides[key] = value
    return overrides
