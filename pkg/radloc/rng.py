# radloc/rng.py - 재현 가능한 난수 스트림
"""
하나의 루트 시드에서 이름 붙은 독립 스트림(init, measurement, resample, kde,
mobility, background)을 분기합니다. 같은 (seed, stream_id)는 같은 난수열을
재현합니다.
"""

from typing import Dict, Tuple

import numpy as np

# 스트림 이름 → stream_id
STREAM_IDS: Dict[str, int] = {
    "init": 0,
    "measurement": 1,
    "resample": 2,
    "kde": 3,
    "mobility": 4,
    "background": 5,
    "augment": 6,
    "reference": 7,
}


class RandomStream:
    """(seed, stream_id)로 결정되는 numpy Generator 래퍼"""

    def __init__(self, seed: int, stream_id: int = 0, path: Tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed는 음수가 될 수 없습니다: {seed}")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id)
        self.path = tuple(int(i) for i in path)
        sequence = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self.path))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def __getattr__(self, name):
        # uniform, poisson, normal, integers 등은 Generator에 위임
        if name == "generator":
            raise AttributeError(name)
        return getattr(self.generator, name)

    def child(self, index: int) -> "RandomStream":
        """같은 시드 계열의 하위 스트림 (시드별 반복 실험용)"""
        return RandomStream(self.seed, self.stream_id, self.path + (index,))

    def sklearn_seed(self) -> int:
        """sklearn random_state용 정수 시드"""
        return int(self.generator.integers(0, 2**31 - 1))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, path={self.path})"


def named_stream(seed: int, name: str) -> RandomStream:
    """루트 시드에서 이름 붙은 스트림 생성"""
    if name not in STREAM_IDS:
        raise KeyError(f"알 수 없는 스트림 이름: {name}")
    return RandomStream(seed, STREAM_IDS[name])


def make_streams(seed: int) -> Dict[str, RandomStream]:
    """모든 이름 붙은 스트림을 한 번에 생성"""
    return {name: RandomStream(seed, stream_id) for name, stream_id in STREAM_IDS.items()}
