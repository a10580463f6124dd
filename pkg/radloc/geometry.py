# radloc/geometry.py - 2차원 기하 연산 (건물 다각형, 현 길이, 볼록 껍질)
"""
2차원 계산 기하 모듈

- 건물 다각형과 장면(Scene) 정의, 반시계 방향 정규화
- 선분-다각형 현(chord) 길이: shapely 교차 + STRtree 인덱스
- 검출기 볼록 껍질 생성, 포함 판정, 균일 샘플링(기각 샘플링)
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import shapely
from scipy.spatial import ConvexHull as QhullHull
from scipy.spatial import QhullError
from shapely.geometry import LineString, Point, Polygon
from shapely.geometry.polygon import orient

from .errors import ConfigError, DegenerateInputError

# 경계 포함 판정 허용 오차 (m)
HULL_TOLERANCE = 1e-9
# 접선 교차(grazing) 허용 오차 (m)
CHORD_TOLERANCE = 1e-9


class Point2(NamedTuple):
    """평면 위의 점 (m)"""

    x: float
    y: float


@dataclass(eq=True)
class BuildingPolygon:
    """균질 건물 단면 다각형과 평균 자유 행로"""

    vertices: List[Point2]
    mean_free_path: float

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ConfigError(f"건물 꼭짓점은 3개 이상이어야 합니다: {len(self.vertices)}", field="vertices")
        if not np.isfinite(self.mean_free_path) or self.mean_free_path <= 0:
            raise ConfigError(f"평균 자유 행로는 양수여야 합니다: {self.mean_free_path}", field="mean_free_path")
        coords = np.asarray(self.vertices, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2 or not np.all(np.isfinite(coords)):
            raise ConfigError("건물 꼭짓점 좌표가 올바르지 않습니다", field="vertices")
        polygon = Polygon(coords)
        if not polygon.is_valid or polygon.area <= 0:
            raise ConfigError("건물 다각형은 단순 다각형이어야 합니다 (자기 교차 불가)", field="vertices")
        # 반시계 방향으로 정규화
        ring = list(orient(polygon, sign=1.0).exterior.coords)[:-1]
        self.vertices = [Point2(float(x), float(y)) for x, y in ring]
        self.mean_free_path = float(self.mean_free_path)

    @cached_property
    def shape(self) -> Polygon:
        return Polygon(self.vertices)


@dataclass(eq=True)
class Scene:
    """영역 경계, 건물 목록, 세기 범위"""

    bounds: Tuple[float, float, float, float]  # (xmin, ymin, xmax, ymax)
    buildings: List[BuildingPolygon] = field(default_factory=list)
    intensity_range: Tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(v) for v in self.bounds)
        if not all(np.isfinite([xmin, ymin, xmax, ymax])) or xmin >= xmax or ymin >= ymax:
            raise ConfigError(f"영역 경계가 비어 있습니다: {self.bounds}", field="scene.bounds")
        self.bounds = (xmin, ymin, xmax, ymax)
        i_min, i_max = (float(v) for v in self.intensity_range)
        if not (i_min > 0 and i_min < i_max and np.isfinite(i_max)):
            raise ConfigError(f"세기 범위는 0 < I_min < I_max 이어야 합니다: {self.intensity_range}",
                              field="scene.intensity_range")
        self.intensity_range = (i_min, i_max)

        box = shapely.box(xmin, ymin, xmax, ymax)
        for index, building in enumerate(self.buildings):
            if not box.covers(building.shape):
                raise ConfigError(f"건물 {index}이(가) 영역 밖으로 벗어났습니다", field=f"buildings[{index}]")
        for i in range(len(self.buildings)):
            for j in range(i + 1, len(self.buildings)):
                overlap = self.buildings[i].shape.intersection(self.buildings[j].shape).area
                if overlap > 0:
                    raise ConfigError(f"건물 {i}와 {j}가 겹칩니다 (면적 {overlap:.3g} m²)",
                                      field=f"buildings[{j}]")

    @cached_property
    def polygons(self) -> np.ndarray:
        return np.array([b.shape for b in self.buildings], dtype=object)

    @cached_property
    def boundaries(self) -> np.ndarray:
        return shapely.boundary(self.polygons) if len(self.buildings) else np.array([], dtype=object)

    @cached_property
    def mean_free_paths(self) -> np.ndarray:
        return np.array([b.mean_free_path for b in self.buildings], dtype=float)

    @cached_property
    def tree(self) -> shapely.STRtree:
        return shapely.STRtree(self.polygons)

    def contains_xy(self, xy: np.ndarray) -> np.ndarray:
        """영역 경계 안에 있는지 (경계 포함)"""
        xy = np.atleast_2d(xy)
        xmin, ymin, xmax, ymax = self.bounds
        return (xy[:, 0] >= xmin) & (xy[:, 0] <= xmax) & (xy[:, 1] >= ymin) & (xy[:, 1] <= ymax)


@dataclass(eq=True)
class ConvexHull:
    """반시계 방향, 엄격 볼록 다각형"""

    vertices: List[Point2]

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @property
    def area(self) -> float:
        return polygon_area(self.array)

    @property
    def bounding_box(self) -> Tuple[float, float, float, float]:
        v = self.array
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())


def polygon_area(ring: np.ndarray) -> float:
    """신발끈 공식 면적 (반시계 방향이면 양수)"""
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _drop_collinear(ring: np.ndarray) -> np.ndarray:
    """경계 위 공선 꼭짓점 제거"""
    scale = max(float(np.ptp(ring, axis=0).max()), 1.0)
    changed = True
    while changed and len(ring) > 3:
        changed = False
        prev_pts = np.roll(ring, 1, axis=0)
        next_pts = np.roll(ring, -1, axis=0)
        a = ring - prev_pts
        b = next_pts - ring
        cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
        flat = np.abs(cross) <= 1e-12 * scale * scale
        if flat.any():
            drop = int(np.argmax(flat))
            ring = np.delete(ring, drop, axis=0)
            changed = True
    return ring


def convex_hull(points: Sequence[Sequence[float]]) -> ConvexHull:
    """점 집합의 볼록 껍질 (공선 경계점 제외, 사전순 최소 꼭짓점부터 시작)"""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateInputError(f"볼록 껍질에는 3개 이상의 점이 필요합니다: {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateInputError("좌표에 비유한값이 있습니다")
    centered = pts - pts.mean(axis=0)
    scale = max(float(np.abs(centered).max()), 1e-300)
    if np.linalg.matrix_rank(centered / scale, tol=1e-9) < 2:
        raise DegenerateInputError("모든 점이 한 직선 위에 있습니다")
    try:
        qhull = QhullHull(pts)
    except QhullError as e:
        raise DegenerateInputError(f"볼록 껍질 계산 실패: {e}") from e

    ring = _drop_collinear(pts[qhull.vertices])
    if polygon_area(ring) < 0:
        ring = ring[::-1]
    start = min(range(len(ring)), key=lambda i: (ring[i, 0], ring[i, 1]))
    ring = np.roll(ring, -start, axis=0)
    return ConvexHull([Point2(float(x), float(y)) for x, y in ring])


def points_in_hull(hull: ConvexHull, xy: np.ndarray) -> np.ndarray:
    """반평면 판정 (경계 포함, 허용 오차 HULL_TOLERANCE)"""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    v = hull.array
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(edges, axis=1)
    rel = xy[:, None, :] - v[None, :, :]
    cross = edges[None, :, 0] * rel[..., 1] - edges[None, :, 1] * rel[..., 0]
    return np.all(cross / lengths[None, :] >= -HULL_TOLERANCE, axis=1)


def point_in_hull(hull: ConvexHull, p: Sequence[float]) -> bool:
    """점이 껍질 내부 또는 경계 위에 있는지"""
    return bool(points_in_hull(hull, np.asarray(p, dtype=float))[0])


def sample_uniform_hull_batch(hull: ConvexHull, n: int, rng) -> np.ndarray:
    """껍질 위 균일 분포 점 n개 (경계 상자에서 기각 샘플링)"""
    area = hull.area
    if not area > 0:
        raise DegenerateInputError("면적이 0인 볼록 껍질에서는 샘플링할 수 없습니다")
    xmin, ymin, xmax, ymax = hull.bounding_box
    acceptance = area / ((xmax - xmin) * (ymax - ymin))
    accepted: List[np.ndarray] = []
    have = 0
    while have < n:
        batch = int(np.ceil((n - have) / acceptance * 1.2)) + 8
        xy = np.column_stack([rng.uniform(xmin, xmax, batch), rng.uniform(ymin, ymax, batch)])
        xy = xy[points_in_hull(hull, xy)]
        accepted.append(xy)
        have += len(xy)
    return np.concatenate(accepted)[:n]


def sample_uniform_hull(hull: ConvexHull, rng) -> Point2:
    """껍질 위 균일 분포 점 하나"""
    x, y = sample_uniform_hull_batch(hull, 1, rng)[0]
    return Point2(float(x), float(y))


def sample_uniform_box(bounds: Tuple[float, float, float, float], n: int, rng) -> np.ndarray:
    """축 정렬 사각형 위 균일 분포 점 n개"""
    xmin, ymin, xmax, ymax = bounds
    return np.column_stack([rng.uniform(xmin, xmax, n), rng.uniform(ymin, ymax, n)])


def _interior_chords(lines: np.ndarray, polygons: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    """선분이 다각형 내부를 지나는 길이 (경계를 따라가는 부분은 제외)"""
    inside = shapely.length(shapely.intersection(lines, polygons))
    on_edge = shapely.length(shapely.intersection(lines, boundaries))
    chords = inside - on_edge
    chords[chords < CHORD_TOLERANCE] = 0.0
    return chords


def chord_lengths(a: Sequence[float], b: Sequence[float], scene: Scene) -> List[Tuple[int, float]]:
    """선분 a→b가 각 건물 내부를 지나는 길이 목록 (교차하지 않는 건물은 생략)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.allclose(a, b, rtol=0.0, atol=0.0):
        raise DegenerateInputError(f"길이 0인 선분입니다: {tuple(a)}")
    if not scene.buildings:
        return []
    line = LineString([a, b])
    hits = np.sort(scene.tree.query(line, predicate="intersects"))
    if hits.size == 0:
        return []
    lines = np.full(hits.size, line, dtype=object)
    chords = _interior_chords(lines, scene.polygons[hits], scene.boundaries[hits])
    return [(int(i), float(c)) for i, c in zip(hits, chords)]


def optical_depths(sources: np.ndarray, targets: np.ndarray, scene: Scene) -> np.ndarray:
    """모든 (source, target) 쌍에 대해 Σ ℓ_h / λ_h, 모양 (N, d)"""
    sources = np.atleast_2d(np.asarray(sources, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n, d = len(sources), len(targets)
    depths = np.zeros(n * d)
    if not scene.buildings or n == 0:
        return depths.reshape(n, d)

    coords = np.empty((n * d, 2, 2))
    coords[:, 0, :] = np.repeat(sources, d, axis=0)
    coords[:, 1, :] = np.tile(targets, (n, 1))
    lines = shapely.linestrings(coords)
    line_idx, building_idx = scene.tree.query(lines, predicate="intersects")
    if line_idx.size:
        chords = _interior_chords(lines[line_idx], scene.polygons[building_idx], scene.boundaries[building_idx])
        # 고정 순서 누적 (bincount)
        depths = np.bincount(line_idx, weights=chords / scene.mean_free_paths[building_idx], minlength=n * d)
    return depths.reshape(n, d)


def segment_blocked(a: Sequence[float], b: Sequence[float], scene: Scene) -> bool:
    """선분이 건물과 닿거나 교차하는지"""
    if not scene.buildings:
        return False
    line = LineString([tuple(a), tuple(b)])
    return bool(scene.tree.query(line, predicate="intersects").size)


def point_in_building(p: Sequence[float], scene: Scene) -> Optional[int]:
    """점을 포함하는 (경계 포함) 건물 인덱스, 없으면 None"""
    if not scene.buildings:
        return None
    hits = scene.tree.query(Point(tuple(p)), predicate="intersects")
    return int(np.min(hits)) if hits.size else None
