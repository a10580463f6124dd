# radloc/dataio.py - 계수 데이터 입출력과 결과 내보내기
"""
계수 CSV 읽기/쓰기, 배경 검출기 매칭, 실행 결과 내보내기

계수 파일 헤더:
    time_s,detector_id,counts
    time_s,detector_id,bin_01,...,bin_21
"""

import json
import logging
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from matplotlib.patches import Polygon as PolygonPatch  # noqa: E402

from .detector import DetectorSpec  # noqa: E402
from .diagnostics import localization_error  # noqa: E402
from .errors import ConfigError, DataError, DegenerateInputError  # noqa: E402
from .geometry import convex_hull  # noqa: E402
from .measurement import N_SPECTRAL_BINS, PHOTOPEAK_BIN, BinMode, MeasurementFrame  # noqa: E402
from .particle_filter import RunResult  # noqa: E402

logger = logging.getLogger("radloc.dataio")

BIN_COLUMNS = [f"bin_{i:02d}" for i in range(1, N_SPECTRAL_BINS + 1)]
SCALAR_COLUMNS = ["time_s", "detector_id", "counts"]
SPECTRAL_COLUMNS = ["time_s", "detector_id"] + BIN_COLUMNS


def _read_table(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype={"detector_id": str}, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as e:
        raise DataError(f"계수 파일 형식 오류 (행 길이 불일치): {e}") from e
    except OSError as e:
        raise DataError(f"계수 파일을 읽을 수 없습니다: {e}") from e


def _integer_column(values: pd.Series, name: str) -> np.ndarray:
    numeric = pd.to_numeric(values, errors="coerce")
    if numeric.isna().any():
        row = int(numeric.isna().to_numpy().argmax())
        raise DataError(f"{name} 열 {row + 2}행: 값이 없거나 숫자가 아닙니다")
    arr = numeric.to_numpy(dtype=float)
    if np.any(arr != np.floor(arr)) or np.any(arr < 0):
        raise DataError(f"{name} 열은 음이 아닌 정수여야 합니다")
    return arr.astype(np.int64)


def ingest_counts(path: Union[str, Path],
                  bin_mode: Union[BinMode, str] = BinMode.BIN12) -> Tuple[List[MeasurementFrame], List[str]]:
    """계수 CSV → 시각별 MeasurementFrame 목록과 검출기 id (첫 등장 순서)"""
    bin_mode = BinMode(bin_mode)
    table = _read_table(path)
    if table.empty and list(table.columns) in ([], SCALAR_COLUMNS, SPECTRAL_COLUMNS):
        return [], []

    columns = list(table.columns)
    if columns == SCALAR_COLUMNS:
        values = _integer_column(table["counts"], "counts")
    elif columns == SPECTRAL_COLUMNS:
        bins = np.column_stack([_integer_column(table[c], c) for c in BIN_COLUMNS])
        values = bins[:, PHOTOPEAK_BIN - 1] if bin_mode is BinMode.BIN12 else bins.sum(axis=1)
    else:
        raise DataError(f"알 수 없는 헤더: {','.join(map(str, columns))} "
                        f"(time_s,detector_id,counts 또는 bin_01..bin_{N_SPECTRAL_BINS})")

    times = _integer_column(table["time_s"], "time_s")
    if table["detector_id"].isna().any():
        raise DataError("detector_id 값이 비어 있습니다")
    ids = table["detector_id"].astype(str).str.strip()
    data = pd.DataFrame({"time_s": times, "detector_id": ids, "value": values})

    for det_id, group in data.groupby("detector_id", sort=False):
        t = group["time_s"].to_numpy()
        if np.any(np.diff(t) <= 0):
            bad = int(t[1:][np.diff(t) <= 0][0])
            raise DataError(f"검출기 {det_id}: 시각이 증가하지 않습니다 (time_s={bad})",
                            detector_id=det_id, time_s=bad)

    order = list(pd.unique(ids))
    wide = data.pivot(index="time_s", columns="detector_id", values="value").reindex(columns=order).sort_index()
    missing = wide.isna().to_numpy()
    if missing.any():
        t_index, d_index = np.argwhere(missing)[0]
        det_id, time_s = order[d_index], int(wide.index[t_index])
        raise DataError(f"검출기 {det_id}의 time_s={time_s} 측정이 없습니다", detector_id=det_id, time_s=time_s)

    counts = wide.to_numpy(dtype=np.int64)
    frames = [MeasurementFrame(k, tuple(row)) for k, row in enumerate(counts, start=1)]
    logger.debug("계수 로드: %s (프레임 %d개, 검출기 %d대)", path, len(frames), len(order))
    return frames, order


def align_frames(frames: Sequence[MeasurementFrame], ids: Sequence[str],
                 target_ids: Sequence[str]) -> List[MeasurementFrame]:
    """파일의 검출기 순서를 시나리오 검출기 순서로 재배열"""
    missing = [det_id for det_id in target_ids if det_id not in ids]
    if missing:
        raise DataError(f"계수 파일에 검출기 {missing[0]}가 없습니다", detector_id=missing[0])
    index = [list(ids).index(det_id) for det_id in target_ids]
    return [MeasurementFrame(f.time_index, tuple(f.counts[i] for i in index)) for f in frames]


def write_counts(frames: Sequence[MeasurementFrame], detector_ids: Sequence[str],
                 path: Union[str, Path], dwell: float = 1.0) -> Path:
    """프레임을 time_s,detector_id,counts CSV로 저장 (time_s = round(k·dwell))"""
    rows = [
        (int(round(frame.time_index * dwell)), det_id, count)
        for frame in frames
        for det_id, count in zip(detector_ids, frame.counts)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=SCALAR_COLUMNS).to_csv(path, index=False)
    return path


def _id_key(det_id: str) -> Tuple:
    """"D9" < "D10" 이 되도록 숫자 구간은 정수로 비교"""
    return tuple((0, int(part), "") if part.isdigit() else (1, 0, part)
                 for part in re.split(r"(\d+)", det_id) if part)


def match_background(dets: Sequence[DetectorSpec],
                     bg_dets: Sequence[DetectorSpec],
                     bg_frames: Sequence[MeasurementFrame]) -> List[float]:
    """각 검출기를 가장 가까운 배경 검출기에 대응시키고 그 시간 평균을 반환

    거리가 같으면 id가 가장 작은 검출기를 고르며 id의 숫자 구간은 값으로 비교합니다.
    """
    if not bg_frames or not bg_dets:
        raise DataError("배경 데이터가 비어 있습니다")
    if any(len(frame) != len(bg_dets) for frame in bg_frames):
        raise DataError(f"배경 프레임 길이가 배경 검출기 수 {len(bg_dets)}와 다릅니다")
    bg_means = np.mean([frame.as_array() for frame in bg_frames], axis=0)
    bg_pos = np.array([d.position for d in bg_dets], dtype=float)

    means = []
    for det in dets:
        dist = np.linalg.norm(bg_pos - np.asarray(det.position, dtype=float), axis=1)
        nearest = np.flatnonzero(dist == dist.min())
        chosen = min(nearest, key=lambda j: (_id_key(bg_dets[j].id), j))
        logger.debug("배경 매칭: %s → %s (%.3f m)", det.id, bg_dets[chosen].id, dist[chosen])
        means.append(float(bg_means[chosen]))
    return means


def _prepare_out_dir(out_dir: Union[str, Path]) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".radloc-write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise ConfigError(f"출력 디렉터리에 쓸 수 없습니다: {e}", field="out") from e
    return out


def particles_frame(result: RunResult) -> pd.DataFrame:
    """step, index, x, y, intensity, weight"""
    history = result.ensemble_history
    steps = [s.step for s in result.summary_series][-len(history):]
    parts = [
        pd.DataFrame({
            "step": step,
            "index": np.arange(ens.n),
            "x": ens.states[:, 0],
            "y": ens.states[:, 1],
            "intensity": ens.states[:, 2],
            "weight": ens.norm_weights,
        })
        for step, ens in zip(steps, history)
    ]
    return pd.concat(parts, ignore_index=True)


def summary_document(result: RunResult, scenario, seed: Optional[int] = None,
                     extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """summary.json 내용"""
    truth = scenario.source_truth
    steps = []
    for summary in result.summary_series:
        entry = summary.to_dict()
        if truth is not None:
            entry["localization_error"] = localization_error(summary, truth)
        steps.append(entry)
    final = steps[-1]
    document = {
        "scenario": scenario.name,
        "seed": scenario.seed if seed is None else seed,
        "n_particles": scenario.n_particles,
        "n_frames": len(result.summary_series),
        "model": scenario.model.value,
        "likelihood": str(scenario.likelihood),
        "prior": scenario.prior,
        "resample_fraction": scenario.resample_fraction,
        "truth": None if truth is None else [truth.x, truth.y, truth.intensity],
        "r_series": list(result.r_series),
        "final": final,
        "final_error": final.get("localization_error"),
        "steps": steps,
    }
    if extra:
        document.update(extra)
    return document


def _final_positions(result: RunResult, scenario) -> np.ndarray:
    if result.detector_history:
        return result.detector_history[-1]
    return np.array([det.position for det in scenario.detectors], dtype=float)


def plot_scatter(result: RunResult, scenario, path: Union[str, Path]) -> Path:
    """최종 입자 분포, 검출기, 볼록 껍질, 건물, 실제 선원, 사후 평균을 SVG로"""
    ens = result.ensemble_history[-1]
    final = result.final_summary
    xmin, ymin, xmax, ymax = scenario.scene.bounds

    fig, ax = plt.subplots(figsize=(8, 8 * (ymax - ymin) / (xmax - xmin)))
    for index, building in enumerate(scenario.scene.buildings):
        patch = PolygonPatch(np.asarray(building.vertices), closed=True, facecolor="0.8",
                             edgecolor="0.4", label="buildings" if index == 0 else None)
        patch.set_gid(f"building-{index}")
        ax.add_patch(patch)

    try:
        hull = convex_hull([det.position for det in scenario.detectors])
        ring = np.vstack([hull.array, hull.array[:1]])
        ax.plot(ring[:, 0], ring[:, 1], "--", color="tab:green", linewidth=1, label="hull")
    except DegenerateInputError:
        pass

    order = np.argsort(ens.norm_weights, kind="stable")
    points = ax.scatter(ens.states[order, 0], ens.states[order, 1], c=ens.norm_weights[order], s=6,
                        cmap="viridis", label="particles")
    fig.colorbar(points, ax=ax, label="weight")

    for index, (det_id, (x, y)) in enumerate(zip(result.detector_ids, _final_positions(result, scenario))):
        (marker,) = ax.plot([x], [y], "^", color="tab:blue", markersize=8,
                            label="detectors" if index == 0 else None)
        marker.set_gid(f"detector-{det_id}")

    if scenario.source_truth is not None:
        ax.plot([scenario.source_truth.x], [scenario.source_truth.y], "*", color="tab:red", markersize=14,
                label="source")
    ax.plot([final.mean.x], [final.mean.y], "X", color="black", markersize=10, label="posterior mean")

    ax.set_xlim(xmin, xmax)
    ax.set_ylim(ymin, ymax)
    ax.set_aspect("equal")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title(f"{scenario.name or 'scenario'}: step {final.step}")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()

    path = Path(path)
    with plt.rc_context({"svg.hashsalt": "radloc"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def detectors_frame(result: RunResult) -> pd.DataFrame:
    """step, detector_id, x, y (이동형 검출기 실행)"""
    rows = [
        (step, det_id, float(x), float(y))
        for step, positions in enumerate(result.detector_history or [], start=1)
        for det_id, (x, y) in zip(result.detector_ids, positions)
    ]
    return pd.DataFrame(rows, columns=["step", "detector_id", "x", "y"])


def export_results(result: RunResult, scenario, out_dir: Union[str, Path], seed: Optional[int] = None,
                   extra: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
    """particles.csv, summary.json, scatter.svg, (이동 시) detectors.csv 저장"""
    out = _prepare_out_dir(out_dir)
    paths = {
        "particles": out / "particles.csv",
        "summary": out / "summary.json",
        "scatter": out / "scatter.svg",
    }
    particles_frame(result).to_csv(paths["particles"], index=False, float_format="%.10g")
    with open(paths["summary"], "w", encoding="utf-8") as f:
        json.dump(summary_document(result, scenario, seed, extra), f, indent=2, ensure_ascii=False)
    plot_scatter(result, scenario, paths["scatter"])
    if result.detector_history is not None:
        paths["detectors"] = out / "detectors.csv"
        detectors_frame(result).to_csv(paths["detectors"], index=False, float_format="%.10g")
    logger.info("결과 저장: %s", out)
    return paths
