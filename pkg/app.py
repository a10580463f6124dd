# app.py - radloc 실행 서비스 (배치 위치 추정 API)
import json
import time
from datetime import datetime

from flask import Flask, jsonify, request
from flask_cors import CORS

from radloc import (
    DegenerateLikelihoodError,
    RadlocError,
    __version__,
    get_manager,
    get_manager_status,
    is_manager_ready,
)
from radloc.presets import get_preset_stats
from radloc.scenario import scenario_from_dict
from utils.logging import (
    clear_logs,
    debug_error,
    debug_log,
    get_log_stats,
    load_logs_from_file,
    process_stats,
    run_log_path,
)
from utils.parsers import extract_first_json, parse_overrides

# Flask 설정
app = Flask(__name__)
CORS(app)


def error_response(error: Exception):
    """예외 분류 → (JSON 본문, HTTP 상태)"""
    if isinstance(error, DegenerateLikelihoodError):
        status, category = 422, error.category
    elif isinstance(error, RadlocError) and error.exit_code in (2, 3):
        status, category = 400, error.category
    elif isinstance(error, ValueError):
        status, category = 400, "config"
    else:
        status, category = 500, "internal"
    body = {
        "success": False,
        "error": str(error),
        "category": category,
        "timestamp": datetime.now().isoformat(),
    }
    return jsonify(body), status


def _request_json():
    data = request.get_json(silent=True)
    if data is None and request.data:
        data = extract_first_json(request.get_data(as_text=True))
    return data


# Flask 라우트
@app.route("/", methods=["GET"])
def root():
    try:
        stats = get_preset_stats()
    except RadlocError as e:
        debug_error("내장 시나리오 로드 실패", e)
        stats = {"error": str(e)}
    return jsonify({
        "service": "radloc - SIR particle filter source localization",
        "version": __version__,
        "status": "running",
        "manager_ready": is_manager_ready(),
        "endpoints": ["/localize", "/run_logs", "/health"],
        "presets": stats,
    })


@app.route("/localize", methods=["POST"])
def localize():
    """시나리오 (내장 이름 또는 인라인 JSON) + 덮어쓰기 → 위치 추정 요약"""
    request_start_time = time.time()
    try:
        data = _request_json()
        if not isinstance(data, dict) or "scenario" not in data:
            raise ValueError("scenario 필드가 필요합니다 (내장 이름 또는 시나리오 객체)")
        overrides = parse_overrides(data.get("overrides"))
        manager = get_manager()

        source = data["scenario"]
        if isinstance(source, dict):
            source = scenario_from_dict(source)
        elif not isinstance(source, str):
            raise ValueError("scenario는 문자열 또는 객체여야 합니다")
        scenario = manager.load(source, overrides)

        debug_log("위치 추정 요청", {"scenario": scenario.name, "seed": scenario.seed,
                                    "n_particles": scenario.n_particles, "frames": scenario.n_frames,
                                    "request_ip": request.remote_addr})
        outcome = manager.localize(scenario)
        outcome.update({
            "success": True,
            "processing_time": time.time() - request_start_time,
            "timestamp": datetime.now().isoformat(),
        })
        debug_log("위치 추정 완료", {"final_error": outcome.get("final_error"),
                                    "processing_time": outcome["processing_time"]})
        return jsonify(outcome)
    except Exception as e:
        debug_error("위치 추정 중 오류", e, traceback=not isinstance(e, (RadlocError, ValueError)))
        return error_response(e)


@app.route("/run_logs", methods=["GET"])
def get_run_logs():
    path = run_log_path()
    data = load_logs_from_file(path)
    data["stats"] = get_log_stats(path)
    response = app.response_class(
        response=json.dumps(data, ensure_ascii=False),
        status=200,
        mimetype="application/json; charset=utf-8",
    )
    return response


@app.route("/run_logs", methods=["DELETE"])
def delete_run_logs():
    if clear_logs(run_log_path()):
        debug_log("실행 기록 삭제 완료")
        return jsonify({"success": True, "message": "실행 기록이 삭제되었습니다"})
    return jsonify({"success": False, "error": "실행 기록을 삭제하지 못했습니다"}), 500


@app.route("/health", methods=["GET"])
def health():
    return jsonify({
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
        "manager_ready": is_manager_ready(),
        "version": __version__,
        "manager": get_manager_status(),
        "process": process_stats(),
    })


if __name__ == "__main__":
    print("🚀 radloc 실행 서비스 시작 (http://127.0.0.1:5000)")
    app.run(host="127.0.0.1", port=5000, debug=False, threaded=True)
