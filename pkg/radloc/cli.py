# radloc/cli.py - 명령줄 드라이버
"""
radloc 명령줄

    python -m radloc simulate --scenario lsi_c02 --out data/
    python -m radloc localize --scenario case1 --out run1
    python -m radloc replay --scenario lsi_a04 --counts a04.csv --background bg.csv --out run2
    python -m radloc diagnose --scenario case1 --phi x --n 100,400,1600 --seeds 50 --out diag

종료 코드: 0 성공, 2 설정 오류, 3 데이터 오류, 4 우도 퇴화, 1 내부 오류
"""

import argparse
import json
import sys
from typing import Any, Dict, List, Optional

from utils.logging import configure_logging, debug_error, debug_log
from utils.parsers import parse_int_list, parse_phi

from .diagnostics import DEFAULT_TAIL_FRACTION
from .errors import RadlocError, exit_code_for
from .manager import get_manager


def _int_list(text: str) -> List[int]:
    try:
        return parse_int_list(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _phi(text: str):
    try:
        return parse_phi(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"1 이상의 정수여야 합니다: {text}")
    return value


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"(0, 1] 범위여야 합니다: {text}")
    return value


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="내장 시나리오 이름 또는 JSON 파일 경로")
    parser.add_argument("--out", help="출력 디렉터리 (simulate는 .csv 파일 경로도 가능)")
    parser.add_argument("--seed", type=int, help="시나리오 seed 덮어쓰기")
    parser.add_argument("--n-particles", type=int, dest="n_particles")
    parser.add_argument("--frames", type=_positive_int)
    parser.add_argument("--model", choices=["qa", "rt"])
    parser.add_argument("--likelihood", help="poisson 또는 gaussian:SIGMA")
    parser.add_argument("--prior", choices=["box", "hull", "kde"])
    parser.add_argument("--mobility", choices=["off", "mean-pursuit", "kde"])
    parser.add_argument("--bin-mode", choices=["bin12", "total"], dest="bin_mode")
    parser.add_argument("--verbose", "-v", action="store_true", help="DEBUG 로그 출력")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radloc", description="SIR 입자 필터 방사선 선원 위치 추정")
    sub = parser.add_subparsers(dest="verb", required=True)

    simulate = sub.add_parser("simulate", help="관측 계수 파일 생성")
    _add_common(simulate)
    simulate.add_argument("--background-only", action="store_true", dest="background_only",
                          help="선원 없이 배경만 (기본 60초)")

    localize = sub.add_parser("localize", help="시뮬레이션 관측으로 위치 추정")
    _add_common(localize)

    replay = sub.add_parser("replay", help="계수 파일로 위치 추정")
    _add_common(replay)
    replay.add_argument("--counts", required=True, help="계수 CSV")
    replay.add_argument("--background", help="배경 계수 CSV")
    replay.add_argument("--augment", type=_positive_int, help="시간 평균에서 Poisson 증강할 프레임 수")

    diagnose = sub.add_parser("diagnose", help="MSE 스케일링 / r_k 단조성 진단")
    _add_common(diagnose)
    diagnose.add_argument("--phi", type=_phi, default=parse_phi("x"), help="x | y | intensity | one | SCALE*name")
    diagnose.add_argument("--n", type=_int_list, default=[100, 400, 1600], dest="n_values")
    diagnose.add_argument("--seeds", type=_positive_int, default=50)
    diagnose.add_argument("--reference-n", type=_positive_int, dest="reference_n",
                          help="기준 입자 수 (기본: 최대 N의 64배)")
    diagnose.add_argument("--steps", type=_positive_int, default=1, dest="n_steps",
                          help="MSE를 측정할 프레임 수")
    diagnose.add_argument("--tail", type=_fraction, default=DEFAULT_TAIL_FRACTION)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("seed", "n_particles", "frames", "model", "likelihood", "prior", "mobility", "bin_mode")
    return {key: getattr(args, key) for key in keys if getattr(args, key, None) is not None}


def run(args: argparse.Namespace) -> Dict[str, Any]:
    """명령 하나 실행"""
    manager = get_manager()
    scenario = manager.load(args.scenario, overrides_from_args(args))
    debug_log(f"{args.verb}: {scenario.name or args.scenario} (seed={scenario.seed})")

    if args.verb == "simulate":
        return manager.simulate(scenario, args.out or ".", background_only=args.background_only,
                                n_frames=args.frames)
    if args.verb == "localize":
        return manager.localize(scenario, args.out)
    if args.verb == "replay":
        return manager.replay(scenario, args.counts, args.out, background=args.background, augment=args.augment)
    phi_name, phi = args.phi
    return manager.diagnose(scenario, phi_name, phi, args.n_values, args.seeds, reference_n=args.reference_n,
                            n_steps=args.n_steps, tail_fraction=args.tail, out=args.out)


def _echo(verb: str, outcome: Dict[str, Any]) -> None:
    if verb == "diagnose":
        print(outcome["text"])
        return
    brief = {key: value for key, value in outcome.items() if key not in ("r_series", "final")}
    if "final" in outcome:
        brief["posterior_mean"] = outcome["final"]["mean"]
    print(json.dumps(brief, indent=2, ensure_ascii=False))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        outcome = run(args)
    except Exception as e:
        code = exit_code_for(e)
        debug_error(f"{args.verb} 실패 (exit {code})", e, traceback=not isinstance(e, RadlocError))
        print(f"error: {e}", file=sys.stderr)
        return code
    _echo(args.verb, outcome)
    return 0


if __name__ == "__main__":
    sys.exit(main())
