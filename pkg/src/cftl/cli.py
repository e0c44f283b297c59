"""Command-line entry point: ``cftl scfg|plan|verify|check-trace|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from cftl.formula import CftlFormula, FormulaSyntaxError, FormulaTypeError, UnboundVariable, parse_formula
from cftl.instrument import emit_plan
from cftl.lang.interpreter import MiniRuntimeError
from cftl.lang.syntax import MiniSyntaxError, Program, parse_program
from cftl.pipeline import verify
from cftl.runtime.oracle import oracle_evaluate
from cftl.runtime.trace import TraceFormatError, dumps_trace, loads_trace
from cftl.scfg import build_scfg, to_dot
from cftl.truth import Verdict

log = logging.getLogger("cftl")

EXIT_CODES = {Verdict.TRUE: 0, Verdict.FALSE: 1, Verdict.UNKNOWN: 3}
EXIT_INPUT_ERROR = 2

_REQUIRED = {
    "scfg": ("program",),
    "plan": ("program", "spec"),
    "verify": ("program", "spec"),
    "check-trace": ("trace", "spec"),
    "report": ("program", "spec"),
}


class InputError(Exception):
    pass


@dataclass
class CliConfig:
    command: str
    program_path: Optional[Path] = None
    spec_path: Optional[Path] = None
    trace_path: Optional[Path] = None
    out_path: Optional[Path] = None
    format: Optional[str] = None
    mode: str = "sync"
    record_path: Optional[Path] = None

    def validate(self) -> None:
        for name in _REQUIRED[self.command]:
            path = getattr(self, f"{name}_path")
            if path is None:
                raise InputError(f"{self.command} needs --{name}")
            if not path.is_file():
                raise InputError(f"no such file: {path}")


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def load_program(path: Path) -> Program:
    try:
        return parse_program(_read(path), path.stem)
    except MiniSyntaxError as exc:
        raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None


def load_formula(path: Path) -> CftlFormula:
    try:
        return parse_formula(_read(path))
    except (FormulaSyntaxError, FormulaTypeError, UnboundVariable) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def cmd_scfg(cfg: CliConfig) -> int:
    program = load_program(cfg.program_path)
    g = build_scfg(program)
    if cfg.format == "json":
        data = {
            "vertices": [
                {"index": v.index, "assigned": v.assigned, "called": v.called,
                 "mapping": {s: m.value for s, m in v.mapping}}
                for v in g.vertices
            ],
            "edges": [
                {"index": e.index, "src": e.src, "dst": e.dst, "condition": e.condition,
                 "types": sorted(e.types)}
                for e in g.edges
            ],
            "start": g.start,
            "ends": sorted(g.ends),
        }
        _emit(json.dumps(data, indent=2, sort_keys=True) + "\n", cfg.out_path)
    else:
        _emit(to_dot(g), cfg.out_path)
    return 0


def cmd_plan(cfg: CliConfig) -> int:
    program = load_program(cfg.program_path)
    formula = load_formula(cfg.spec_path)
    plan = emit_plan(program, formula)
    if not plan.bindings:
        log.warning("the formula matches nothing in %s; the plan is empty", cfg.program_path)
    for b, a in plan.unrealizable:
        log.warning("atom %d of binding %d reaches no program location", a, b)
    _emit(plan.dumps(), cfg.out_path)
    return 0


def _run(cfg: CliConfig):
    program = load_program(cfg.program_path)
    formula = load_formula(cfg.spec_path)
    try:
        result = verify(program, formula, mode=cfg.mode, record=cfg.record_path is not None)
    except MiniRuntimeError as exc:
        raise InputError(f"{cfg.program_path}: runtime error: {exc}") from None
    if cfg.record_path is not None:
        cfg.record_path.write_text(dumps_trace(result.full_trace), encoding="utf-8")
    return result


def _write_reports(report, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    (out / "timing.csv").write_text(report.timing_csv())


def cmd_verify(cfg: CliConfig) -> int:
    result = _run(cfg)
    report = result.report
    if cfg.out_path is not None:
        _write_reports(report, cfg.out_path)
    print(f"verdict: {report.global_verdict.symbol}")
    print(f"monitors instantiated: {report.monitors_instantiated}")
    return EXIT_CODES[report.global_verdict]


def cmd_report(cfg: CliConfig) -> int:
    report = _run(cfg).report
    if cfg.format == "csv":
        _emit(report.timing_csv(), cfg.out_path)
    else:
        _emit(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", cfg.out_path)
    return EXIT_CODES[report.global_verdict]


def cmd_check_trace(cfg: CliConfig) -> int:
    formula = load_formula(cfg.spec_path)
    try:
        events = loads_trace(_read(cfg.trace_path))
    except TraceFormatError as exc:
        raise InputError(f"{cfg.trace_path}: {exc}") from None
    verdict = oracle_evaluate(events, formula)
    print(f"verdict: {verdict.symbol}")
    return EXIT_CODES[verdict]


COMMANDS = {
    "scfg": cmd_scfg,
    "plan": cmd_plan,
    "verify": cmd_verify,
    "check-trace": cmd_check_trace,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cftl", description="Runtime verification of MiniLang programs.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--program", type=Path)
    p.add_argument("--spec", type=Path)
    p.add_argument("--trace", type=Path)
    p.add_argument("--out", type=Path, help="output file, or report directory for verify")
    p.add_argument("--format", choices=["dot", "json", "csv"])
    p.add_argument("--mode", choices=["sync", "async"], default="sync")
    p.add_argument("--record", type=Path, metavar="PATH", help="write the complete run as JSON lines")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    cfg = CliConfig(
        args.command, args.program, args.spec, args.trace, args.out, args.format, args.mode, args.record
    )
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
