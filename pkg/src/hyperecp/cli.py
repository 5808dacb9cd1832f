"""Command-line entry point.

Exit codes: 0 success, 1 invalid input, 2 a consistency check failed.
``HYPERECP_OUTPUT_DIR`` sets the directory for relative ``--output`` paths.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from . import analysis
from .detection import (
    BELL,
    FAIL,
    GHZ,
    MATCH_TOL,
    RECYCLE,
    SUCCESS,
    ClassificationError,
    find_detector_bijection,
    run_protocol,
    signature_table,
)
from .fock import format_term
from .optics import apply_circuit, parse_circuit
from .protocol import SourceParams, bell_input, ghz_input

OUTPUT_DIR_ENV = "HYPERECP_OUTPUT_DIR"

EXIT_OK, EXIT_INVALID, EXIT_INCONSISTENT = 0, 1, 2


class InvalidConfig(ValueError):
    pass


@dataclass
class RunConfig:
    protocol: str = BELL
    alpha2: float = 0.5
    gamma2: float = 0.5
    phase_alpha: float = 0.0
    phase_gamma: float = 0.0
    fmt: str = "pretty"
    output: str | None = None
    tol: float = 1e-9
    match_tol: float = MATCH_TOL

    def validate(self) -> None:
        if self.protocol not in (BELL, GHZ):
            raise InvalidConfig(f"protocol must be bell or ghz, got {self.protocol!r}")
        for name in ("alpha2", "gamma2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidConfig(f"{name} must lie in (0,1), got {v}")
        if self.tol <= 0 or self.match_tol <= 0:
            raise InvalidConfig("tolerances must be positive")

    def params(self) -> SourceParams:
        return SourceParams.from_moduli(self.alpha2, self.gamma2, self.phase_alpha, self.phase_gamma)


def _emit(text: str, cfg_output: str | None, out: TextIO) -> None:
    if cfg_output is None:
        out.write(text)
        return
    path = Path(cfg_output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(cfg: RunConfig, out: TextIO = sys.stdout) -> int:
    cfg.validate()
    p = cfg.params()
    rep = analysis.analytic_probs(p)
    run = run_protocol(p, cfg.protocol, cfg.match_tol)
    agg = run.aggregates
    counts = {c: len(run.of_class(c)) for c in (SUCCESS, RECYCLE, FAIL)}
    checks = {
        "completeness": abs(run.total_probability - 1) <= cfg.tol,
        "success_vs_p1": abs(agg[SUCCESS] - rep.p1) <= cfg.tol,
        "recycle_vs_formula": abs(agg[RECYCLE] - rep.recycle_prob) <= cfg.tol,
        "success_feedforward": run.min_corrected_fidelity(SUCCESS) >= 1 - cfg.tol,
        "recycle_feedforward": run.min_corrected_fidelity(RECYCLE) >= 1 - cfg.tol,
    }
    report = {
        "protocol": cfg.protocol,
        "alpha2": cfg.alpha2,
        "gamma2": cfg.gamma2,
        "phase_alpha": cfg.phase_alpha,
        "phase_gamma": cfg.phase_gamma,
        "p1": rep.p1,
        "recycle_prob": rep.recycle_prob,
        "p2": rep.p2,
        "sim_success": agg[SUCCESS],
        "sim_recycle": agg[RECYCLE],
        "sim_fail": agg[FAIL],
        "max_abs_deviation": max(abs(agg[SUCCESS] - rep.p1), abs(agg[RECYCLE] - rep.recycle_prob)),
        "outcomes": counts,
        "checks": checks,
    }
    if cfg.fmt == "json":
        text = json.dumps(report, indent=2) + "\n"
    elif cfg.fmt == "csv":
        flat = {k: v for k, v in report.items() if k not in ("outcomes", "checks")}
        flat.update({f"n_{k.lower()}": v for k, v in counts.items()})
        flat["checks_ok"] = all(checks.values())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(flat)
        w.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
        text = buf.getvalue()
    else:
        lines = [f"{k:<18} {v!r}" for k, v in report.items() if k not in ("outcomes", "checks")]
        lines.append("outcomes           " + ", ".join(f"{k} {v}" for k, v in counts.items()))
        lines.append("checks             " + ("ok" if all(checks.values()) else "FAILED: " + ", ".join(k for k, v in checks.items() if not v)))
        text = "\n".join(lines) + "\n"
    _emit(text, cfg.output, out)
    return EXIT_OK if all(checks.values()) else EXIT_INCONSISTENT


def cmd_table(cfg: RunConfig, compare_published: bool = False, out: TextIO = sys.stdout) -> int:
    cfg.validate()
    table = signature_table(run_protocol(cfg.params(), cfg.protocol, cfg.match_tol))
    if cfg.fmt == "json":
        text = table.to_json() + "\n"
    elif cfg.fmt == "csv":
        text = table.to_csv()
    else:
        cols = table.fields()
        recs = table.records()
        widths = {c: max(len(c), *(len(_cell(r[c])) for r in recs)) for c in cols}
        lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
        lines += ["  ".join(_cell(r[c]).ljust(widths[c]) for c in cols) for r in recs]
        text = "\n".join(lines) + "\n"
    status = EXIT_OK
    if compare_published:
        mapping = find_detector_bijection(table)
        if mapping is None:
            note = "published table comparison: no bijection found\n"
            status = EXIT_INCONSISTENT
        else:
            moved = " ".join(f"{k}->{v}" for k, v in mapping.items() if k != v) or "identity"
            note = f"published table comparison: bijection found ({moved})\n"
        if cfg.fmt in ("csv", "json") and cfg.output is None:
            text += note
        else:
            out.write(note)
    _emit(text, cfg.output, out)
    return status


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def cmd_sweep(step: float, protocol: str, fmt: str, output: str | None, out: TextIO = sys.stdout) -> int:
    try:
        rows = analysis.sweep(step, protocol)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    text = analysis.sweep_to_json(rows) + "\n" if fmt == "json" else analysis.sweep_to_csv(rows)
    _emit(text, output, out)
    worst = max(r.max_dev for r in rows)
    return EXIT_OK if worst <= 1e-9 else EXIT_INCONSISTENT


def cmd_verify(out: TextIO = sys.stdout) -> int:
    from .verification import verify_all

    results = verify_all()
    for c in results:
        out.write(c.line() + "\n")
    passed = sum(c.passed for c in results)
    out.write(f"{passed}/{len(results)} criteria passed\n")
    return EXIT_OK if passed == len(results) else EXIT_INCONSISTENT


def cmd_evolve(cfg: RunConfig, circuit_file: str, out: TextIO = sys.stdout) -> int:
    cfg.validate()
    try:
        circuit = parse_circuit(Path(circuit_file).read_text())
    except OSError as exc:
        raise InvalidConfig(f"cannot read circuit: {exc}") from None
    p = cfg.params()
    s = bell_input(p) if cfg.protocol == BELL else ghz_input(p)
    final = apply_circuit(s, circuit)
    lines = [f"# {len(circuit)} elements, {len(final)} terms, norm^2 {final.norm_sq!r}"]
    lines += [format_term(m, a) for m, a in final]
    _emit("\n".join(lines) + "\n", cfg.output, out)
    return EXIT_OK if abs(final.norm_sq - 1) <= cfg.tol else EXIT_INCONSISTENT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperecp", description="Linear-optics hyperentanglement concentration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, formats=("pretty", "json", "csv"), default="pretty"):
        sp.add_argument("--protocol", choices=(BELL, GHZ), default=BELL)
        sp.add_argument("--alpha2", type=float, default=0.5, help="|alpha|^2, in (0,1)")
        sp.add_argument("--gamma2", type=float, default=0.5, help="|gamma|^2, in (0,1)")
        sp.add_argument("--phase-alpha", type=float, default=0.0, help="arg(alpha) in radians")
        sp.add_argument("--phase-gamma", type=float, default=0.0, help="arg(gamma) in radians")
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--output", default=None)
        sp.add_argument("--tol", type=float, default=1e-9, help="probability tolerance for checks")
        sp.add_argument("--match-tol", type=float, default=MATCH_TOL, help="reference-matching tolerance")

    common(sub.add_parser("run", help="simulate one round and report probabilities"))
    tp = sub.add_parser("table", help="derive the detection-signature table")
    common(tp)
    tp.add_argument("--compare-paper", dest="compare_published", action="store_true", help="search for a detector relabelling onto the published table")
    sp = sub.add_parser("sweep", help="formula and simulation over a parameter grid")
    sp.add_argument("--step", type=float, default=0.05)
    sp.add_argument("--protocol", choices=(BELL, GHZ), default=BELL)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--output", default=None)
    sub.add_parser("verify", help="run every acceptance criterion")
    ep = sub.add_parser("evolve", help="push the source state through a circuit file")
    common(ep)
    ep.add_argument("--circuit", required=True, help="circuit in the line-oriented text format")
    return parser


def _config(args) -> RunConfig:
    return RunConfig(
        protocol=args.protocol,
        alpha2=args.alpha2,
        gamma2=args.gamma2,
        phase_alpha=args.phase_alpha,
        phase_gamma=args.phase_gamma,
        fmt=args.format,
        output=args.output,
        tol=args.tol,
        match_tol=args.match_tol,
    )


def main(argv: list[str] | None = None, out: TextIO = sys.stdout) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "run":
            return cmd_run(_config(args), out)
        if args.command == "table":
            return cmd_table(_config(args), args.compare_published, out)
        if args.command == "sweep":
            return cmd_sweep(args.step, args.protocol, args.format, args.output, out)
        if args.command == "verify":
            return cmd_verify(out)
        return cmd_evolve(_config(args), args.circuit, out)
    except (InvalidConfig, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ClassificationError as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
