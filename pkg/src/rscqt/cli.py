"""Command line entry point (``rscqt``).

Exit codes: 0 success, 1 invalid input, 2 file-system error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .design import FiducialDesign, SequenceSet, build_scic, is_scic
from .estimator import RegularizationConfig, estimate
from .gauge import gauge_optimize
from .harness import StudyConfig, rows_to_csv, run_study
from .serialization import gateset_from_json, gateset_to_json, load_gateset, load_json, save_json
from .simulator import dataset_from_csv, dataset_to_csv, frequencies, probabilities, sample

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _cmd_design(args) -> dict:
    s = load_gateset(args.gateset)
    fd = FiducialDesign.from_json(load_json(args.fiducials))
    ids = build_scic(fd)
    report = is_scic(ids, fd, s, args.rank_tol)
    save_json(ids.to_json(), args.out)
    if args.report:
        save_json(report.to_json(), args.report)
    return {"sequences": len(ids), "is_scic": report.is_scic}


def _cmd_simulate(args) -> dict:
    s = load_gateset(args.gateset, require_physical=True)
    ids = SequenceSet.from_json(load_json(args.design))
    ds = sample(probabilities(s, ids), args.shots, args.seed)
    Path(args.out).write_text(dataset_to_csv(ds))
    return {"sequences": len(ids), "shots": args.shots}


def _regularization_config(args) -> RegularizationConfig:
    if args.r_schedule == "fixed":
        if args.r is None:
            raise ValueError("--r is required with --r-schedule fixed")
        return RegularizationConfig("fixed", r=args.r)
    grid = tuple(args.grid) if args.grid else RegularizationConfig.grid
    if args.r_schedule == "cross_validated" or args.c == "auto":
        return RegularizationConfig("cross_validated", folds=args.folds, grid=grid, seed=args.seed)
    try:
        c = float(args.c)
    except ValueError:
        raise ValueError(f"--c must be 'auto' or a number, got {args.c!r}") from None
    return RegularizationConfig("c_over_N", c=c)


def _cmd_estimate(args) -> dict:
    ds = dataset_from_csv(Path(args.data).read_text())
    ids = SequenceSet.from_json(load_json(args.design))
    target = load_gateset(args.target, require_physical=True)
    fd = FiducialDesign.from_json(load_json(args.fiducials)) if args.fiducials else None
    res = estimate(frequencies(ds), ids, target, _regularization_config(args), fiducials=fd)
    save_json({"gateset": gateset_to_json(res.estimate), "diagnostics": res.to_json()}, args.out)
    return res.to_json()


def _load_estimate_or_gateset(path):
    obj = load_json(path)
    if isinstance(obj, dict) and "gateset" in obj:
        obj = obj["gateset"]
    return gateset_from_json(obj)


def _cmd_gauge_distance(args) -> dict:
    a = _load_estimate_or_gateset(args.a)
    b = _load_estimate_or_gateset(args.b)
    fd = FiducialDesign.from_json(load_json(args.fiducials)) if args.fiducials else None
    out = gauge_optimize(a, b, fd).to_json()
    save_json(out, args.out)
    return {k: out[k] for k in ("distance", "residual", "converged")}


def _cmd_study(args) -> dict:
    cfg_path = Path(args.config)
    cfg = StudyConfig.from_json(load_json(cfg_path), base_dir=cfg_path.parent)
    if args.workers is not None:
        cfg.workers = args.workers
    result = run_study(cfg)
    out = Path(args.out or cfg.output or "study.csv")
    out.write_text(rows_to_csv(result.rows, cfg.record_runtime))
    summary_path = Path(args.summary) if args.summary else out.with_name(out.stem + "_summary.json")
    save_json(result.summary, summary_path)
    return {"rows": len(result.rows), "report": str(out), "summary": str(summary_path)}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rscqt", description="Regularized self-consistent gate-set tomography.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("design", help="build the SCIC sequence set for a fiducial design")
    d.add_argument("--gateset", required=True, help="gate set used to check completeness (normally the target)")
    d.add_argument("--fiducials", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--report", help="completeness report JSON")
    d.add_argument("--rank-tol", type=float, default=1e-8)
    d.set_defaults(func=_cmd_design)

    s = sub.add_parser("simulate", help="sample multinomial counts from a gate set")
    s.add_argument("--gateset", required=True)
    s.add_argument("--design", required=True)
    s.add_argument("--shots", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("estimate", help="regularized self-consistent estimate from count data")
    e.add_argument("--data", required=True)
    e.add_argument("--design", required=True)
    e.add_argument("--target", required=True)
    e.add_argument("--fiducials", help="fiducial design JSON, enables the linear-inversion start")
    e.add_argument("--r-schedule", choices=("fixed", "c_over_N", "cross_validated"), default="c_over_N")
    e.add_argument("--r", type=float)
    e.add_argument("--c", default="auto", help="constant in r = c/N, or 'auto' for cross validation")
    e.add_argument("--folds", type=int, default=5)
    e.add_argument("--grid", type=float, nargs="+")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_estimate)

    g = sub.add_parser("gauge-distance", help="squared distance from one gate set to another's gauge orbit")
    g.add_argument("--a", required=True)
    g.add_argument("--b", required=True)
    g.add_argument("--fiducials")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gauge_distance)

    st = sub.add_parser("study", help="run a convergence study from a config file")
    st.add_argument("--config", required=True)
    st.add_argument("--out", help="report CSV (defaults to the config's output)")
    st.add_argument("--summary", help="summary JSON (defaults next to the report)")
    st.add_argument("--workers", type=int)
    st.set_defaults(func=_cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"rscqt: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        info = args.func(args)
    except OSError as exc:
        print(f"rscqt: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError) as exc:
        print(f"rscqt: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(info))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
