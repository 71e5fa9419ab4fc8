"""Command-line runner: ``viscshock run | verify-lemmas | report``.

Exit codes of ``run``: 0 all enabled checks pass, 1 some check failed,
2 configuration error, 3 admissibility failure, 4 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import diagnostics as dg
from .config import ConfigError, load_config
from .dynamics import DynamicsError, InitialDataError, NumericalAbort, default_out_dir, run
from .flux import FluxError
from .profile import ProfileError

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_ABORT = 0, 1, 2, 3, 4

log = logging.getLogger("viscshock")


def _clean(x):
    """JSON-safe copy: non-finite floats become strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _set_threads(n: int | None) -> None:
    if n:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _print_summary(summary: dict, out=None) -> None:
    out = out or sys.stdout
    print(f"status: {summary['status']}", file=out)
    if summary.get("message"):
        print(f"message: {summary['message']}", file=out)
    for name, chk in summary["checks"].items():
        detail = ""
        if name == "decay":
            detail = f" slope={chk['slope']} envelope_max_ratio={chk['max_ratio']}"
        elif name == "xdot":
            detail = f" slope={chk['slope']} cs_ratio={chk['max_ratio_to_bound']}"
        elif name == "l1_bound":
            detail = f" x_bound_margin={chk['x_bound_margin']}"
        elif name == "sublinear_shift":
            detail = f" margin={chk['margin']}"
        elif name == "dissipation":
            detail = f" max_residual={chk['max_residual']}"
        print(f"{name}: {chk['status']}{detail}", file=out)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.initial.seed = args.seed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _set_threads(args.threads)
    out = Path(args.out) if args.out else default_out_dir(cfg)
    try:
        res = run(cfg, out, allow_inadmissible=args.allow_inadmissible)
    except dg.AdmissibilityError as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ProfileError, FluxError) as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (InitialDataError, dg.DiagnosticsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except DynamicsError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _print_summary(res.summary)
    print(f"output: {out}")
    if res.status != "completed":
        return EXIT_ABORT
    return EXIT_OK if res.summary["all_pass"] else EXIT_CHECK


def cmd_verify_lemmas(args) -> int:
    from .inequalities import LEMMA_GROUPS, InequalityError, run_lemma_suite
    skip = set(args.skip or [])
    if skip >= set(LEMMA_GROUPS) or args.n_random < 0:
        print("nothing to verify: every lemma group is skipped", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_lemma_suite(args.n_random, args.seed or 0, skip=skip,
                              inject_broken=args.inject_broken)
    except InequalityError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not rep.entries:
        print("nothing to verify: empty corpus", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(os.environ.get("VISCSHOCK_OUT", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    path = out / "lemma_report.json"
    path.write_text(json.dumps(_clean(rep.as_dict()), indent=2) + "\n")
    for e in rep.entries:
        if e["fixture"].startswith("trig_") and e["passed"] and "corpus" not in e["fixture"]:
            continue
        print(f"{e['lemma']}/{e['fixture']}: {'pass' if e['passed'] else 'FAIL'} "
              f"margin={e['margin']:.3e}")
    print(f"report: {path}")
    if rep.failures:
        names = ", ".join(f"{e['lemma']}/{e['fixture']}" for e in rep.failures)
        print(f"failing fixtures: {names}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def regenerate_summary(run_dir: str | Path, t_min: float | None = None):
    """Rebuild the summary of a finished (or aborted) run from its stored files."""
    from .config import parse_config
    d = Path(run_dir)
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise dg.DiagnosticsError(f"cannot read manifest in {d}: {exc}") from exc
    records = dg.read_csv(d / "diagnostics.csv")
    cfg = parse_config(manifest["config"])
    constants = dg.Constants.from_dict(manifest["constants"])
    status = manifest.get("status", "aborted")
    if status == "running":
        status = "aborted"
    return dg.build_summary(records, constants, manifest["tol_residual"],
                            cfg.fit.t_min if t_min is None else t_min,
                            status=status, message=manifest.get("message", ""),
                            disabled=cfg.checks.disable, tolerances=cfg.tolerances,
                            gn_constant=manifest.get("gn_constant")), records


def cmd_report(args) -> int:
    try:
        summary, records = regenerate_summary(args.run_dir, args.tmin)
    except (dg.DiagnosticsError, ConfigError, KeyError) as exc:
        print(f"cannot build report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    d = Path(args.run_dir)
    dg.write_summary(d, summary)
    dg.write_plot_data(d, records)
    if summary["status"] != "completed":
        print("partial report: run did not complete")
    _print_summary(summary)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="viscshock", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (default $VISCSHOCK_OUT/<name>)")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    r.add_argument("--allow-inadmissible", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify-lemmas", help="run the inequality suite")
    v.add_argument("--out")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--threads", type=int)
    v.add_argument("--n-random", type=int, default=1000)
    v.add_argument("--skip", action="append", choices=["poincare", "gn", "sandwich"])
    v.add_argument("--inject-broken", action="store_true")
    v.set_defaults(func=cmd_verify_lemmas)

    rp = sub.add_parser("report", help="rebuild summary from a run directory")
    rp.add_argument("run_dir")
    rp.add_argument("--tmin", type=float)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
