"""Command-line entry point.

Exit codes: 0 success, 1 violations found (check-pair), 2 usage,
configuration or schema error, 3 toolchain or canary failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path

from .campaign import (
    CampaignError,
    CanaryFailure,
    PersistenceError,
    UnknownCampaign,
    check_pair,
    report,
    run_campaign,
    triage_campaign,
)
from .driver import DriverError
from .harness import (
    ConfigInvalid,
    GeneratorFailure,
    HarnessError,
    Provenance,
    TestCase,
    generate_case,
    load_config,
)
from .invariants import ScopeMode, save_violations, violation_record
from .trace import SchemaError
from .triage import fingerprint_case

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_TOOLCHAIN = 0, 1, 2, 3

log = logging.getLogger("dbgdiff")


def _levels(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def cmd_gen(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    for i in range(args.count):
        seed = args.seed + i
        case = generate_case(config, seed, out / f"seed-{seed}", f"seed-{seed}")
        print(case.source)
    return EXIT_OK


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.check_tools:
        config.check_tools()
    record = run_campaign(
        config,
        args.root,
        campaign_id=args.campaign,
        levels=_levels(args.levels),
        cases=args.cases,
        hours=args.hours,
        workers=args.workers,
        seed=args.seed,
        keep_binaries=args.keep_binaries,
        fingerprint=not args.no_fingerprint,
        allow_same_level=args.allow_same_level,
    )
    print(f"campaign {record.campaign_id}: {len(record.outcomes)} cases recorded under {Path(args.root) / record.campaign_id}")
    return EXIT_OK


def cmd_check_pair(args) -> int:
    found = check_pair(args.opt, args.unopt, ScopeMode(args.scope_mode), args.case_id)
    if args.out:
        save_violations(args.out, found)
    for v in found:
        print(json.dumps(violation_record(v), sort_keys=True))
    return EXIT_VIOLATIONS if found else EXIT_OK


def cmd_fingerprint(args) -> int:
    config = load_config(args.config)
    with tempfile.TemporaryDirectory(prefix="dbgdiff-fp-") as tmp:
        work = Path(tmp) / "source.c"
        shutil.copyfile(args.source, work)
        case = TestCase(Path(args.source).stem, work, Provenance.IMPORTED)
        fp = fingerprint_case(case, args.level, config)
    print(json.dumps(list(fp.entries)))
    return EXIT_OK


def cmd_triage(args) -> int:
    config = load_config(args.config) if args.config else None
    clusters = triage_campaign(args.root, args.campaign, args.seed, args.reduce, config)
    for cl in clusters:
        print(json.dumps(cl.record(), sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    sys.stdout.write(report(args.root, args.campaign, args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dbgdiff", description="Differential testing of debug information.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate test cases")
    g.add_argument("--config", required=True)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="cases")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a campaign")
    r.add_argument("--config", required=True)
    r.add_argument("--root", default="campaigns")
    r.add_argument("--campaign", help="campaign id; an existing id resumes")
    r.add_argument("--levels", help="comma-separated optimization flags (default: configured levels)")
    r.add_argument("--cases", type=int, default=100, help="cases per level")
    r.add_argument("--hours", type=float, default=None, help="wall-clock budget")
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--keep-binaries", action="store_true")
    r.add_argument("--no-fingerprint", action="store_true", help="skip pass bisection of violating cases")
    r.add_argument("--allow-same-level", action="store_true", help=argparse.SUPPRESS)
    r.add_argument("--check-tools", action="store_true", help="verify configured executables exist first")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check-pair", help="check two recorded traces")
    c.add_argument("opt")
    c.add_argument("unopt")
    c.add_argument("--scope-mode", choices=[m.value for m in ScopeMode], default=ScopeMode.EXISTS.value)
    c.add_argument("--case-id", default="")
    c.add_argument("--out")
    c.set_defaults(func=cmd_check_pair)

    f = sub.add_parser("fingerprint", help="fingerprint one source file")
    f.add_argument("source")
    f.add_argument("--config", required=True)
    f.add_argument("--level", required=True)
    f.set_defaults(func=cmd_fingerprint)

    t = sub.add_parser("triage", help="cluster a campaign's violating cases")
    t.add_argument("--root", default="campaigns")
    t.add_argument("--campaign", required=True)
    t.add_argument("--seed", type=int, default=None, help="representative selection seed")
    t.add_argument("--reduce", action="store_true", help="reduce each representative")
    t.add_argument("--config", help="override the stored configuration")
    t.set_defaults(func=cmd_triage)

    rep = sub.add_parser("report", help="summarize a campaign")
    rep.add_argument("--root", default="campaigns")
    rep.add_argument("--campaign", required=True)
    rep.add_argument("--format", choices=["text", "records"], default="text")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigInvalid, SchemaError, UnknownCampaign, PersistenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CanaryFailure, GeneratorFailure, HarnessError, DriverError, CampaignError, OSError) as exc:
        print(f"toolchain error: {exc}", file=sys.stderr)
        return EXIT_TOOLCHAIN


if __name__ == "__main__":
    sys.exit(main())
