"""Campaign orchestration, persistence and reporting.

Layout under the campaign root::

    <root>/<campaign_id>/campaign.json
    <root>/<campaign_id>/cases/<level>/<case_id>/{source.c, unopt.trace.jsonl, opt.trace.jsonl,
                                                  violations.jsonl, status.json, executions.log, commands.jsonl}
    <root>/<campaign_id>/triage/clusters.jsonl

Per-case ``status.json`` files are the source of truth; ``campaign.json`` is
rebuilt from them by the coordinator, its only writer.
"""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import shutil
import tempfile
import time
import uuid
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .driver import DriverError, extract_trace
from .harness import (
    FilterVerdict,
    Harness,
    HarnessError,
    Provenance,
    TestCase,
    ToolchainConfig,
    slug,
    filter_ub,
    generate_case,
)
from .invariants import INVARIANT_ORDER, Invariant, ScopeMode, Violation, check_all, load_violations, save_violations
from .trace import load_trace, mask_pointer_values, save_trace
from .triage import (
    Cluster,
    Fingerprint,
    PredicateFlaky,
    ReducerFailure,
    cluster_cases,
    config_from_snapshot,
    fingerprint_case,
    read_clusters,
    reduce_representative,
    write_clusters,
)

log = logging.getLogger(__name__)

RECORD_VERSION = 1
REPORT_COLUMNS = (Invariant.LI, Invariant.SI, Invariant.BI, Invariant.PI)

CANARY_SOURCE = """int g = 1;
int main(void) {
  int x = g + 1;
  return x - 2;
}
"""


class CampaignError(Exception):
    pass


class CanaryFailure(CampaignError):
    pass


class PersistenceError(CampaignError):
    pass


class UnknownCampaign(CampaignError):
    pass


class CaseStatus(str, enum.Enum):
    CLEAN = "clean"
    VIOLATING = "violating"
    REJECTED_UB = "rejected_ub"
    ERROR = "error"


@dataclass
class CaseOutcome:
    case_id: str
    level: str
    status: CaseStatus
    violations: dict[str, int] = field(default_factory=dict)
    occurrences: dict[str, int] = field(default_factory=dict)
    fingerprint: list[str] | None = None
    timings: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    ub_filter: str | None = None
    error: str | None = None

    def __post_init__(self) -> None:
        self.status = CaseStatus(self.status)
        for counts in (self.violations, self.occurrences):
            for key in counts:
                Invariant(key)

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["status"] = self.status.value
        return rec

    @classmethod
    def from_record(cls, rec: Mapping) -> CaseOutcome:
        return cls(**dict(rec))


def compute_tallies(outcomes: Iterable[CaseOutcome]) -> dict:
    tallies: dict[str, dict] = {}
    for o in outcomes:
        t = tallies.setdefault(o.level, {"cases": {s.value: 0 for s in CaseStatus},
                                         "violations": {i.value: 0 for i in INVARIANT_ORDER}})
        t["cases"][o.status.value] += 1
        if o.status is CaseStatus.VIOLATING:
            for inv, n in o.violations.items():
                t["violations"][inv] += n
    return tallies


@dataclass
class CampaignRecord:
    campaign_id: str
    config: dict = field(default_factory=dict)
    seed: int = 0
    levels: list[str] = field(default_factory=list)
    outcomes: list[CaseOutcome] = field(default_factory=list)
    stop_reasons: dict[str, str] = field(default_factory=dict)
    cluster_seed: int | None = None

    @property
    def tallies(self) -> dict:
        return compute_tallies(self.outcomes)

    def to_record(self) -> dict:
        return {
            "version": RECORD_VERSION,
            "campaign_id": self.campaign_id,
            "config": self.config,
            "seed": self.seed,
            "levels": self.levels,
            "stop_reasons": self.stop_reasons,
            "cluster_seed": self.cluster_seed,
            "outcomes": [o.to_record() for o in self.outcomes],
            "tallies": self.tallies,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> CampaignRecord:
        try:
            record = cls(
                campaign_id=rec["campaign_id"],
                config=rec.get("config", {}),
                seed=rec.get("seed", 0),
                levels=list(rec.get("levels", [])),
                outcomes=[CaseOutcome.from_record(o) for o in rec.get("outcomes", [])],
                stop_reasons=dict(rec.get("stop_reasons", {})),
                cluster_seed=rec.get("cluster_seed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PersistenceError(f"malformed campaign record: {exc}") from exc
        if rec.get("tallies") != record.tallies:
            raise PersistenceError("stored tallies do not match the per-case outcomes")
        return record

    def outcome(self, case_id: str) -> CaseOutcome:
        for o in self.outcomes:
            if o.case_id == case_id:
                return o
        raise KeyError(case_id)


def write_json_atomic(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fp:
        json.dump(data, fp, indent=1, sort_keys=True)
        fp.flush()
        os.fsync(fp.fileno())
    os.replace(tmp, path)


def save_record(campaign_dir: Path, record: CampaignRecord) -> None:
    write_json_atomic(campaign_dir / "campaign.json", record.to_record())


def load_record(campaign_dir: Path) -> CampaignRecord:
    path = campaign_dir / "campaign.json"
    if not path.is_file():
        raise UnknownCampaign(str(campaign_dir))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(f"{path}: {exc}") from exc
    return CampaignRecord.from_record(data)


def campaign_path(root: str | Path, campaign_id: str) -> Path:
    return Path(root) / campaign_id


# -- one case ------------------------------------------------------------------


def case_seed(seed: int, level: str, index: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{level}:{index}".encode(), digest_size=4).digest()
    return int.from_bytes(digest, "big") & 0x7FFFFFFF


def case_id_for(level: str, index: int) -> str:
    return f"{slug(level)}-{index:05d}"


@dataclass(frozen=True)
class CaseJob:
    campaign_dir: str
    config: dict
    level: str
    index: int
    seed: int
    allow_same_level: bool = False
    keep_binaries: bool = False
    fingerprint: bool = True

    @property
    def case_id(self) -> str:
        return case_id_for(self.level, self.index)

    @property
    def case_dir(self) -> Path:
        return Path(self.campaign_dir) / "cases" / slug(self.level) / self.case_id


def _mark(case_dir: Path, what: str) -> None:
    with open(case_dir / "executions.log", "a", encoding="utf-8") as fp:
        fp.write(f"{what} {time.time():.3f} {os.getpid()}\n")
        fp.flush()
        os.fsync(fp.fileno())


def run_case(job: CaseJob) -> CaseOutcome:
    """Generate, filter, build, trace, check and fingerprint one case."""
    config = config_from_snapshot(job.config)
    case_dir = job.case_dir
    case_dir.mkdir(parents=True, exist_ok=True)
    _mark(case_dir, "start")
    outcome = CaseOutcome(job.case_id, job.level, CaseStatus.ERROR, seed=job.seed)
    timings = outcome.timings
    clock = time.monotonic()

    def lap(name: str) -> None:
        nonlocal clock
        now = time.monotonic()
        timings[name] = round(now - clock, 4)
        clock = now

    try:
        case = generate_case(config, job.seed, case_dir, job.case_id)
        lap("generate")
        verdict = filter_ub(case, config)
        outcome.ub_filter = verdict.value
        lap("filter")
        if verdict is FilterVerdict.REJECTED:
            outcome.status = CaseStatus.REJECTED_UB
        else:
            harness = Harness(config)
            unopt_bin, opt_bin = harness.build_pair(case, job.level, allow_same_level=job.allow_same_level)
            lap("build")
            t_unopt = mask_pointer_values(extract_trace(unopt_bin, config.debugger, f"{job.case_id}{config.baseline}"))
            t_opt = mask_pointer_values(extract_trace(opt_bin, config.debugger, f"{job.case_id}{job.level}"))
            save_trace(t_unopt, case_dir / "unopt.trace.jsonl")
            save_trace(t_opt, case_dir / "opt.trace.jsonl")
            lap("trace")
            found = check_all(t_opt, t_unopt, job.case_id, config.scope_mode)
            save_violations(case_dir / "violations.jsonl", found)
            lap("check")
            for v in found:
                key = v.invariant.value
                outcome.violations[key] = outcome.violations.get(key, 0) + 1
                outcome.occurrences[key] = outcome.occurrences.get(key, 0) + v.occurrences
            outcome.status = CaseStatus.VIOLATING if found else CaseStatus.CLEAN
            if found and job.fingerprint:
                fp = fingerprint_case(case, job.level, config)
                outcome.fingerprint = list(fp.entries)
                lap("fingerprint")
    except (HarnessError, DriverError, OSError, ValueError) as exc:
        outcome.status = CaseStatus.ERROR
        outcome.error = f"{type(exc).__name__}: {exc}"
        log.warning("%s: %s", job.case_id, outcome.error)
    finally:
        if not job.keep_binaries:
            shutil.rmtree(case_dir / "build", ignore_errors=True)
    write_json_atomic(case_dir / "status.json", outcome.to_record())
    _mark(case_dir, "done")
    return outcome


def read_status(case_dir: Path) -> CaseOutcome | None:
    path = case_dir / "status.json"
    if not path.is_file():
        return None
    try:
        return CaseOutcome.from_record(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise PersistenceError(f"{path}: {exc}") from exc


def collect_outcomes(campaign_dir: Path) -> list[CaseOutcome]:
    outcomes = []
    for status in sorted((campaign_dir / "cases").glob("*/*/status.json")):
        o = read_status(status.parent)
        if o is not None:
            outcomes.append(o)
    return outcomes


# -- campaign ------------------------------------------------------------------


def run_canary(config: ToolchainConfig, level: str, workdir: Path, allow_same_level: bool = False) -> None:
    """Compile and trace a trivial program before spending any budget."""
    canary_dir = workdir / "canary"
    shutil.rmtree(canary_dir, ignore_errors=True)
    canary_dir.mkdir(parents=True)
    src = canary_dir / "canary.c"
    src.write_text(CANARY_SOURCE, encoding="utf-8")
    try:
        case = TestCase("canary", src, Provenance.IMPORTED)
        unopt, opt = Harness(config).build_pair(case, level, allow_same_level=allow_same_level)
        for binary in (unopt, opt):
            if not extract_trace(binary, config.debugger).steps:
                raise CanaryFailure(f"canary trace of {binary.name} is empty")
    except (HarnessError, DriverError, OSError) as exc:
        raise CanaryFailure(f"{type(exc).__name__}: {exc}") from exc
    finally:
        shutil.rmtree(canary_dir, ignore_errors=True)


def _init_record(campaign_dir: Path, campaign_id: str, config: ToolchainConfig, seed: int,
                 levels: Sequence[str]) -> CampaignRecord:
    if (campaign_dir / "campaign.json").is_file():
        record = load_record(campaign_dir)
        if record.seed != seed:
            log.warning("resuming %s with its stored seed %d (ignoring %d)", campaign_id, record.seed, seed)
        for lvl in levels:
            if lvl not in record.levels:
                record.levels.append(lvl)
    else:
        record = CampaignRecord(campaign_id, config.snapshot(), seed, list(levels))
    record.outcomes = collect_outcomes(campaign_dir)
    return record


def run_campaign(
    config: ToolchainConfig,
    root: str | Path,
    campaign_id: str | None = None,
    levels: Sequence[str] | None = None,
    cases: int = 100,
    hours: float | None = None,
    workers: int | None = None,
    seed: int = 0,
    keep_binaries: bool = False,
    fingerprint: bool = True,
    allow_same_level: bool = False,
) -> CampaignRecord:
    """Run ``cases`` generated cases per level, resuming any completed ones.

    A level stops at whichever budget trips first.  ``allow_same_level``
    permits testing the baseline against itself.
    """
    campaign_id = campaign_id or time.strftime("%Y%m%d-%H%M%S-") + uuid.uuid4().hex[:6]
    levels = list(levels) if levels is not None else list(config.levels)
    for lvl in levels:
        if lvl == config.baseline and not allow_same_level:
            raise HarnessError(f"level {lvl} is the baseline")
        if lvl not in config.levels and lvl != config.baseline:
            raise HarnessError(f"level {lvl} is not configured")
    campaign_dir = campaign_path(root, campaign_id)
    campaign_dir.mkdir(parents=True, exist_ok=True)
    record = _init_record(campaign_dir, campaign_id, config, seed, levels)
    seed = record.seed
    save_record(campaign_dir, record)
    if cases <= 0 or not levels:
        return record

    run_canary(config, levels[0], campaign_dir, allow_same_level)
    snapshot = config.snapshot()
    deadline = time.monotonic() + hours * 3600 if hours is not None else None
    workers = workers or os.cpu_count() or 1
    done = {o.case_id for o in record.outcomes}

    def finish(outcome: CaseOutcome) -> None:
        record.outcomes = [o for o in record.outcomes if o.case_id != outcome.case_id] + [outcome]
        save_record(campaign_dir, record)

    def jobs_for(level: str):
        for index in range(cases):
            job = CaseJob(str(campaign_dir), snapshot, level, index, case_seed(seed, level, index),
                          allow_same_level, keep_binaries, fingerprint)
            if job.case_id not in done:
                yield job

    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for level in levels:
            reason = "cases"
            pending: set[Future] = set()
            for job in jobs_for(level):
                if deadline is not None and time.monotonic() >= deadline:
                    reason = "wall-clock"
                    break
                if pool is None:
                    finish(run_case(job))
                    continue
                pending.add(pool.submit(run_case, job))
                while len(pending) >= workers:
                    finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        finish(fut.result())
            for fut in pending:
                finish(fut.result())
            record.stop_reasons[level] = reason
            log.info("level %s stopped by the %s budget", level, reason)
            save_record(campaign_dir, record)
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return record


# -- offline check -----------------------------------------------------------------


def check_pair(opt_path: str | Path, unopt_path: str | Path, scope_mode: ScopeMode = ScopeMode.EXISTS,
               case_id: str = "") -> list[Violation]:
    t_opt = load_trace(opt_path)
    t_unopt = load_trace(unopt_path)
    return check_all(t_opt, t_unopt, case_id, scope_mode)


# -- triage over a campaign ---------------------------------------------------------


def triage_campaign(root: str | Path, campaign_id: str, seed: int | None = None, reduce: bool = False,
                    config: ToolchainConfig | None = None) -> list[Cluster]:
    campaign_dir = campaign_path(root, campaign_id)
    record = load_record(campaign_dir)
    fingerprints = {
        o.case_id: Fingerprint(tuple(o.fingerprint))
        for o in record.outcomes
        if o.status is CaseStatus.VIOLATING and o.fingerprint is not None
    }
    record.cluster_seed = record.seed if seed is None else seed
    clusters = cluster_cases(fingerprints, record.cluster_seed)
    if reduce:
        config = config or config_from_snapshot(record.config)
        reduced = []
        for cl in clusters:
            rep = record.outcome(cl.representative)
            case_dir = campaign_dir / "cases" / slug(rep.level) / rep.case_id
            first = load_violations(case_dir / "violations.jsonl")[0]
            try:
                path = reduce_representative(cl, config, case_dir / "source.c", rep.level, first.invariant,
                                             campaign_dir / "triage" / rep.case_id)
                cl = Cluster(cl.fingerprint, cl.case_ids, cl.representative, path)
            except (ReducerFailure, PredicateFlaky) as exc:
                log.warning("cluster %s: reduction failed: %s", cl.fingerprint, exc)
            reduced.append(cl)
        clusters = reduced
    write_clusters(campaign_dir / "triage" / "clusters.jsonl", clusters)
    save_record(campaign_dir, record)
    return clusters


# -- reporting ---------------------------------------------------------------------


def level_summary(record: CampaignRecord) -> list[dict]:
    """Per level: raw violations and distinct fingerprints per invariant, plus all-invariant uniques."""
    levels = list(record.levels)
    for o in record.outcomes:
        if o.level not in levels:
            levels.append(o.level)
    tallies = record.tallies
    rows = []
    for level in levels:
        violating = [o for o in record.outcomes if o.level == level and o.status is CaseStatus.VIOLATING]
        raw = {inv.value: 0 for inv in INVARIANT_ORDER}
        unique_sets: dict[str, set] = {inv.value: set() for inv in INVARIANT_ORDER}
        total: set = set()
        for o in violating:
            fp = tuple(o.fingerprint) if o.fingerprint is not None else None
            for inv, n in o.violations.items():
                raw[inv] += n
                if n and fp is not None:
                    unique_sets[inv].add(fp)
            if fp is not None and any(o.violations.values()):
                total.add(fp)
        cases = tallies.get(level, {"cases": {s.value: 0 for s in CaseStatus}})["cases"]
        rows.append({
            "level": level,
            "raw": raw,
            "unique": {k: len(v) for k, v in unique_sets.items()},
            "total_unique": len(total),
            "cases": dict(cases),
        })
    return rows


def render_text(record: CampaignRecord, clusters: Sequence[Cluster] = ()) -> str:
    rows = level_summary(record)
    header = ["level"] + [inv.value for inv in REPORT_COLUMNS] + ["unique", "clean", "violating", "rejected", "error"]
    table = [header]
    for r in rows:
        table.append(
            [r["level"]]
            + [f"{r['raw'][inv.value]} / {r['unique'][inv.value]}" for inv in REPORT_COLUMNS]
            + [str(r["total_unique"])]
            + [str(r["cases"][s.value]) for s in CaseStatus]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = [f"campaign {record.campaign_id}", "violations (raw / unique fingerprints)"]
    for n, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    if clusters:
        lines.append("")
        lines.append(f"clusters ({len(clusters)})")
        for cl in sorted(clusters, key=lambda c: (-c.size, c.fingerprint.entries)):
            reduced = f"  reduced: {cl.reduced_source}" if cl.reduced_source else ""
            lines.append(f"  {cl.fingerprint}  size {cl.size}  representative {cl.representative}{reduced}")
    return "\n".join(lines) + "\n"


def render_records(record: CampaignRecord, clusters: Sequence[Cluster] = ()) -> str:
    out = [json.dumps({"kind": "level", **row}, sort_keys=True) for row in level_summary(record)]
    out += [json.dumps({"kind": "cluster", **cl.record()}, sort_keys=True) for cl in clusters]
    return "\n".join(out) + ("\n" if out else "")


def report(root: str | Path, campaign_id: str, fmt: str = "text") -> str:
    campaign_dir = campaign_path(root, campaign_id)
    if not campaign_dir.is_dir():
        raise UnknownCampaign(campaign_id)
    record = load_record(campaign_dir)
    if (campaign_dir / "cases").is_dir():
        stored = collect_outcomes(campaign_dir)
        if {o.case_id for o in stored} != {o.case_id for o in record.outcomes}:
            # an interrupted run: per-case files win
            record.outcomes = stored
    cpath = campaign_dir / "triage" / "clusters.jsonl"
    clusters = read_clusters(cpath) if cpath.is_file() else []
    if fmt == "text":
        return render_text(record, clusters)
    if fmt == "records":
        return render_records(record, clusters)
    raise ValueError(f"unknown report format {fmt!r}")
