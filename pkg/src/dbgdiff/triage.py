"""Violation triage: pass-limit bisection, fingerprints, clustering, reduction."""
from __future__ import annotations

import json
import logging
import os
import random
import shutil
import stat
import subprocess
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Collection, Hashable, Iterable, Mapping, Protocol, Sequence

from .driver import DebuggerSession, DriverError, extract_trace
from .harness import (
    FilterVerdict,
    Harness,
    HarnessError,
    Provenance,
    TestCase,
    ToolchainConfig,
    VersionDescriptor,
    filter_ub,
    render,
)
from .invariants import Invariant, check_all
from .trace import Trace, mask_pointer_values

log = logging.getLogger(__name__)

NO_VIOLATION = "<no-violation>"
UNSUPPORTED = "<unsupported>"
# a violation already present with every bisectable pass disabled
UNATTRIBUTED = "<unattributed>"
MARKERS = frozenset({NO_VIOLATION, UNSUPPORTED, UNATTRIBUTED})


class TriageError(Exception):
    pass


class BisectAborted(TriageError):
    def __init__(self, label: str, reason: str):
        super().__init__(f"{label}: {reason}")
        self.label = label


class ReducerFailure(TriageError):
    pass


class PredicateFlaky(TriageError):
    pass


@dataclass(frozen=True)
class Fingerprint:
    entries: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __str__(self) -> str:
        return "[" + ", ".join(self.entries) + "]"


@dataclass(frozen=True)
class Cluster:
    fingerprint: Fingerprint
    case_ids: frozenset[str]
    representative: str
    reduced_source: Path | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "case_ids", frozenset(self.case_ids))
        if not self.case_ids:
            raise ValueError("a cluster needs at least one case")
        if self.representative not in self.case_ids:
            raise ValueError("representative must belong to the cluster")

    @property
    def size(self) -> int:
        return len(self.case_ids)

    def record(self) -> dict:
        return {
            "fingerprint": list(self.fingerprint.entries),
            "size": self.size,
            "representative": self.representative,
            "cases": sorted(self.case_ids),
            "reduced": str(self.reduced_source) if self.reduced_source else None,
        }

    @classmethod
    def from_record(cls, rec: Mapping) -> Cluster:
        return cls(Fingerprint(rec["fingerprint"]), frozenset(rec["cases"]), rec["representative"],
                   Path(rec["reduced"]) if rec.get("reduced") else None)


# -- bisection ---------------------------------------------------------------


class BisectTarget(Protocol):
    """A buildable configuration whose violations depend on a pass limit."""

    def pass_names(self) -> Sequence[str]:
        """Pass executions in order; limit N enables the first N of them."""
        ...

    def violations(self, limit: int | None) -> Collection[Hashable]:
        """Identities of the violations when building with ``limit`` passes (None: no limit)."""
        ...


@dataclass
class BisectResult:
    entry: str
    limit: int | None = None
    probes: list[int | None] = field(default_factory=list)
    fell_back: bool = False


def bisect_pass_limit(target: BisectTarget) -> BisectResult:
    """Find the minimal N >= 1 whose build violates.

    Violations already present at limit 0 do not depend on any pass and are
    discounted.  Binary search assumes monotonicity, then confirms N violates
    and N-1 does not; if that fails a linear scan from 1 decides.
    """
    probes: list[int | None] = []
    seen: dict[int | None, frozenset] = {}

    def found(limit: int | None) -> frozenset:
        if limit not in seen:
            probes.append(limit)
            seen[limit] = frozenset(target.violations(limit))
        return seen[limit]

    if not found(None):
        return BisectResult(NO_VIOLATION, None, probes)
    names = list(target.pass_names())
    n = len(names)
    if n == 0:
        return BisectResult(UNATTRIBUTED, None, probes)
    base = found(0)
    if not found(None) - base:
        return BisectResult(UNATTRIBUTED, 0, probes)

    def probe(limit: int) -> bool:
        return bool(found(limit) - base)

    lo, hi = 1, n  # pred(lo-1) false; pred(hi) assumed from the unlimited build
    while lo < hi:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid + 1
    if probe(lo) and not probe(lo - 1):
        return BisectResult(names[lo - 1], lo, probes)
    log.info("pass-limit predicate is not monotone; scanning linearly")
    for k in range(1, n + 1):
        if probe(k):
            return BisectResult(names[k - 1], k, probes, fell_back=True)
    # only the unlimited build violates
    return BisectResult(UNATTRIBUTED, None, probes, fell_back=True)


def violation_identity(v) -> tuple:
    """Build-independent identity: step indices differ between builds, evidence does not."""
    return (v.invariant, v.evidence)


class ToolchainTarget:
    """Bisect target that compiles and traces a real case for one version."""

    def __init__(self, config: ToolchainConfig, case: TestCase, opt_flag: str, version: VersionDescriptor):
        self.config = config
        self.harness = Harness(config)
        self.case = case
        self.opt_flag = opt_flag
        self.version = version
        self._baseline: Trace | None = None

    def _trace(self, binary: Path) -> Trace:
        return mask_pointer_values(extract_trace(binary, self.config.debugger, binary.name))

    def baseline(self) -> Trace:
        if self._baseline is None:
            binary = self.harness.compile(self.case, self.config.baseline, self.version, tag="unopt")
            self._baseline = self._trace(binary)
        return self._baseline

    def pass_names(self) -> list[str]:
        return self.harness.pass_names(self.case, self.opt_flag, self.version)

    def check(self, limit: int | None) -> list:
        binary = self.harness.compile(self.case, self.opt_flag, self.version, limit, tag="bisect")
        opt = self._trace(binary)
        return check_all(opt, self.baseline(), self.case.id, self.config.scope_mode)

    def violations(self, limit: int | None) -> frozenset:
        return frozenset(violation_identity(v) for v in self.check(limit))


TargetFactory = Callable[[TestCase, str, VersionDescriptor], BisectTarget]


def fingerprint_versions(config: ToolchainConfig) -> tuple[VersionDescriptor, ...]:
    """Versions forming the fingerprint; the main toolchain alone when none are listed."""
    return config.versions or (config.main_version,)


def main_version_index(config: ToolchainConfig) -> int | None:
    for i, v in enumerate(fingerprint_versions(config)):
        if v.label == config.label:
            return i
    return None


def bisect_version(
    case: TestCase,
    opt_flag: str,
    version: VersionDescriptor,
    config: ToolchainConfig,
    target_factory: TargetFactory | None = None,
) -> BisectResult:
    if not version.can_bisect:
        return BisectResult(UNSUPPORTED)
    target = (target_factory or (lambda c, o, v: ToolchainTarget(config, c, o, v)))(case, opt_flag, version)
    try:
        return bisect_pass_limit(target)
    except (HarnessError, DriverError, OSError) as exc:
        raise BisectAborted(version.label, str(exc)) from exc


def first_violating_pass(
    case: TestCase,
    opt_flag: str,
    version: VersionDescriptor,
    config: ToolchainConfig,
    target_factory: TargetFactory | None = None,
) -> str:
    return bisect_version(case, opt_flag, version, config, target_factory).entry


def fingerprint_case(
    case: TestCase,
    opt_flag: str,
    config: ToolchainConfig,
    target_factory: TargetFactory | None = None,
) -> Fingerprint:
    entries = []
    for version in fingerprint_versions(config):
        try:
            entries.append(first_violating_pass(case, opt_flag, version, config, target_factory))
        except BisectAborted as exc:
            log.warning("%s: bisect aborted, recording %s: %s", case.id, UNSUPPORTED, exc)
            entries.append(UNSUPPORTED)
    return Fingerprint(tuple(entries))


# -- clustering ----------------------------------------------------------------


def cluster_cases(fingerprints: Mapping[str, Fingerprint], seed: int = 0) -> list[Cluster]:
    """Group cases by identical fingerprint; representatives drawn with ``seed``."""
    groups: dict[Fingerprint, list[str]] = {}
    for case_id, fp in fingerprints.items():
        groups.setdefault(fp, []).append(case_id)
    rng = random.Random(seed)
    clusters = []
    for fp in sorted(groups, key=lambda f: f.entries):
        ids = sorted(groups[fp])
        clusters.append(Cluster(fp, frozenset(ids), rng.choice(ids)))
    return clusters


def write_clusters(path: str | Path, clusters: Iterable[Cluster]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fp:
        for c in clusters:
            fp.write(json.dumps(c.record()) + "\n")
    os.replace(tmp, path)


def read_clusters(path: str | Path) -> list[Cluster]:
    with open(path, encoding="utf-8") as fp:
        return [Cluster.from_record(json.loads(line)) for line in fp if line.strip()]


# -- reduction -------------------------------------------------------------------


def config_from_snapshot(data: Mapping) -> ToolchainConfig:
    data = dict(data)
    data["debugger"] = DebuggerSession(**{**data["debugger"], "extra_args": tuple(data["debugger"]["extra_args"])})
    data["versions"] = tuple(VersionDescriptor(**v) for v in data.get("versions", ()))
    data["levels"] = tuple(data["levels"])
    return ToolchainConfig(**data)


PREDICATE_TEMPLATE = """#!{python}
import sys
sys.path.insert(0, {pkg_root!r})
from dbgdiff.triage import predicate_main
sys.exit(predicate_main({spec!r}, sys.argv[1:]))
"""


@dataclass(frozen=True)
class PredicateSpec:
    config: dict
    opt_flag: str
    invariant: str
    main_entry: str | None
    source_name: str

    def dump(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> PredicateSpec:
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def is_interesting(src: Path, spec: PredicateSpec) -> bool:
    """Does ``src`` still show the target invariant (and, when known, the same main-version entry)?"""
    config = config_from_snapshot(spec.config)
    with tempfile.TemporaryDirectory(prefix="dbgdiff-pred-") as tmp:
        work = Path(tmp) / "source.c"
        try:
            shutil.copyfile(src, work)
            case = TestCase("candidate", work, Provenance.IMPORTED)
        except (OSError, ValueError):
            return False
        if filter_ub(case, config) is FilterVerdict.REJECTED:
            return False
        main = config.main_version
        target = ToolchainTarget(config, case, spec.opt_flag, main)
        try:
            found = target.check(None)
        except (HarnessError, DriverError):
            return False
        if not any(v.invariant.value == spec.invariant for v in found):
            return False
        if spec.main_entry is None or spec.main_entry in (UNSUPPORTED,) or not main.can_bisect:
            return True
        try:
            return bisect_pass_limit(target).entry == spec.main_entry
        except (HarnessError, DriverError):
            return False


def predicate_main(spec_path: str, argv: Sequence[str]) -> int:
    """Entry point of a generated predicate script: exit 0 when interesting."""
    spec = PredicateSpec.load(spec_path)
    src = Path(argv[0]) if argv else Path.cwd() / spec.source_name
    logging.basicConfig(level=logging.ERROR)
    return 0 if is_interesting(src, spec) else 1


def write_predicate(directory: Path, spec: PredicateSpec) -> Path:
    spec_path = directory / "predicate.json"
    spec.dump(spec_path)
    script = directory / "interesting.py"
    pkg_root = str(Path(__file__).resolve().parent.parent)
    script.write_text(PREDICATE_TEMPLATE.format(python=sys.executable, pkg_root=pkg_root, spec=str(spec_path)),
                      encoding="utf-8")
    script.chmod(script.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return script


def _run_predicate(script: Path, src: Path, timeout: float) -> bool:
    try:
        proc = subprocess.run([sys.executable, str(script), str(src)], cwd=src.parent, capture_output=True,
                              timeout=timeout, stdin=subprocess.DEVNULL)
    except subprocess.TimeoutExpired:
        return False
    return proc.returncode == 0


def _validate(script: Path, src: Path, timeout: float, what: str) -> bool:
    results = {_run_predicate(script, src, timeout) for _ in range(2)}
    if len(results) > 1:
        raise PredicateFlaky(f"predicate disagreed with itself on the {what} source")
    return results.pop()


def reduce_representative(
    cluster: Cluster,
    config: ToolchainConfig,
    source: str | Path,
    opt_flag: str,
    invariant: Invariant | str,
    workdir: str | Path,
    predicate_timeout: float = 600.0,
) -> Path:
    """Reduce the representative's source with the configured reducer; returns the reduced path."""
    if not config.reducer:
        raise ReducerFailure("unconfigured: no reducer command in the configuration")
    invariant = Invariant(invariant)
    workdir = Path(workdir)
    red = workdir / "reduce"
    red.mkdir(parents=True, exist_ok=True)
    candidate = red / "source.c"
    shutil.copyfile(source, candidate)
    idx = main_version_index(config)
    entry = cluster.fingerprint.entries[idx] if idx is not None and idx < len(cluster.fingerprint) else None
    if entry in MARKERS:
        entry = None
    spec = PredicateSpec(config.snapshot(), opt_flag, invariant.value, entry, candidate.name)
    script = write_predicate(red, spec)
    if not _validate(script, candidate, predicate_timeout, "original"):
        raise ReducerFailure("the original source does not satisfy the predicate")
    argv = render(config.reducer, src=candidate, predicate=script)
    try:
        proc = subprocess.run(argv, cwd=red, capture_output=True, text=True, timeout=config.reducer_timeout,
                              stdin=subprocess.DEVNULL, errors="replace")
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ReducerFailure(f"reducer did not complete: {exc}") from exc
    if proc.returncode != 0:
        raise ReducerFailure(f"reducer exited with {proc.returncode}: {proc.stderr.strip()[:300]}")
    if not candidate.is_file() or candidate.stat().st_size == 0:
        raise ReducerFailure("reducer left no source behind")
    if not _validate(script, candidate, predicate_timeout, "reduced"):
        shutil.copyfile(source, candidate)
        raise PredicateFlaky("the reduced source no longer satisfies the predicate; original kept")
    out = workdir / "reduced.c"
    shutil.copyfile(candidate, out)
    return out
