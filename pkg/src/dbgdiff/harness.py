"""Toolchain configuration, program generation, UB filtering and compilation.

Every external tool is a command template: split argv-style, placeholders
(``{src}``, ``{out}``, ``{opt}``, ``{limit}``, ``{seed}``, ``{predicate}``,
``{python}``) substituted verbatim token by token, executed without a shell.
"""
from __future__ import annotations

import enum
import json
import logging
import re
import shlex
import shutil
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .driver import DebuggerSession
from .invariants import ScopeMode

log = logging.getLogger(__name__)

LLVM_PASS_PATTERN = r"BISECT: running pass \((\d+)\) (.+?) on "
PLACEHOLDERS = ("src", "out", "opt", "limit", "seed", "predicate", "python")


class HarnessError(Exception):
    pass


class ConfigInvalid(HarnessError):
    pass


class GeneratorFailure(HarnessError):
    pass


class FilterCrash(HarnessError):
    pass


class CompileFailure(HarnessError):
    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class PassLimitUnsupported(HarnessError):
    pass


class RefusedSameLevel(HarnessError):
    pass


def split_template(template: str) -> list[str]:
    return shlex.split(template)


def render(template: str | Sequence[str], **values: Any) -> list[str]:
    tokens = split_template(template) if isinstance(template, str) else list(template)
    values.setdefault("python", sys.executable)
    out = []
    for tok in tokens:
        for key, val in values.items():
            if val is not None:
                tok = tok.replace("{" + key + "}", str(val))
        out.append(tok)
    return out


@dataclass(frozen=True)
class VersionDescriptor:
    """One toolchain version; ``pass_limit_flag`` is None when it cannot bisect passes."""

    label: str
    compiler: str
    pass_limit_flag: str | None = None
    pass_list: str | None = None
    pass_pattern: str = LLVM_PASS_PATTERN

    @property
    def can_bisect(self) -> bool:
        return bool(self.pass_limit_flag)

    def pass_list_command(self) -> str:
        """Command whose output names every pass; defaults to the compiler with an unlimited pass limit."""
        if self.pass_list:
            return self.pass_list
        if not self.pass_limit_flag:
            raise PassLimitUnsupported(f"{self.label}: no pass-limit mechanism")
        return f"{self.compiler} {self.pass_limit_flag.replace('{limit}', '-1')}"


@dataclass(frozen=True)
class ToolchainConfig:
    compiler: str
    levels: tuple[str, ...]
    baseline: str = "-O0"
    label: str = "main"
    debug_flag: str = "-g"
    pass_limit_flag: str | None = None
    pass_list: str | None = None
    pass_pattern: str = LLVM_PASS_PATTERN
    debugger: DebuggerSession = field(default_factory=DebuggerSession)
    generator: str | None = None
    ub_filter: str | None = None
    reducer: str | None = None
    versions: tuple[VersionDescriptor, ...] = ()
    scope_mode: ScopeMode = ScopeMode.EXISTS
    compile_timeout: float = 120.0
    tool_timeout: float = 120.0
    reducer_timeout: float = 3600.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "versions", tuple(self.versions))
        object.__setattr__(self, "scope_mode", ScopeMode(self.scope_mode))
        self.validate()

    def validate(self) -> None:
        for name in ("src", "out", "opt"):
            for desc in (self.main_version, *self.versions):
                n = desc.compiler.count("{" + name + "}")
                if n != 1:
                    raise ConfigInvalid(f"{desc.label}: compiler template must contain {{{name}}} exactly once (found {n})")
        for desc in (self.main_version, *self.versions):
            if desc.pass_limit_flag is not None and desc.pass_limit_flag.count("{limit}") != 1:
                raise ConfigInvalid(f"{desc.label}: pass-limit flag must contain {{limit}} exactly once")
            try:
                re.compile(desc.pass_pattern)
            except re.error as exc:
                raise ConfigInvalid(f"{desc.label}: bad pass pattern: {exc}") from exc
        if not self.levels:
            raise ConfigInvalid("at least one optimization level is required")
        if self.baseline in self.levels:
            raise ConfigInvalid(f"baseline {self.baseline} is also listed as a level under test")
        labels = [v.label for v in self.versions]
        if len(labels) != len(set(labels)):
            raise ConfigInvalid("version labels must be unique")

    @property
    def main_version(self) -> VersionDescriptor:
        return VersionDescriptor(self.label, self.compiler, self.pass_limit_flag or None, self.pass_list, self.pass_pattern)

    def snapshot(self) -> dict:
        data = asdict(self)
        data["scope_mode"] = self.scope_mode.value
        data["debugger"]["extra_args"] = list(self.debugger.extra_args)
        return data

    def check_tools(self) -> None:
        """Fail early when a configured executable is missing."""
        commands = [("compiler", self.compiler), ("debugger", self.debugger.debugger)]
        commands += [(f"version {v.label}", v.compiler) for v in self.versions]
        for role, cmd in (("generator", self.generator), ("ub_filter", self.ub_filter), ("reducer", self.reducer)):
            if cmd:
                commands.append((role, cmd))
        for role, cmd in commands:
            exe = render(cmd)[0]
            if shutil.which(exe) is None and not Path(exe).is_file():
                raise ConfigInvalid(f"{role}: executable {exe!r} not found")


def config_from_mapping(data: Mapping[str, Any]) -> ToolchainConfig:
    try:
        tc = dict(data["toolchain"])
    except KeyError as exc:
        raise ConfigInvalid("missing [toolchain] section") from exc
    dbg = dict(data.get("debugger", {}))
    session = DebuggerSession(
        debugger=dbg.pop("path", "gdb"),
        extra_args=tuple(dbg.pop("args", ())),
        timeout=float(dbg.pop("timeout", 10.0)),
        step_limit=int(dbg.pop("step_limit", 50_000)),
        entry_symbol=dbg.pop("entry", "main"),
        descend_into_libraries=bool(dbg.pop("descend_into_libraries", False)),
        collect_globals=bool(dbg.pop("collect_globals", False)),
        backend=dbg.pop("backend", "gdb-mi"),
    )
    if dbg:
        raise ConfigInvalid(f"unknown [debugger] keys: {sorted(dbg)}")
    versions = []
    for v in data.get("versions", []):
        v = dict(v)
        try:
            versions.append(
                VersionDescriptor(
                    label=v.pop("label"),
                    compiler=v.pop("compiler"),
                    pass_limit_flag=v.pop("pass_limit_flag", None) or None,
                    pass_list=v.pop("pass_list", None) or None,
                    pass_pattern=v.pop("pass_pattern", LLVM_PASS_PATTERN),
                )
            )
        except KeyError as exc:
            raise ConfigInvalid(f"[[versions]] entry is missing {exc}") from exc
        if v:
            raise ConfigInvalid(f"unknown [[versions]] keys: {sorted(v)}")

    def section_cmd(name: str) -> str | None:
        sec = data.get(name)
        if sec is None:
            return None
        if isinstance(sec, str):
            return sec or None
        return sec.get("command") or None

    known = {"compiler", "levels", "baseline", "label", "debug_flag", "pass_limit_flag", "pass_list", "pass_pattern",
             "compile_timeout"}
    unknown = set(tc) - known
    if unknown:
        raise ConfigInvalid(f"unknown [toolchain] keys: {sorted(unknown)}")
    if "compiler" not in tc or "levels" not in tc:
        raise ConfigInvalid("[toolchain] needs 'compiler' and 'levels'")
    return ToolchainConfig(
        compiler=tc["compiler"],
        levels=tuple(tc["levels"]),
        baseline=tc.get("baseline", "-O0"),
        label=tc.get("label", "main"),
        debug_flag=tc.get("debug_flag", "-g"),
        pass_limit_flag=tc.get("pass_limit_flag") or None,
        pass_list=tc.get("pass_list") or None,
        pass_pattern=tc.get("pass_pattern", LLVM_PASS_PATTERN),
        debugger=session,
        generator=section_cmd("generator"),
        ub_filter=section_cmd("ub_filter"),
        reducer=section_cmd("reducer"),
        versions=tuple(versions),
        scope_mode=ScopeMode((data.get("checks") or {}).get("scope_mode", "exists")),
        compile_timeout=float(tc.get("compile_timeout", 120.0)),
        reducer_timeout=float((data.get("reducer") or {}).get("timeout", 3600.0)) if isinstance(data.get("reducer"), dict) else 3600.0,
    )


def load_config(path: str | Path) -> ToolchainConfig:
    try:
        with open(path, "rb") as fp:
            data = tomllib.load(fp)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    try:
        return config_from_mapping(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(str(exc)) from exc


# -- test cases ------------------------------------------------------------


class Provenance(str, enum.Enum):
    GENERATED = "generated"
    IMPORTED = "imported"


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    id: str
    source: Path
    provenance: Provenance = Provenance.IMPORTED
    seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "source", Path(self.source))
        if not self.source.is_file() or self.source.stat().st_size == 0:
            raise ValueError(f"test case source {self.source} is missing or empty")

    @property
    def workdir(self) -> Path:
        return self.source.parent


class FilterVerdict(str, enum.Enum):
    CLEAN = "clean"
    REJECTED = "rejected"
    UNAVAILABLE = "filter_unavailable"


def _record(workdir: Path, argv: list[str], returncode: int | None) -> None:
    with open(workdir / "commands.jsonl", "a", encoding="utf-8") as fp:
        fp.write(json.dumps({"argv": argv, "returncode": returncode}) + "\n")


def _run(argv: list[str], workdir: Path, timeout: float) -> subprocess.CompletedProcess:
    try:
        proc = subprocess.run(argv, cwd=workdir, capture_output=True, text=True, timeout=timeout,
                              stdin=subprocess.DEVNULL, errors="replace")
    except subprocess.TimeoutExpired as exc:
        _record(workdir, argv, None)
        raise TimeoutError(f"{argv[0]} timed out after {timeout}s") from exc
    _record(workdir, argv, proc.returncode)
    return proc


def generate_case(config: ToolchainConfig, seed: int, workdir: str | Path, case_id: str | None = None) -> TestCase:
    if not config.generator:
        raise GeneratorFailure("no generator command configured")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    out = workdir / "source.c"
    argv = render(config.generator, seed=seed, out=out)
    try:
        proc = _run(argv, workdir, config.tool_timeout)
    except (OSError, TimeoutError) as exc:
        raise GeneratorFailure(str(exc)) from exc
    if proc.returncode != 0:
        raise GeneratorFailure(f"generator exited with {proc.returncode}: {proc.stderr.strip()[:500]}")
    if not out.is_file() or out.stat().st_size == 0:
        raise GeneratorFailure("generator produced no output")
    return TestCase(case_id or f"seed-{seed}", out, Provenance.GENERATED, seed)


def filter_ub(case: TestCase, config: ToolchainConfig) -> FilterVerdict:
    if not config.ub_filter:
        return FilterVerdict.UNAVAILABLE
    argv = render(config.ub_filter, src=case.source)
    try:
        proc = _run(argv, case.workdir, config.tool_timeout)
        if proc.returncode == 0:
            return FilterVerdict.CLEAN
        if proc.returncode == 1:
            return FilterVerdict.REJECTED
        raise FilterCrash(f"filter exited with {proc.returncode}: {proc.stderr.strip()[:300]}")
    except (FilterCrash, OSError, TimeoutError) as exc:
        log.warning("%s: UB filter failed, rejecting case: %s", case.id, exc)
        return FilterVerdict.REJECTED


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_-") or "x"


class Harness:
    """Builds binaries for test cases under one configuration."""

    def __init__(self, config: ToolchainConfig):
        self.config = config

    def compile(
        self,
        case: TestCase,
        opt_flag: str,
        version: VersionDescriptor | None = None,
        pass_limit: int | None = None,
        tag: str = "",
    ) -> Path:
        cfg = self.config
        version = version or cfg.main_version
        if opt_flag != cfg.baseline and opt_flag not in cfg.levels:
            raise ValueError(f"optimization flag {opt_flag!r} is neither the baseline nor a configured level")
        build = case.workdir / "build"
        build.mkdir(exist_ok=True)
        name = f"{slug(version.label)}{slug(opt_flag)}"
        if pass_limit is not None:
            name += f"-limit{pass_limit}"
        out = build / (name + (f"-{tag}" if tag else ""))
        argv = render(version.compiler, src=case.source.resolve(), out=out, opt=opt_flag)
        if cfg.debug_flag and cfg.debug_flag not in argv:
            argv.append(cfg.debug_flag)
        if pass_limit is not None:
            if not version.can_bisect:
                raise PassLimitUnsupported(f"{version.label} has no pass-limit mechanism")
            argv += render(version.pass_limit_flag, limit=pass_limit)
        argv = [tok for tok in argv if tok != ""]
        try:
            proc = _run(argv, case.workdir, cfg.compile_timeout)
        except (OSError, TimeoutError) as exc:
            raise CompileFailure(str(exc)) from exc
        if proc.returncode != 0 or not out.is_file():
            raise CompileFailure(f"{version.label} {opt_flag}: compiler exited with {proc.returncode}", proc.stderr)
        return out

    def build_pair(
        self,
        case: TestCase,
        opt_flag: str,
        version: VersionDescriptor | None = None,
        allow_same_level: bool = False,
        pass_limit: int | None = None,
    ) -> tuple[Path, Path]:
        """Return (unoptimized, optimized) binaries built from the same source bytes."""
        if opt_flag == self.config.baseline and not allow_same_level:
            raise RefusedSameLevel(f"{opt_flag} is the baseline level")
        unopt = self.compile(case, self.config.baseline, version, tag="unopt")
        opt = self.compile(case, opt_flag, version, pass_limit, tag="opt")
        return unopt, opt

    def pass_names(self, case: TestCase, opt_flag: str, version: VersionDescriptor) -> list[str]:
        """Ordered pass executions for (version, level); entry N-1 is the pass run at limit N."""
        if not version.can_bisect and not version.pass_list:
            raise PassLimitUnsupported(f"{version.label} has no pass-limit mechanism")
        build = case.workdir / "build"
        build.mkdir(exist_ok=True)
        out = build / f"{slug(version.label)}{slug(opt_flag)}-passes"
        argv = render(version.pass_list_command(), src=case.source.resolve(), out=out, opt=opt_flag)
        if self.config.debug_flag and self.config.debug_flag not in argv:
            argv.append(self.config.debug_flag)
        try:
            proc = _run(argv, case.workdir, self.config.compile_timeout)
        except (OSError, TimeoutError) as exc:
            raise CompileFailure(str(exc)) from exc
        if proc.returncode != 0:
            raise CompileFailure(f"{version.label}: pass listing failed", proc.stderr)
        pattern = re.compile(version.pass_pattern)
        names: dict[int, str] = {}
        for line in (proc.stdout + "\n" + proc.stderr).splitlines():
            m = pattern.search(line)
            if m:
                names[int(m.group(1))] = m.group(2).strip()
        return [names[i] for i in sorted(names)]
