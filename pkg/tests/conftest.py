import shutil
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

sys.path.insert(0, str(Path(__file__).resolve().parent))

FIXTURES = Path(__file__).resolve().parent / "fixtures"
REPO = Path(__file__).resolve().parent.parent
HAVE_GCC_GDB = bool(shutil.which("gcc") and shutil.which("gdb"))
HAVE_CLANG = bool(shutil.which("clang"))

needs_toolchain = pytest.mark.skipif(not HAVE_GCC_GDB, reason="gcc and gdb are required")
needs_clang = pytest.mark.skipif(not (HAVE_CLANG and HAVE_GCC_GDB), reason="clang and gdb are required")


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture
def gcc_config():
    from dbgdiff.harness import load_config

    return load_config(REPO / "configs" / "gcc-gdb.toml")


@pytest.fixture
def clang_config():
    from dbgdiff.harness import load_config

    return load_config(REPO / "configs" / "clang-gdb.toml")


def pytest_terminal_summary(terminalreporter):
    from verdicts import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
