"""Minimal gdb/mi client: one debugger subprocess, one in-flight command.

Output records are parsed with :mod:`pygdbmi`; this module only handles the
process, token correlation and timeouts.
"""
from __future__ import annotations

import logging
import queue
import subprocess
import threading
import time
from typing import Sequence

from pygdbmi.gdbmiparser import parse_response

log = logging.getLogger(__name__)


class MiError(Exception):
    """Base class for machine-interface failures."""


class MiTimeout(MiError):
    pass


class MiProtocolError(MiError):
    pass


class MiClosed(MiError):
    """gdb's output stream ended."""


class GdbMi:
    def __init__(self, argv: Sequence[str], timeout: float = 10.0):
        self.timeout = timeout
        self._token = 0
        self._lines: queue.Queue[str | None] = queue.Queue()
        self.proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            errors="replace",
            bufsize=1,
        )
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self.async_records: list[dict] = []

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)

    def _next_record(self, deadline: float) -> dict:
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise MiTimeout("timed out waiting for gdb")
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise MiTimeout("timed out waiting for gdb") from None
            if line is None:
                raise MiClosed("gdb closed its output")
            if not line.strip() or line.strip() == "(gdb)":
                continue
            return parse_response(line)

    def command(self, cmd: str, timeout: float | None = None) -> dict:
        """Send ``cmd`` and return the payload of its ``^done``/``^running`` result."""
        self._token += 1
        token = self._token
        assert self.proc.stdin is not None
        try:
            self.proc.stdin.write(f"{token}{cmd}\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise MiClosed(str(exc)) from exc
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        while True:
            rec = self._next_record(deadline)
            if rec["type"] == "result" and rec.get("token") == token:
                if rec["message"] == "error":
                    msg = (rec.get("payload") or {}).get("msg", "")
                    raise MiProtocolError(f"{cmd}: {msg}")
                return rec.get("payload") or {}
            if rec["type"] == "notify":
                self.async_records.append(rec)

    def wait_stopped(self, timeout: float | None = None) -> dict:
        """Block until the next ``*stopped`` record and return its payload."""
        deadline = time.monotonic() + (self.timeout if timeout is None else timeout)
        while self.async_records:
            rec = self.async_records.pop(0)
            if rec["message"] == "stopped":
                return rec.get("payload") or {}
        while True:
            rec = self._next_record(deadline)
            if rec["type"] == "notify" and rec["message"] == "stopped":
                return rec.get("payload") or {}

    def run_until_stop(self, cmd: str) -> dict:
        self.async_records.clear()
        self.command(cmd)
        return self.wait_stopped()

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                assert self.proc.stdin is not None
                self.proc.stdin.write("-gdb-exit\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired, ValueError):
                pass
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()
        self._reader.join(timeout=2)
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                if stream is not None:
                    stream.close()
            except (OSError, ValueError):
                pass

    def __enter__(self) -> GdbMi:
        return self

    def __exit__(self, *exc) -> None:
        self.close()
