"""External proposers over a line-delimited JSON protocol.

A request is one canonical JSON record per line (see
:meth:`ProposerRequest.to_json`) written to the adapter's stdin, or POSTed
as the HTTP body. The adapter answers with one JSON record per request,
validated against ``schemas/response.schema.json``. Any transport or schema
problem is logged and degrades to "no proposal"; policy sampling then falls
back to :class:`HeuristicSampler`.
"""

from __future__ import annotations

import json
import logging
import os
import selectors
import shlex
import subprocess
import urllib.error
import urllib.request
from typing import Optional

import jsonschema

from ..errors import ProtocolError
from ..symbolic import DomainUniverse
from .base import (
    PolicyChoice,
    ProposalInput,
    ProposerRequest,
    ProposerResponse,
    RefineInput,
    Refinement,
    SampleInput,
)
from .builtin import HeuristicSampler
from .prompts import load_schema

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0


class SubprocessTransport:
    """Keeps one adapter process alive; one request in flight at a time."""

    def __init__(self, argv: list[str], timeout: float = DEFAULT_TIMEOUT):
        self.argv = argv
        self.timeout = timeout
        self.proc: Optional[subprocess.Popen] = None

    def _start(self) -> subprocess.Popen:
        if self.proc is None or self.proc.poll() is not None:
            self.proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        return self.proc

    def roundtrip(self, line: str) -> str:
        proc = self._start()
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as err:
            self.close()
            raise ProtocolError(f"adapter stdin closed: {err}") from None
        with selectors.DefaultSelector() as sel:
            sel.register(proc.stdout, selectors.EVENT_READ)
            if not sel.select(self.timeout):
                self.close()
                raise ProtocolError(f"adapter timed out after {self.timeout:g} s")
        reply = proc.stdout.readline()
        if not reply:
            code = proc.poll()
            self.close()
            raise ProtocolError(f"adapter exited (code {code})")
        return reply

    def close(self) -> None:
        if self.proc is not None:
            if self.proc.poll() is None:
                self.proc.kill()
            self.proc.wait()
            for stream in (self.proc.stdin, self.proc.stdout):
                if stream is not None:
                    stream.close()
            self.proc = None


class HttpTransport:
    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT):
        self.url = url
        self.timeout = timeout

    def roundtrip(self, line: str) -> str:
        req = urllib.request.Request(
            self.url, data=line.encode("utf-8"), headers={"Content-Type": "application/json"}, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, TimeoutError, OSError) as err:
            raise ProtocolError(f"HTTP adapter failed: {err}") from None

    def close(self) -> None:
        pass


class ExternalProposer:
    """Implements all three proposer roles by delegating to an adapter."""

    def __init__(self, transport, timeout: float = DEFAULT_TIMEOUT):
        self.transport = transport
        self.validator = jsonschema.Draft202012Validator(load_schema("response"))
        self.fallback = HeuristicSampler()
        self.log: list[str] = []

    @classmethod
    def from_spec(cls, spec: str, timeout: float = DEFAULT_TIMEOUT) -> "ExternalProposer":
        """``cmd=<command line>`` or ``url=<endpoint>``."""
        kind, _, value = spec.partition("=")
        if kind == "cmd" and value:
            return cls(SubprocessTransport(shlex.split(value, posix=os.name == "posix"), timeout), timeout)
        if kind == "url" and value:
            return cls(HttpTransport(value, timeout), timeout)
        raise ValueError(f"bad external proposer spec {spec!r}; use cmd=<path> or url=<endpoint>")

    def _diag(self, msg: str) -> None:
        log.warning("external proposer: %s", msg)
        self.log.append(msg)

    def call(self, request: ProposerRequest, universe: DomainUniverse) -> ProposerResponse:
        """One validated roundtrip; raises :class:`ProtocolError` on any defect."""
        reply = self.transport.roundtrip(request.to_json())
        try:
            rec = json.loads(reply)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"malformed response: {err}") from None
        errors = sorted(self.validator.iter_errors(rec), key=lambda e: list(e.path))
        if errors:
            raise ProtocolError(f"schema violation: {errors[0].message}")
        if rec.get("phase") != request.phase:
            raise ProtocolError(f"answered phase {rec.get('phase')!r} to a {request.phase!r} request")
        return ProposerResponse.from_record(universe, rec)

    def propose(self, inp: ProposalInput):
        try:
            return list(self.call(inp.to_request(), inp.universe).models)
        except ProtocolError as err:
            self._diag(str(err))
            return []

    def sample(self, inp: SampleInput) -> PolicyChoice:
        try:
            resp = self.call(inp.to_request(), inp.model.universe)
        except ProtocolError as err:
            self._diag(f"{err}; using the built-in sampler")
            return self.fallback.sample(inp)
        ids = {pid for pid, _ in inp.catalog}
        if resp.policy_id not in ids:
            self._diag(f"unknown policy id {resp.policy_id!r}; using the built-in sampler")
            return self.fallback.sample(inp)
        return PolicyChoice(resp.policy_id, dict(resp.params))

    def refine(self, inp: RefineInput) -> Refinement:
        try:
            resp = self.call(inp.to_request(), inp.universe)
        except ProtocolError as err:
            self._diag(str(err))
            return Refinement(None, (f"external refiner failed: {err}",))
        return Refinement(resp.model)

    def close(self) -> None:
        self.transport.close()
