"""Victim models that score natural-language entailment queries.

Every victim answers the same question: given a context and a query
sentence, what is the probability that the query is entailed?  The
built-in victims are synthetic stand-ins with known blind spots, plus
two clients that talk to external scorers over HTTP or a line-based
subprocess protocol.
"""

from __future__ import annotations

import hashlib
import json
import math
import shlex
import subprocess
import time
from typing import Protocol, Sequence

import requests

from .errors import NonStratifiedError, ParseError, UnsupportedShape, VictimUnavailable
from .logic import Sentence, Theory, _ground_rules, _min_depths, entails, evaluate
from .metrics import rouge1
from .nl import DEFAULT_TABLE, TemplateTable, parse_query_sentence, parse_sentence

_UNDECIDED = 0.5


class Victim(Protocol):
    name: str

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float: ...


def predict(victim: Victim, nl_query: str, nl_context: Sequence[str]) -> bool:
    """Thresholded label: entailed iff the score reaches one half."""
    return victim.score(nl_query, nl_context) >= 0.5


def _parse_input(nl_query: str, nl_context: Sequence[str], table: TemplateTable):
    sentences = tuple(
        Sentence(i, parse_sentence(line, table)) for i, line in enumerate(nl_context)
    )
    return Theory(sentences), parse_query_sentence(nl_query, table)


class OracleVictim:
    """Perfect reasoner: parses the text back and solves it exactly.

    Unparseable or non-stratified input earns a flat 0.5, so by
    construction no consistent perturbation can flip its prediction.
    """

    name = "oracle"

    def __init__(self, table: TemplateTable = DEFAULT_TABLE):
        self._table = table

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        try:
            theory, query = _parse_input(nl_query, nl_context, self._table)
            return 1.0 if entails(theory, query) else 0.0
        except (ParseError, UnsupportedShape, NonStratifiedError):
            return _UNDECIDED


class DepthLimitedVictim:
    """Shallow reasoner that is also blind to query negation.

    It only trusts derivations up to ``max_depth`` rule applications,
    and it scores a negated query by looking up the positive atom, so
    any negated query reads as weakly entailed.  Both gaps are honest
    targets for label-consistent attacks.
    """

    def __init__(self, max_depth: int, table: TemplateTable = DEFAULT_TABLE):
        if max_depth < 0:
            raise ValueError("max_depth must be non-negative")
        self.max_depth = max_depth
        self.name = f"depth:{max_depth}"
        self._table = table

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        try:
            theory, query = _parse_input(nl_query, nl_context, self._table)
            extra = tuple(t.name for t in query.atom.args if not t.is_variable)
            model = evaluate(theory, extra)
            depths = _min_depths(theory, model, _ground_rules(theory, extra))
            reachable = query.atom in model.true_atoms and depths.get(query.atom, 0) <= self.max_depth
        except (ParseError, UnsupportedShape, NonStratifiedError):
            return _UNDECIDED
        if not query.naf:
            return 0.9 if reachable else 0.1
        return 0.8 if reachable else 0.9


class OverlapHeuristicVictim:
    """Lexical-overlap scorer with no reasoning at all.

    Uses the best unigram overlap between the query and any context
    sentence, squashed so 50 percent overlap sits exactly at 0.5.
    """

    name = "overlap"

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        best = max((rouge1(nl_query, line) for line in nl_context), default=0.0)
        return 1.0 / (1.0 + math.exp(-4.0 * (best - 0.5)))


def echo_score(nl_query: str, nl_context: Sequence[str]) -> float:
    """Deterministic pseudo-random score derived from the exact input bytes.

    The payload is serialized with fixed key order, compact separators,
    and ASCII escapes, hashed with sha256, and the first eight hex
    digits are scaled into [0, 1).  External scorer implementations can
    reproduce this exactly, which makes it the conformance anchor for
    the wire protocol.
    """
    payload = json.dumps(
        {"query": nl_query, "context": list(nl_context)},
        separators=(",", ":"),
        ensure_ascii=True,
    )
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return int(digest[:8], 16) / 0x100000000


class EchoVictim:
    """In-process reference implementation of the echo scorer."""

    name = "echo"

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        return echo_score(nl_query, nl_context)


def _request_payload(nl_query: str, nl_context: Sequence[str]) -> dict:
    # exactly the documented request body; version negotiation is out of band
    return {"query": nl_query, "context": list(nl_context)}


def _check_score(value) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise VictimUnavailable(f"scorer returned a non-numeric score: {value!r}")
    score = float(value)
    if not 0.0 <= score <= 1.0:
        raise VictimUnavailable(f"scorer returned a score outside [0, 1]: {score}")
    return score


class HttpVictim:
    """Client for a remote scorer speaking JSON over HTTP POST."""

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2, backoff: float = 0.2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.name = f"http:{endpoint}"

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        payload = _request_payload(nl_query, nl_context)
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = requests.post(self.endpoint, json=payload, timeout=self.timeout)
                if response.status_code >= 500:
                    raise VictimUnavailable(f"scorer returned status {response.status_code}")
                if response.status_code != 200:
                    raise VictimUnavailable(
                        f"scorer rejected the request with status {response.status_code}"
                    )
                body = response.json()
                if "error" in body:
                    raise VictimUnavailable(f"scorer error: {body['error']}")
                return _check_score(body.get("p_true"))
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
            except VictimUnavailable as exc:
                last_error = exc
            if attempt < self.retries:
                time.sleep(self.backoff * (attempt + 1))
        raise VictimUnavailable(f"scorer at {self.endpoint} unavailable: {last_error}")


class StdioVictim:
    """Client for a scorer subprocess speaking one JSON object per line."""

    def __init__(self, command: str, retries: int = 2):
        self.command = command
        self.retries = retries
        self.name = f"stdio:{command}"
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def _round_trip(self, payload: dict) -> dict:
        proc = self._ensure()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps(payload, separators=(",", ":")) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise VictimUnavailable("scorer process closed its output")
        return json.loads(line)

    def score(self, nl_query: str, nl_context: Sequence[str]) -> float:
        payload = _request_payload(nl_query, nl_context)
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                body = self._round_trip(payload)
                if "error" in body:
                    raise VictimUnavailable(f"scorer error: {body['error']}")
                return _check_score(body.get("p_true"))
            except (OSError, BrokenPipeError, json.JSONDecodeError, VictimUnavailable) as exc:
                last_error = exc
                self.close()
            if attempt >= self.retries:
                break
        raise VictimUnavailable(f"scorer process unavailable: {last_error}")

    def close(self) -> None:
        if self._proc is not None:
            for stream in (self._proc.stdin, self._proc.stdout):
                if stream is not None:
                    try:
                        stream.close()
                    except OSError:
                        pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None

    def __enter__(self) -> "StdioVictim":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def resolve_victim(ref: str, timeout: float | None = None) -> Victim:
    """Build a victim from a reference string.

    Accepted forms: ``oracle``, ``overlap``, ``echo``, ``depth:N``,
    ``http://...`` or ``https://...``, and ``stdio:COMMAND``.
    """
    if ref == "oracle":
        return OracleVictim()
    if ref == "overlap":
        return OverlapHeuristicVictim()
    if ref == "echo":
        return EchoVictim()
    if ref.startswith("depth:"):
        try:
            return DepthLimitedVictim(int(ref.split(":", 1)[1]))
        except ValueError as exc:
            raise ValueError(f"bad depth reference {ref!r}") from exc
    if ref.startswith(("http://", "https://")):
        if timeout is not None:
            return HttpVictim(ref, timeout=timeout)
        return HttpVictim(ref)
    if ref.startswith("stdio:"):
        command = ref.split(":", 1)[1]
        if not command.strip():
            raise ValueError("stdio reference needs a command")
        return StdioVictim(command)
    raise ValueError(f"unknown victim reference {ref!r}")
