"""Model backends and consistency voting.

The simulated backend is the workhorse for tests and benchmarks: a fake model
whose skill is dialed in by two probabilities. Given the demonstrations
present in a prompt it behaves the way a competent-but-imperfect model would,
and because every draw is a pure function of (seeds, question) the whole
benchmark stack stays reproducible.

Voting for self- and cross-consistency groups candidates by what they return
when executed, not by their text, so cosmetic rewrites of the same query land
in one group.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass
from hashlib import blake2b
from typing import Callable, Mapping, Protocol, Sequence

import httpx

from .engine import ResultTable, normalize_result
from .guard import SanitizationVerdict, sanitize
from .prompting import AssembledPrompt

DEFAULT_SELF_CONSISTENCY_N = 5


class GenerationError(Exception):
    """Base class for generation failures."""


class GenerationTransportError(GenerationError):
    """Completion endpoint unreachable, timed out, or non-2xx."""


class GenerationContractError(GenerationError):
    """Completion endpoint answered with an unusable payload."""


class EmptyGenerationError(GenerationError):
    """The model produced no extractable SQL candidate."""


class AllCandidatesRejectedError(GenerationError):
    """Every sampled candidate failed sanitization; carries all verdicts."""

    def __init__(self, verdicts: Sequence[SanitizationVerdict]):
        super().__init__(f"all {len(verdicts)} candidates rejected by sanitizer")
        self.verdicts = tuple(verdicts)


@dataclass(frozen=True)
class DecodingParams:
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class GeneratedSQL:
    sql: str
    model_id: str
    latency_ms: int
    raw_response: str

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")


@dataclass(frozen=True)
class SimulatedModelConfig:
    """Skill dial for the simulated backend.

    competence: chance of reproducing a matching demonstration's SQL.
    zs_hit_rate: chance of recalling the right SQL with no demonstration,
    never higher than competence.
    """

    competence: float = 1.0
    zs_hit_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.zs_hit_rate <= self.competence <= 1.0):
            raise ValueError(
                "require 0 <= zs_hit_rate <= competence <= 1, got "
                f"zs_hit_rate={self.zs_hit_rate}, competence={self.competence}"
            )


class Backend(Protocol):
    """A completion source. complete() returns the raw response text and an
    optional pre-measured latency; None means the caller should time the call."""

    model_id: str

    def complete(self, prompt_text: str, params: DecodingParams) -> tuple[str, int | None]:
        ...


_FENCE_RE = re.compile(r"```(?:sql)?\s*\n(.*?)```", re.DOTALL | re.IGNORECASE)
_SQL_START_RE = re.compile(r"^\s*(select|with)\b", re.IGNORECASE)


def extract_sql(raw: str) -> str:
    """Pull the SQL candidate out of a raw model response.

    Prefers the first fenced code block; otherwise drops leading prose lines
    until one starts with SELECT or WITH; otherwise returns the stripped text
    and lets the sanitizer pass judgment.
    """
    fenced = _FENCE_RE.search(raw)
    if fenced:
        return fenced.group(1).strip()
    lines = raw.splitlines()
    for i, line in enumerate(lines):
        if _SQL_START_RE.match(line):
            return "\n".join(lines[i:]).strip()
    return raw.strip()


def _uniform(*parts: object) -> float:
    """Deterministic draw in [0, 1) from the given parts."""
    digest = blake2b(
        "\x1f".join(str(p) for p in parts).encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") / 2**64


def _short_digest(*parts: object) -> str:
    return blake2b(
        "\x1f".join(str(p) for p in parts).encode("utf-8"), digest_size=6
    ).hexdigest()


_DEMO_SQL_RE = re.compile(r"^SQL:\s*(.+)$", re.MULTILINE)
_FAMILY_COMMENT_RE = re.compile(r"--\s*family:(\S+)\s+param:(\S+)")
_PREFIX_RE = re.compile(r"^\s*[^:\n]{0,60}:\s*")
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class SimulatedBackend:
    """Deterministic stand-in for a hosted SQL-writing model.

    Protocol expectations (matching the synthetic corpus conventions):
      - the final non-empty prompt line is "<prefix>: <question>";
      - the question's trailing token is its surface parameter;
      - demonstration SQL lines carry "-- family:<tag> param:<value>", and a
        demonstration matches the question when every token of its family tag
        appears among the question's tokens.

    With a matching demonstration present the backend replays that
    demonstration's SQL with the parameter swapped (probability competence);
    without one it may still recall the right SQL from its knowledge table
    (probability zs_hit_rate); in all other cases it emits a syntactically
    valid but wrong SELECT. Setting fault_trigger makes any question
    containing that phrase yield a mutating statement, for exercising the
    guard end to end.
    """

    def __init__(
        self,
        config: SimulatedModelConfig,
        knowledge: Mapping[str, str] | None = None,
        fault_trigger: str | None = None,
        model_id: str = "sim",
    ):
        self.config = config
        self.knowledge = dict(knowledge or {})
        self.fault_trigger = fault_trigger
        self.model_id = model_id

    def describe(self) -> str:
        return (
            f"{self.model_id}(competence={self.config.competence},"
            f"zs_hit_rate={self.config.zs_hit_rate})"
        )

    @staticmethod
    def _question_from(prompt_text: str) -> str:
        for line in reversed(prompt_text.splitlines()):
            if line.strip():
                return _PREFIX_RE.sub("", line, count=1).strip()
        return ""

    @staticmethod
    def _demos_from(prompt_text: str) -> list[tuple[str, str, str]]:
        demos = []
        for m in _DEMO_SQL_RE.finditer(prompt_text):
            sql = m.group(1).strip()
            tag_match = _FAMILY_COMMENT_RE.search(sql)
            if tag_match:
                demos.append((sql, tag_match.group(1), tag_match.group(2)))
        return demos

    def complete(self, prompt_text: str, params: DecodingParams) -> tuple[str, int | None]:
        question = self._question_from(prompt_text)
        q_tokens = _TOKEN_RE.findall(question.lower())
        q_param = q_tokens[-1] if q_tokens else ""

        if self.fault_trigger and self.fault_trigger.lower() in question.lower():
            return self._respond("DROP TABLE monthly_sales")

        draw = _uniform(self.config.seed, params.seed, question)

        matched = None
        for sql, tag, param in self._demos_from(prompt_text):
            if set(tag.split("_")) <= set(q_tokens):
                matched = (sql, param)
                break

        if matched is not None:
            if draw < self.config.competence:
                sql, demo_param = matched
                answer = re.sub(
                    rf"\b{re.escape(demo_param)}\b", q_param, sql
                ) if demo_param else sql
                return self._respond(answer)
        elif draw < self.config.zs_hit_rate:
            for tag in sorted(self.knowledge):
                if set(tag.split("_")) <= set(q_tokens):
                    return self._respond(
                        self.knowledge[tag].replace("{param}", q_param)
                    )

        miss = _short_digest(self.config.seed, params.seed, question)
        return self._respond(f"SELECT 'miss-{miss}' AS answer")

    @staticmethod
    def _respond(sql: str) -> tuple[str, int | None]:
        # A fenced response exercises extraction on every path; latency of an
        # in-process fake is reported as zero to keep outputs reproducible.
        return f"```sql\n{sql}\n```", 0


class HttpChatBackend:
    """Chat-completions client for an OpenAI-compatible endpoint.

    The API key is read from an environment variable, never from config
    files. A transport kwarg admits httpx.MockTransport in tests.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "ASKDB_API_KEY",
        timeout_s: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint
        self.model_id = model
        self._api_key_env = api_key_env
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def close(self) -> None:
        self._client.close()

    def describe(self) -> str:
        return f"http:{self.model_id}"

    def complete(self, prompt_text: str, params: DecodingParams) -> tuple[str, int | None]:
        headers = {}
        api_key = os.environ.get(self._api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        }
        try:
            response = self._client.post(self.endpoint, json=body, headers=headers)
        except httpx.HTTPError as exc:
            raise GenerationTransportError(f"completion endpoint unreachable: {exc}") from exc
        if response.status_code // 100 != 2:
            raise GenerationTransportError(
                f"completion endpoint returned HTTP {response.status_code}"
            )
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise GenerationContractError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str):
            raise GenerationContractError("completion content is not text")
        return content, None


def generate(
    prompt: AssembledPrompt,
    params: DecodingParams,
    backend: Backend,
) -> GeneratedSQL:
    """One sample from a backend, with SQL extracted from the raw response."""
    started = time.perf_counter()
    raw, reported_latency = backend.complete(prompt.text, params)
    elapsed_ms = int((time.perf_counter() - started) * 1000)
    sql = extract_sql(raw)
    if not sql:
        raise EmptyGenerationError("backend produced no SQL candidate")
    return GeneratedSQL(
        sql=sql,
        model_id=backend.model_id,
        latency_ms=reported_latency if reported_latency is not None else elapsed_ms,
        raw_response=raw,
    )


Executor = Callable[[str], ResultTable]


def _vote(candidates: list[GeneratedSQL], executor: Executor) -> GeneratedSQL:
    """Majority vote over execution-result signatures.

    Groups of identical signatures compete by size; ties go first to groups
    whose statements actually executed, then to the earliest-generated
    member. If nothing sanitizes, that is an aggregated failure.
    """
    groups: dict[object, list[int]] = {}
    passed: dict[object, bool] = {}
    verdicts: list[SanitizationVerdict] = []
    any_allowed = False
    for i, cand in enumerate(candidates):
        verdict = sanitize(cand.sql)
        verdicts.append(verdict)
        if not verdict.allowed:
            key: object = ("rejected", i)
            ok = False
        else:
            any_allowed = True
            try:
                table = executor(cand.sql)
                key = ("sig", normalize_result(table).digest)
                ok = True
            except Exception:
                key = ("failed", i)
                ok = False
        groups.setdefault(key, []).append(i)
        passed[key] = ok
    if not any_allowed:
        raise AllCandidatesRejectedError(verdicts)
    winner_key = max(
        groups,
        key=lambda k: (len(groups[k]), passed[k], -min(groups[k])),
    )
    return candidates[min(groups[winner_key])]


def self_consistent_generate(
    prompt: AssembledPrompt,
    n: int,
    params: DecodingParams,
    backend: Backend,
    executor: Executor,
) -> GeneratedSQL:
    """Sample n candidates (seeds base, base+1, ...) and vote by result.

    With n=1 this is exactly generate(): same seed, no vote.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    candidates = [
        generate(
            prompt,
            DecodingParams(
                temperature=params.temperature,
                seed=params.seed + i,
                max_tokens=params.max_tokens,
            ),
            backend,
        )
        for i in range(n)
    ]
    if n == 1:
        return candidates[0]
    return _vote(candidates, executor)


def cross_consistent_generate(
    prompt: AssembledPrompt,
    backends: Sequence[Backend],
    params: DecodingParams,
    executor: Executor,
) -> GeneratedSQL:
    """One sample per backend, voted with the same rules as self-consistency.

    Ties resolve toward the backend listed first.
    """
    if not backends:
        raise ValueError("at least one backend is required")
    candidates = [generate(prompt, params, backend) for backend in backends]
    if len(candidates) == 1:
        return candidates[0]
    return _vote(candidates, executor)
