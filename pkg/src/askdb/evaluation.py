"""Benchmark metrics and the suite runner.

Two complementary notions of correctness: exact match compares statements
structurally after decomposing them into clause sets, so surface noise
(case, whitespace, item order within a clause) does not count against a
prediction; execution match compares what the statements actually return.
Difficulty classification scores structural features of the gold statement
into four buckets so reports can break accuracy down the way benchmark
leaderboards usually do.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .engine import QueryEngine, normalize_result
from .gateway import Backend, SimulatedBackend, SimulatedModelConfig
from .guard import SqlLexError, SqlToken, TokenKind, sanitize, tokenize_sql
from .prompting import Strategy

if TYPE_CHECKING:  # avoid import cycle; pipeline imports nothing from here
    from .pipeline import QueryPipeline


class SuiteConfigError(ValueError):
    """The suite itself is broken (bad JSONL, an undecomposable or failing
    gold statement); distinct from a prediction merely being wrong."""


class Difficulty(str, Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"
    EXTRA = "extra"


@dataclass(frozen=True)
class ClauseSet:
    """Structural skeleton of one statement.

    Unordered clause members are sets; ORDER BY keeps its sequence and
    set operations keep their multiplicity because both are semantic.
    Constructs the decomposer does not model land in `unsupported` rather
    than being silently dropped.
    """

    select_items: frozenset[str]
    from_tables: frozenset[str]
    where_conditions: frozenset[str]
    group_by_items: frozenset[str]
    having_conditions: frozenset[str]
    order_by_items: tuple[str, ...]
    limit_value: str | None
    distinct: bool
    has_subquery: bool
    set_ops: tuple[str, ...]
    unsupported: frozenset[str] = frozenset()


_JOIN_WORDS = {"join", "inner", "left", "right", "full", "outer", "cross", "natural"}
_CLAUSE_STARTERS = {"select", "from", "where", "group", "having", "order", "limit", "offset"}
_SET_OPS = {"union", "intersect", "except"}

# Keyword-typed names that are really scalar functions; rendering glues their
# call parenthesis on, like any identifier call.
_FUNC_KEYWORDS = {"cast", "replace"}


def _render(tokens: Sequence[SqlToken]) -> str:
    """Normalize a token run to comparable text: lowercase, canonical spacing."""
    parts: list[str] = []
    prev: SqlToken | None = None
    for tok in tokens:
        text = tok.text.lower()
        if prev is None:
            parts.append(text)
        else:
            prev_text = prev.text.lower()
            glue = (
                text in (")", ",", ".")
                or prev_text in ("(", ".")
                or (
                    text == "("
                    and (prev.kind is TokenKind.IDENTIFIER or prev_text in _FUNC_KEYWORDS)
                )
            )
            parts.append(text if glue else " " + text)
        prev = tok
    return "".join(parts)


def _split_top_level(tokens: list[SqlToken], separators: set[str]) -> list[list[SqlToken]]:
    """Split a token run on depth-0 separator tokens (',' or keyword 'and')."""
    groups: list[list[SqlToken]] = [[]]
    depth = 0
    for tok in tokens:
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        if depth == 0 and tok.text.lower() in separators and tok.kind in (
            TokenKind.PUNCTUATION,
            TokenKind.KEYWORD,
        ):
            groups.append([])
        else:
            groups[-1].append(tok)
    return [g for g in groups if g]


def _from_members(tokens: list[SqlToken]) -> tuple[list[str], list[str]]:
    """Break a FROM clause into table references and join conditions.

    Join keywords act as member separators and are dropped; each member's ON
    (or USING) part is returned as a condition, because a join predicate
    restricts rows exactly like a WHERE term does.
    """
    members: list[list[SqlToken]] = [[]]
    depth = 0
    for tok in tokens:
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        lowered = tok.text.lower()
        if depth == 0 and (
            (tok.kind is TokenKind.PUNCTUATION and tok.text == ",")
            or (tok.kind is TokenKind.KEYWORD and lowered == "join")
        ):
            members.append([])
            continue
        if (
            depth == 0
            and tok.kind is TokenKind.KEYWORD
            and lowered in _JOIN_WORDS
            and lowered != "join"
        ):
            continue  # join-type modifier, not part of any member
        members[-1].append(tok)

    tables: list[str] = []
    conditions: list[str] = []
    for member in members:
        if not member:
            continue
        split_at = None
        depth = 0
        for i, tok in enumerate(member):
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
            if depth == 0 and tok.kind is TokenKind.KEYWORD and tok.text.lower() in ("on", "using"):
                split_at = i
                break
        if split_at is None:
            tables.append(_render(member))
        else:
            tables.append(_render(member[:split_at]))
            for cond in _split_top_level(member[split_at + 1 :], {"and"}):
                conditions.append(_render(cond))
    return tables, conditions


def decompose(sql: str) -> ClauseSet:
    """Segment a statement into its clause sets by top-level keywords.

    Lexer-based with parenthesis-depth tracking, not a full parser: set
    operation arms are merged clause-wise, CTE bodies contribute only the
    subquery flag, and anything unrecognized is reported in `unsupported`.
    Raises SqlLexError when the text cannot even be tokenized.
    """
    tokens = [t for t in tokenize_sql(sql) if t.kind is not TokenKind.COMMENT]

    buckets: dict[str, list[list[SqlToken]]] = {
        name: [] for name in ("select", "from", "where", "group", "having", "order", "limit")
    }
    unsupported: list[str] = []
    set_ops: list[str] = []
    distinct = False
    has_subquery = False
    seen_main_select = False

    current: str | None = None
    run: list[SqlToken] = []
    depth = 0

    def flush() -> None:
        nonlocal run
        if current is not None and run:
            buckets[current].append(run)
        elif current is None and run and seen_main_select:
            unsupported.append(_render(run))
        run = []

    i = 0
    while i < len(tokens):
        tok = tokens[i]
        lowered = tok.text.lower()
        if tok.text == "(":
            depth += 1
        elif tok.text == ")":
            depth -= 1
        if depth > 0:
            if tok.kind is TokenKind.KEYWORD and lowered == "select":
                has_subquery = True
            run.append(tok)
            i += 1
            continue

        if tok.kind is TokenKind.KEYWORD and lowered in _SET_OPS:
            flush()
            op = lowered
            if (
                i + 1 < len(tokens)
                and tokens[i + 1].kind is TokenKind.KEYWORD
                and tokens[i + 1].text.lower() == "all"
            ):
                op += " all"
                i += 1
            set_ops.append(op)
            current = None
            i += 1
            continue

        if tok.kind is TokenKind.KEYWORD and lowered in _CLAUSE_STARTERS:
            flush()
            if lowered == "select":
                seen_main_select = True
                current = "select"
                if (
                    i + 1 < len(tokens)
                    and tokens[i + 1].kind is TokenKind.KEYWORD
                    and tokens[i + 1].text.lower() in ("distinct", "all")
                ):
                    if tokens[i + 1].text.lower() == "distinct":
                        distinct = True
                    i += 1
            elif lowered in ("group", "order"):
                if (
                    i + 1 < len(tokens)
                    and tokens[i + 1].kind is TokenKind.KEYWORD
                    and tokens[i + 1].text.lower() == "by"
                ):
                    current = lowered
                    i += 1
                else:
                    unsupported.append(f"{lowered} without by")
                    current = None
            elif lowered == "offset":
                current = None
                j = i + 1
                offset_run = [tok]
                while j < len(tokens) and not (
                    tokens[j].kind is TokenKind.KEYWORD
                    and tokens[j].text.lower() in _CLAUSE_STARTERS | _SET_OPS
                ):
                    offset_run.append(tokens[j])
                    j += 1
                unsupported.append(_render(offset_run))
                i = j
                continue
            else:
                current = lowered
            i += 1
            continue

        # Tokens before the first top-level SELECT form the WITH prologue;
        # their parenthesized bodies were already scanned for subqueries.
        if not seen_main_select:
            i += 1
            continue

        run.append(tok)
        i += 1
    flush()

    def members(name: str, separators: set[str]) -> frozenset[str]:
        out: set[str] = set()
        for clause_run in buckets[name]:
            for group in _split_top_level(clause_run, separators):
                out.add(_render(group))
        return frozenset(out)

    from_tables: set[str] = set()
    join_conditions: list[str] = []
    for clause_run in buckets["from"]:
        tables, conditions = _from_members(clause_run)
        from_tables.update(tables)
        join_conditions.extend(conditions)

    order_items: list[str] = []
    for clause_run in buckets["order"]:
        order_items.extend(_render(g) for g in _split_top_level(clause_run, {","}))

    limit_value: str | None = None
    if buckets["limit"]:
        limit_value = _render(
            [tok for clause_run in buckets["limit"] for tok in clause_run]
        )

    return ClauseSet(
        select_items=members("select", {","}),
        from_tables=frozenset(from_tables),
        where_conditions=members("where", {"and"}) | frozenset(join_conditions),
        group_by_items=members("group", {","}),
        having_conditions=members("having", {"and"}),
        order_by_items=tuple(order_items),
        limit_value=limit_value,
        distinct=distinct,
        has_subquery=has_subquery,
        set_ops=tuple(set_ops),
        unsupported=frozenset(unsupported),
    )


def exact_match(pred_sql: str, gold_sql: str) -> bool:
    """Clause-set equality of prediction and gold.

    A gold statement that cannot be decomposed is a suite defect and raises;
    a prediction that cannot be decomposed is simply not a match.
    """
    try:
        gold = decompose(gold_sql)
    except SqlLexError as exc:
        raise SuiteConfigError(f"gold statement undecomposable: {exc}") from exc
    try:
        pred = decompose(pred_sql)
    except SqlLexError:
        return False
    return pred == gold


def execution_match(
    pred_sql: str,
    gold_sql: str,
    dataset_id: str,
    engine: QueryEngine,
    timeout_ms: int = 5_000,
    row_limit: int = 10_000,
) -> bool:
    """Equality of canonicalized execution results.

    Row order counts only when the gold statement has a top-level ORDER BY.
    A failing gold statement raises SuiteConfigError; a prediction that is
    rejected or fails to execute is not a match.
    """
    try:
        gold_clauses = decompose(gold_sql)
        gold_table = engine.execute(gold_sql, dataset_id, timeout_ms, row_limit)
    except Exception as exc:
        raise SuiteConfigError(f"gold statement failed: {exc}") from exc
    order_sensitive = bool(gold_clauses.order_by_items)

    if not sanitize(pred_sql).allowed:
        return False
    try:
        pred_table = engine.execute(pred_sql, dataset_id, timeout_ms, row_limit)
    except Exception:
        return False
    return (
        normalize_result(pred_table, order_sensitive).digest
        == normalize_result(gold_table, order_sensitive).digest
    )


def difficulty_score(clauses: ClauseSet) -> int:
    """Structural difficulty score; the bucket thresholds live in classify."""
    return (
        len(clauses.where_conditions)
        + (2 if clauses.group_by_items else 0)
        + (2 if clauses.order_by_items else 0)
        + (3 if clauses.has_subquery else 0)
        + 3 * len(clauses.set_ops)
        + (2 if len(clauses.from_tables) > 1 else 0)
        + (1 if len(clauses.select_items) > 2 else 0)
    )


def classify_difficulty(sql: str) -> Difficulty:
    score = difficulty_score(decompose(sql))
    if score <= 1:
        return Difficulty.EASY
    if score <= 4:
        return Difficulty.MEDIUM
    if score <= 7:
        return Difficulty.HARD
    return Difficulty.EXTRA


# -- suites and the benchmark runner ------------------------------------------


@dataclass(frozen=True)
class SuiteItem:
    question_id: int
    question: str
    gold_sql: str
    dataset_id: str
    family_tag: str | None = None


def load_suite(path: str | Path) -> list[SuiteItem]:
    """Read a JSONL suite; question ids are 1-based line positions."""
    items: list[SuiteItem] = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            items.append(
                SuiteItem(
                    question_id=line_no,
                    question=row["question"],
                    gold_sql=row["gold_sql"],
                    dataset_id=row["dataset_id"],
                    family_tag=row.get("family_tag"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SuiteConfigError(f"{path}:{line_no}: bad suite row: {exc}") from exc
    if not items:
        raise SuiteConfigError(f"{path}: suite is empty")
    return items


def dump_suite(items: Sequence[SuiteItem], path: str | Path) -> None:
    lines = [
        json.dumps(
            {
                "question": it.question,
                "gold_sql": it.gold_sql,
                "dataset_id": it.dataset_id,
                "family_tag": it.family_tag,
            },
            ensure_ascii=False,
        )
        for it in items
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def knowledge_from_suite(items: Sequence[SuiteItem]) -> dict[str, str]:
    """Derive the simulated model's innate answer key from suite rows.

    For each family, the gold statement is turned into a template by
    replacing the question's surface parameter (its final token) with a
    placeholder. The row whose parameter collides least with fixed tokens in
    the SQL wins, so families that mention one parameter value verbatim still
    yield a clean template.
    """
    best: dict[str, tuple[int, str]] = {}
    for item in items:
        if not item.family_tag:
            continue
        q_tokens = _TOKEN_RE.findall(item.question.lower())
        if not q_tokens:
            continue
        param = q_tokens[-1]
        pattern = re.compile(rf"\b{re.escape(param)}\b")
        occurrences = len(pattern.findall(item.gold_sql))
        template = pattern.sub("{param}", item.gold_sql)
        current = best.get(item.family_tag)
        if current is None or occurrences < current[0]:
            best[item.family_tag] = (occurrences, template)
    return {tag: template for tag, (_, template) in best.items()}


def derive_question_seed(seed: int, question_id: int) -> int:
    """Stable per-question decoding seed; independent questions get
    independent draws while the whole run stays reproducible."""
    from hashlib import blake2b

    digest = blake2b(f"{seed}:{question_id}".encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class EvalOutcome:
    question_id: int
    strategy: Strategy
    exact_match: bool
    execution_match: bool
    difficulty: Difficulty
    sanitizer_rejected: bool
    latency_breakdown_ms: dict[str, float] = field(compare=False)
    prompt_tokens: int = 0

    def __post_init__(self) -> None:
        if self.sanitizer_rejected and self.execution_match:
            raise ValueError("a rejected candidate cannot be an execution match")


@dataclass(frozen=True)
class DifficultySlice:
    count: int
    execution_accuracy: float


@dataclass(frozen=True)
class BenchmarkReport:
    strategy: Strategy
    k: int
    n: int
    question_count: int
    execution_accuracy: float
    exact_match_rate: float
    per_difficulty: dict[str, DifficultySlice]
    wall_time_ms: float
    outcomes: tuple[EvalOutcome, ...]

    def __post_init__(self) -> None:
        if not (0.0 <= self.execution_accuracy <= 1.0):
            raise ValueError("execution_accuracy out of range")
        if not (0.0 <= self.exact_match_rate <= 1.0):
            raise ValueError("exact_match_rate out of range")
        if sum(s.count for s in self.per_difficulty.values()) != self.question_count:
            raise ValueError("per-difficulty counts must sum to question count")


def run_benchmark(
    suite: Sequence[SuiteItem],
    strategy: Strategy,
    k: int,
    n: int,
    backend: Backend | SimulatedModelConfig,
    seed: int,
    pipeline: "QueryPipeline",
) -> BenchmarkReport:
    """Evaluate one strategy over a suite.

    A SimulatedModelConfig is promoted to a backend whose knowledge table is
    derived from the suite itself. Per-question failures (rejection,
    execution errors) are recorded as misses, never aborts. Outcomes are a
    pure fold: deterministic given the seed and configuration.
    """
    if isinstance(backend, SimulatedModelConfig):
        backend = SimulatedBackend(backend, knowledge=knowledge_from_suite(suite))

    started = time.perf_counter()
    outcomes: list[EvalOutcome] = []
    for item in suite:
        result = pipeline.answer(
            dataset_id=item.dataset_id,
            question_text=item.question,
            strategy=strategy,
            k=k,
            n=n,
            backend=backend,
            decoding_seed=derive_question_seed(seed, item.question_id),
        )
        rejected = result.verdict is not None and not result.verdict.allowed
        pred_sql = result.generated.sql if result.generated else ""
        em = exact_match(pred_sql, item.gold_sql) if pred_sql else False
        ex = (
            execution_match(pred_sql, item.gold_sql, item.dataset_id, pipeline.engine)
            if pred_sql and not rejected
            else False
        )
        outcomes.append(
            EvalOutcome(
                question_id=item.question_id,
                strategy=strategy,
                exact_match=em,
                execution_match=ex,
                difficulty=classify_difficulty(item.gold_sql),
                sanitizer_rejected=rejected,
                latency_breakdown_ms=result.timings,
                prompt_tokens=len(result.prompt.text.split()) if result.prompt else 0,
            )
        )
    wall_ms = (time.perf_counter() - started) * 1000

    total = len(outcomes)
    slices: dict[str, DifficultySlice] = {}
    for level in Difficulty:
        bucket = [o for o in outcomes if o.difficulty is level]
        if bucket:
            slices[level.value] = DifficultySlice(
                count=len(bucket),
                execution_accuracy=sum(o.execution_match for o in bucket) / len(bucket),
            )
    return BenchmarkReport(
        strategy=strategy,
        k=k,
        n=n,
        question_count=total,
        execution_accuracy=sum(o.execution_match for o in outcomes) / total,
        exact_match_rate=sum(o.exact_match for o in outcomes) / total,
        per_difficulty=slices,
        wall_time_ms=wall_ms,
        outcomes=tuple(outcomes),
    )
