"""Prompt assembly for SQL generation.

Every prompt has the same section order: system instructions, rendered
schema, optional demonstrations, then the user question. The three strategies
differ only in how demonstrations are chosen: none (ZS), a fixed leading
slice of the dataset's example pool (FS), or nearest neighbors of the
question by embedding similarity (CFS). A contextual prompt built with k=0 is
textually identical to a zero-shot prompt, which keeps sweep baselines
honest.
"""

from __future__ import annotations

import json
import threading
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .embedding import Embedder
from .index import ExampleEntry, VectorIndex

DEFAULT_K = 4


class Strategy(str, Enum):
    ZS = "ZS"
    FS = "FS"
    CFS = "CFS"


class MissingTemplateError(KeyError):
    """No prompt template registered for the requested dataset."""


class MissingStaticExamplesError(ValueError):
    """Few-shot prompting needs a static example list and none was given."""


class DemonstrationShortfallWarning(UserWarning):
    """The demonstration pool held fewer examples than requested."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    sql_type: str


@dataclass(frozen=True)
class TableSpec:
    name: str
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(names) != len(set(names)):
            raise ValueError(f"table {self.name!r} has duplicate column names")
        if not self.columns:
            raise ValueError(f"table {self.name!r} has no columns")


@dataclass(frozen=True)
class SchemaDescriptor:
    """Table layout of one dataset, renderable as canonical DDL text."""

    dataset_id: str
    tables: tuple[TableSpec, ...]

    def __post_init__(self) -> None:
        names = [t.name for t in self.tables]
        if len(names) != len(set(names)):
            raise ValueError("schema has duplicate table names")
        if not self.tables:
            raise ValueError("schema must declare at least one table")

    @property
    def rendered(self) -> str:
        """CREATE TABLE text, a pure function of the table specs."""
        blocks = []
        for table in self.tables:
            cols = ",\n".join(f"  {c.name} {c.sql_type}" for c in table.columns)
            blocks.append(f"CREATE TABLE {table.name} (\n{cols}\n);")
        return "\n\n".join(blocks)

    @classmethod
    def from_dict(cls, payload: dict) -> "SchemaDescriptor":
        tables = tuple(
            TableSpec(
                name=t["name"],
                columns=tuple(
                    ColumnSpec(name=c["name"], sql_type=c["sql_type"])
                    for c in t["columns"]
                ),
            )
            for t in payload["tables"]
        )
        return cls(dataset_id=payload["dataset_id"], tables=tables)


@dataclass(frozen=True)
class PromptTemplate:
    dataset_id: str
    system_instructions: str
    demonstration_header: str = "Examples:"
    question_prefix: str = "Question:"

    def __post_init__(self) -> None:
        if not self.system_instructions.strip():
            raise ValueError("system_instructions must be non-empty")


@dataclass(frozen=True)
class NLQuestion:
    text: str
    dataset_id: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("question text must be non-empty")


@dataclass(frozen=True)
class AssembledPrompt:
    text: str
    strategy: Strategy
    k_used: int
    demonstration_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.k_used != len(self.demonstration_ids):
            raise ValueError("k_used must equal the number of demonstrations")


def select_demonstrations(
    question: NLQuestion,
    k: int,
    embedder: Embedder,
    index: VectorIndex,
) -> list[ExampleEntry]:
    """Nearest pool examples for a question, most similar first.

    Degrades rather than fails: an empty or undersized pool returns what
    exists and emits DemonstrationShortfallWarning.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return []
    hits = index.search(embedder.embed(question.text), k, question.dataset_id)
    if len(hits) < k:
        warnings.warn(
            f"dataset {question.dataset_id!r} holds {len(hits)} example(s), "
            f"requested {k}; prompt will degrade toward zero-shot",
            DemonstrationShortfallWarning,
            stacklevel=2,
        )
    return [hit.entry for hit in hits]


def render_demonstration(entry: ExampleEntry) -> str:
    return f"Q: {entry.question}\nSQL: {entry.sql}"


class PromptBuilder:
    """Holds per-dataset templates and assembles prompts.

    Template registration is serialized with a lock; assembly only reads.
    """

    def __init__(self) -> None:
        self._templates: dict[str, PromptTemplate] = {}
        self._lock = threading.Lock()

    def register_template(self, template: PromptTemplate) -> None:
        """Register or replace the template for template.dataset_id."""
        with self._lock:
            self._templates[template.dataset_id] = template

    def template_for(self, dataset_id: str) -> PromptTemplate:
        try:
            return self._templates[dataset_id]
        except KeyError:
            raise MissingTemplateError(dataset_id) from None

    def has_template(self, dataset_id: str) -> bool:
        return dataset_id in self._templates

    def load_templates_file(self, path: str | Path) -> int:
        """Load a JSON array of template objects; returns how many loaded."""
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        templates = [
            PromptTemplate(
                dataset_id=item["dataset_id"],
                system_instructions=item["system_instructions"],
                demonstration_header=item.get("demonstration_header", "Examples:"),
                question_prefix=item.get("question_prefix", "Question:"),
            )
            for item in payload
        ]
        for template in templates:
            self.register_template(template)
        return len(templates)

    def dump_templates_file(self, path: str | Path) -> None:
        items = [
            {
                "dataset_id": t.dataset_id,
                "system_instructions": t.system_instructions,
                "demonstration_header": t.demonstration_header,
                "question_prefix": t.question_prefix,
            }
            for _, t in sorted(self._templates.items())
        ]
        Path(path).write_text(
            json.dumps(items, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    def build_prompt(
        self,
        question: NLQuestion,
        schema: SchemaDescriptor,
        strategy: Strategy,
        k: int | None = None,
        static_examples: Sequence[ExampleEntry] | None = None,
        embedder: Embedder | None = None,
        index: VectorIndex | None = None,
        demonstrations: Sequence[ExampleEntry] | None = None,
    ) -> AssembledPrompt:
        """Assemble the full prompt text for one question.

        FS requires static_examples (the first k are used, in their given
        order). CFS either retrieves via embedder and index, or accepts
        pre-retrieved entries through demonstrations when the caller has
        already done the search.
        """
        template = self.template_for(question.dataset_id)
        effective_k = DEFAULT_K if k is None else k
        if effective_k < 0:
            raise ValueError("k must be non-negative")

        demos: list[ExampleEntry]
        if strategy is Strategy.ZS or effective_k == 0:
            demos = []
        elif strategy is Strategy.FS:
            if static_examples is None:
                raise MissingStaticExamplesError(
                    "FS prompting requires static_examples"
                )
            demos = list(static_examples[:effective_k])
            if len(demos) < effective_k:
                warnings.warn(
                    f"only {len(demos)} static example(s) available, requested "
                    f"{effective_k}",
                    DemonstrationShortfallWarning,
                    stacklevel=2,
                )
        elif strategy is Strategy.CFS:
            if demonstrations is not None:
                demos = list(demonstrations[:effective_k])
            else:
                if embedder is None or index is None:
                    raise ValueError(
                        "CFS prompting requires embedder and index "
                        "(or pre-retrieved demonstrations)"
                    )
                demos = select_demonstrations(question, effective_k, embedder, index)
        else:  # pragma: no cover - exhaustive over Strategy
            raise ValueError(f"unknown strategy {strategy}")

        blocks = [template.system_instructions, schema.rendered]
        if demos:
            demo_block = template.demonstration_header + "\n" + "\n\n".join(
                render_demonstration(e) for e in demos
            )
            blocks.append(demo_block)
        blocks.append(f"{template.question_prefix} {question.text}")
        text = "\n\n".join(blocks) + "\n"

        return AssembledPrompt(
            text=text,
            strategy=strategy,
            k_used=len(demos),
            demonstration_ids=tuple(e.id for e in demos),
        )
