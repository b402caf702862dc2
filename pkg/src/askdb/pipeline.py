"""End-to-end query pipeline.

One shared orchestration path for the REST service, the CLI, and the
benchmark runner: embed the question, retrieve demonstrations, assemble the
prompt, generate SQL, sanitize it, execute read-only, and report per-step
timings. Failures surface as data on the result object rather than
exceptions, because the benchmark must record them and a server must map
them to status codes; only misuse (unknown dataset, bad arguments) raises.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .embedding import Embedder
from .engine import (
    DEFAULT_ROW_LIMIT,
    DEFAULT_TIMEOUT_MS,
    QueryEngine,
    QueryTimeoutError,
    ResultTable,
)
from .gateway import (
    AllCandidatesRejectedError,
    Backend,
    DecodingParams,
    GeneratedSQL,
    GenerationError,
    generate,
    self_consistent_generate,
)
from .guard import SanitizationVerdict, sanitize
from .index import VectorIndex
from .prompting import (
    DEFAULT_K,
    AssembledPrompt,
    NLQuestion,
    PromptBuilder,
    PromptTemplate,
    SchemaDescriptor,
    Strategy,
)


class UnknownDatasetError(KeyError):
    """The pipeline has no onboarded dataset under this id."""


class DuplicateDatasetError(ValueError):
    """A dataset with this id is already onboarded."""


class OnboardingError(ValueError):
    """One or more examples failed validation; nothing was onboarded.

    diagnostics holds one row per failing example: index, question, error.
    """

    def __init__(self, dataset_id: str, diagnostics: list[dict]):
        super().__init__(
            f"onboarding of {dataset_id!r} rejected: "
            f"{len(diagnostics)} example(s) failed validation"
        )
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class DatasetBundle:
    """Everything needed to onboard one dataset."""

    dataset_id: str
    schema: SchemaDescriptor
    template: PromptTemplate
    examples: tuple[tuple[str, str, tuple[str, ...]], ...]  # (question, sql, tags)
    db_path: Path


@dataclass(frozen=True)
class PipelineConfig:
    default_strategy: Strategy = Strategy.CFS
    default_k: int = DEFAULT_K
    default_n: int = 1
    row_limit: int = DEFAULT_ROW_LIMIT
    timeout_ms: int = DEFAULT_TIMEOUT_MS


@dataclass
class PipelineResult:
    """Outcome of one question, successful or not.

    error_kind is None on success, else one of "generation", "sanitizer",
    "timeout", "execution". Timings are wall-clock milliseconds per step;
    the execute entry is absent when the statement never ran.
    """

    prompt: AssembledPrompt | None
    generated: GeneratedSQL | None
    verdict: SanitizationVerdict | None
    table: ResultTable | None
    demonstrations: tuple[str, ...]
    demonstration_ids: tuple[int, ...]
    timings: dict[str, float]
    warnings: tuple[str, ...] = ()
    error_kind: str | None = None
    error: str | None = None

    @property
    def sql(self) -> str:
        return self.generated.sql if self.generated else ""

    @property
    def ok(self) -> bool:
        return self.error_kind is None


class QueryPipeline:
    """Owns the per-dataset state and runs questions through all steps."""

    def __init__(
        self,
        embedder: Embedder | None = None,
        backend: Backend | None = None,
        config: PipelineConfig | None = None,
        index: VectorIndex | None = None,
    ):
        self.config = config or PipelineConfig()
        self.embedder = embedder or Embedder()
        if index is not None and index.dim != self.embedder.dim:
            raise ValueError(
                f"index dim {index.dim} does not match embedder dim {self.embedder.dim}"
            )
        self.index = index if index is not None else VectorIndex(dim=self.embedder.dim)
        self.builder = PromptBuilder()
        self.engine = QueryEngine()
        self.backend = backend
        self._schemas: dict[str, SchemaDescriptor] = {}
        self._lock = threading.Lock()

    # -- dataset lifecycle ---------------------------------------------------

    def datasets(self) -> tuple[str, ...]:
        return tuple(sorted(self._schemas))

    def has_dataset(self, dataset_id: str) -> bool:
        return dataset_id in self._schemas

    def schema_for(self, dataset_id: str) -> SchemaDescriptor:
        try:
            return self._schemas[dataset_id]
        except KeyError:
            raise UnknownDatasetError(dataset_id) from None

    def health(self) -> dict:
        """Consistent snapshot of what is onboarded and searchable.

        Taken under the commit lock, so a dataset is either fully present
        (template, schema, engine binding, pool entries) or absent.
        """
        with self._lock:
            return {
                "datasets": sorted(self._schemas),
                "index_entries": self.index.count(),
            }

    def adopt_dataset(self, bundle: DatasetBundle) -> None:
        """Register a dataset whose pool entries are already in the index.

        Used when rehydrating from a persisted index file: the entries were
        embedded at onboarding time, so only the engine binding, template,
        and schema need wiring.
        """
        with self._lock:
            if bundle.dataset_id in self._schemas:
                raise DuplicateDatasetError(bundle.dataset_id)
            self.engine.register_dataset(bundle.dataset_id, bundle.db_path)
            self.builder.register_template(bundle.template)
            self._schemas[bundle.dataset_id] = bundle.schema

    def onboard(self, bundle: DatasetBundle) -> int:
        """Validate and commit a dataset; returns the number of pool entries.

        Every example must sanitize and execute against the bundle's
        database. Validation happens against a scratch engine before any
        state is touched, so a failed onboarding leaves no trace; the commit
        itself publishes the template before the pool so concurrent readers
        never see examples without a template.
        """
        if self.has_dataset(bundle.dataset_id):
            raise DuplicateDatasetError(bundle.dataset_id)

        scratch = QueryEngine()
        scratch.register_dataset(bundle.dataset_id, bundle.db_path)
        diagnostics: list[dict] = []
        for i, (question, sql, _tags) in enumerate(bundle.examples):
            verdict = sanitize(sql)
            if not verdict.allowed:
                rules = ", ".join(v.rule for v in verdict.violations)
                diagnostics.append(
                    {"index": i, "question": question, "error": f"sanitizer: {rules}"}
                )
                continue
            try:
                scratch.execute(
                    sql, bundle.dataset_id, self.config.timeout_ms, self.config.row_limit
                )
            except Exception as exc:
                diagnostics.append(
                    {"index": i, "question": question, "error": f"execution: {exc}"}
                )
        if diagnostics:
            raise OnboardingError(bundle.dataset_id, diagnostics)

        vectors = self.embedder.embed_batch([q for q, _, _ in bundle.examples])
        items = [
            (bundle.dataset_id, question, sql, vector, tuple(tags))
            for (question, sql, tags), vector in zip(bundle.examples, vectors)
        ]
        with self._lock:
            if bundle.dataset_id in self._schemas:
                raise DuplicateDatasetError(bundle.dataset_id)
            self.engine.register_dataset(bundle.dataset_id, bundle.db_path)
            self.builder.register_template(bundle.template)
            self._schemas[bundle.dataset_id] = bundle.schema
            if items:
                self.index.add_many(items)
        return len(items)

    # -- answering -------------------------------------------------------------

    def answer(
        self,
        dataset_id: str,
        question_text: str,
        strategy: Strategy | None = None,
        k: int | None = None,
        n: int | None = None,
        backend: Backend | None = None,
        decoding_seed: int = 0,
        temperature: float = 0.0,
    ) -> PipelineResult:
        """Run one question through the full pipeline."""
        if not self.has_dataset(dataset_id):
            raise UnknownDatasetError(dataset_id)
        chosen_backend = backend or self.backend
        if chosen_backend is None:
            raise ValueError("no model backend configured")
        strategy = strategy or self.config.default_strategy
        k = self.config.default_k if k is None else k
        n = self.config.default_n if n is None else n

        question = NLQuestion(text=question_text, dataset_id=dataset_id)
        schema = self.schema_for(dataset_id)
        timings: dict[str, float] = {}
        warnings_out: list[str] = []

        def timed(name: str, fn):
            started = time.perf_counter()
            value = fn()
            timings[name] = (time.perf_counter() - started) * 1000
            return value

        demos = []
        if strategy is Strategy.CFS and k > 0:
            query_vec = timed("embed", lambda: self.embedder.embed(question.text))
            # A dataset onboarded with an empty pool has no index shard; that
            # is the degraded-to-zero-shot case, not an unknown dataset.
            hits = timed(
                "retrieve",
                lambda: self.index.search(query_vec, k, dataset_id)
                if self.index.has_dataset(dataset_id)
                else [],
            )
            demos = [h.entry for h in hits]
            if not demos:
                warnings_out.append(
                    f"demonstration pool is empty (requested {k}); "
                    "degraded to zero-shot"
                )
            elif len(demos) < k:
                warnings_out.append(
                    f"pool holds only {len(demos)} example(s), requested {k}"
                )
        else:
            timings["embed"] = 0.0
            timings["retrieve"] = 0.0

        static_examples = None
        if strategy is Strategy.FS:
            static_examples = self.index.entries(dataset_id)[:k]
            if len(static_examples) < k:
                warnings_out.append(
                    f"pool holds {len(static_examples)} static example(s), requested {k}"
                )

        prompt = timed(
            "build",
            lambda: self.builder.build_prompt(
                question,
                schema,
                strategy,
                k=k,
                static_examples=static_examples,
                demonstrations=demos if strategy is Strategy.CFS else None,
            ),
        )
        demo_questions = tuple(e.question for e in demos) if demos else tuple(
            e.question for e in (static_examples or ())
        )

        params = DecodingParams(temperature=temperature, seed=decoding_seed)
        executor = lambda sql: self.engine.execute(
            sql, dataset_id, self.config.timeout_ms, self.config.row_limit
        )
        try:
            if n > 1:
                generated = timed(
                    "generate",
                    lambda: self_consistent_generate(
                        prompt, n, params, chosen_backend, executor
                    ),
                )
            else:
                generated = timed(
                    "generate", lambda: generate(prompt, params, chosen_backend)
                )
        except AllCandidatesRejectedError as exc:
            return PipelineResult(
                prompt=prompt,
                generated=None,
                verdict=exc.verdicts[0],
                table=None,
                demonstrations=demo_questions,
                demonstration_ids=prompt.demonstration_ids,
                timings=timings,
                warnings=tuple(warnings_out)
                + (f"all {len(exc.verdicts)} sampled candidates were rejected",),
                error_kind="sanitizer",
                error=str(exc),
            )
        except GenerationError as exc:
            return PipelineResult(
                prompt=prompt,
                generated=None,
                verdict=None,
                table=None,
                demonstrations=demo_questions,
                demonstration_ids=prompt.demonstration_ids,
                timings=timings,
                warnings=tuple(warnings_out),
                error_kind="generation",
                error=str(exc),
            )

        verdict = timed("sanitize", lambda: sanitize(generated.sql))
        result = PipelineResult(
            prompt=prompt,
            generated=generated,
            verdict=verdict,
            table=None,
            demonstrations=demo_questions,
            demonstration_ids=prompt.demonstration_ids,
            timings=timings,
            warnings=tuple(warnings_out),
        )
        if not verdict.allowed:
            result.error_kind = "sanitizer"
            result.error = "; ".join(
                f"{v.rule}: {v.detail}" for v in verdict.violations
            )
            return result

        try:
            result.table = timed("execute", lambda: executor(generated.sql))
        except QueryTimeoutError as exc:
            timings.pop("execute", None)
            result.error_kind = "timeout"
            result.error = str(exc)
        except Exception as exc:
            timings.pop("execute", None)
            result.error_kind = "execution"
            result.error = str(exc)
        return result
