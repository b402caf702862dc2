"""askdb: natural-language questions answered as guarded read-only SQL.

The pipeline embeds a question, retrieves similar worked examples from a
per-dataset pool, assembles a prompt, asks a model for SQL, statically
sanitizes the candidate, and executes it against a read-only SQLite
connection. Everything is deterministic under the simulated backend, which
is what the benchmark tooling runs against.
"""

from .embedding import (
    Embedder,
    EmbedderConfig,
    EmbeddingVector,
    cosine_similarity,
    embed_batch,
    embed_text,
)
from .engine import (
    GuardRejectedError,
    QueryEngine,
    QueryTimeoutError,
    ResultSignature,
    ResultTable,
    normalize_result,
)
from .evaluation import (
    BenchmarkReport,
    Difficulty,
    EvalOutcome,
    SuiteItem,
    classify_difficulty,
    decompose,
    exact_match,
    execution_match,
    load_suite,
    run_benchmark,
)
from .gateway import (
    DecodingParams,
    GeneratedSQL,
    HttpChatBackend,
    SimulatedBackend,
    SimulatedModelConfig,
    cross_consistent_generate,
    generate,
    self_consistent_generate,
)
from .guard import SanitizationVerdict, Violation, sanitize, tokenize_sql
from .index import ExampleEntry, SearchHit, VectorIndex
from .pipeline import (
    DatasetBundle,
    OnboardingError,
    PipelineConfig,
    PipelineResult,
    QueryPipeline,
)
from .prompting import (
    AssembledPrompt,
    PromptBuilder,
    PromptTemplate,
    SchemaDescriptor,
    Strategy,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledPrompt",
    "BenchmarkReport",
    "DatasetBundle",
    "DecodingParams",
    "Difficulty",
    "Embedder",
    "EmbedderConfig",
    "EmbeddingVector",
    "EvalOutcome",
    "ExampleEntry",
    "GeneratedSQL",
    "GuardRejectedError",
    "HttpChatBackend",
    "OnboardingError",
    "PipelineConfig",
    "PipelineResult",
    "PromptBuilder",
    "PromptTemplate",
    "QueryEngine",
    "QueryPipeline",
    "QueryTimeoutError",
    "ResultSignature",
    "ResultTable",
    "SanitizationVerdict",
    "SchemaDescriptor",
    "SearchHit",
    "SimulatedBackend",
    "SimulatedModelConfig",
    "Strategy",
    "SuiteItem",
    "VectorIndex",
    "Violation",
    "classify_difficulty",
    "cosine_similarity",
    "cross_consistent_generate",
    "decompose",
    "embed_batch",
    "embed_text",
    "exact_match",
    "execution_match",
    "generate",
    "load_suite",
    "normalize_result",
    "run_benchmark",
    "sanitize",
    "self_consistent_generate",
    "tokenize_sql",
]
