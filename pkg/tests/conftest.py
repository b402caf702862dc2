from pathlib import Path

import pytest

from askdb.corpus import load_dataset_dir, write_benchmark_corpus
from askdb.evaluation import load_suite
from askdb.pipeline import QueryPipeline

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "sales_bench"
    write_benchmark_corpus(path)
    return path


@pytest.fixture(scope="session")
def corpus_bundle(corpus_dir):
    return load_dataset_dir(corpus_dir)


@pytest.fixture(scope="session")
def suite(corpus_dir):
    return load_suite(corpus_dir / "suite.jsonl")


@pytest.fixture(scope="session")
def bench_pipeline(corpus_bundle):
    """Onboarded pipeline shared by read-only benchmark tests."""
    pipeline = QueryPipeline()
    pipeline.onboard(corpus_bundle)
    return pipeline


@pytest.fixture(scope="session")
def sales_fixture_dir() -> Path:
    return FIXTURES / "sales"


@pytest.fixture()
def sales_db(sales_fixture_dir) -> Path:
    return sales_fixture_dir / "fixture.db"
