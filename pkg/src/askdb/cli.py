"""Command-line front door.

Exit codes: 0 success, 1 user error (bad inputs, validation failures,
rejected queries), 2 internal error. Bench and sweep outputs are pure
functions of (inputs, seed, flags): no timestamps or wall times are
written, so repeated invocations produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import click

from .corpus import load_dataset_dir, write_benchmark_corpus
from .evaluation import (
    BenchmarkReport,
    SuiteConfigError,
    load_suite,
    run_benchmark,
)
from .gateway import (
    DEFAULT_SELF_CONSISTENCY_N,
    Backend,
    HttpChatBackend,
    SimulatedBackend,
    SimulatedModelConfig,
)
from .index import VectorIndex
from .pipeline import (
    DuplicateDatasetError,
    OnboardingError,
    QueryPipeline,
    UnknownDatasetError,
)
from .prompting import Strategy

SPARK_BLOCKS = "▁▂▃▄▅▆▇█"


@dataclass(frozen=True)
class SweepRow:
    k: int
    execution_accuracy: float
    mean_prompt_tokens: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def __post_init__(self) -> None:
        ks = [r.k for r in self.rows]
        if any(a >= b for a, b in zip(ks, ks[1:])):
            raise ValueError("k values must be strictly increasing")
        for row in self.rows:
            if not 0.0 <= row.execution_accuracy <= 1.0:
                raise ValueError("accuracy out of range")


def parse_strategy_token(token: str) -> tuple[str, Strategy, int | None]:
    """Map a CLI strategy token to (label, strategy, forced n).

    SC is zero-shot with self-consistency; CFS-SC is contextual few-shot
    with self-consistency. The plain tokens leave n to the --n flag.
    """
    label = token.strip().upper()
    if label == "SC":
        return label, Strategy.ZS, DEFAULT_SELF_CONSISTENCY_N
    if label == "CFS-SC":
        return label, Strategy.CFS, DEFAULT_SELF_CONSISTENCY_N
    try:
        return label, Strategy(label), None
    except ValueError:
        raise click.UsageError(
            f"unknown strategy {token!r} (expected ZS, FS, CFS, SC, or CFS-SC)"
        ) from None


def sparkline(values: Sequence[float]) -> str:
    if not values:
        return ""
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        return SPARK_BLOCKS[3] * len(values)
    out = []
    for v in values:
        idx = round((v - lo) / (hi - lo) * (len(SPARK_BLOCKS) - 1))
        out.append(SPARK_BLOCKS[idx])
    return "".join(out)


def _build_backend(
    kind: str,
    competence: float,
    zs_hit_rate: float,
    fault_trigger: str | None,
    endpoint: str | None,
    model: str | None,
    api_key_env: str,
) -> Backend:
    if kind == "sim":
        return SimulatedBackend(
            SimulatedModelConfig(competence=competence, zs_hit_rate=zs_hit_rate),
            fault_trigger=fault_trigger,
        )
    if not endpoint or not model:
        raise click.UsageError("--backend http requires --endpoint and --model")
    return HttpChatBackend(endpoint=endpoint, model=model, api_key_env=api_key_env)


def _load_bundle(dataset_dir: str):
    try:
        return load_dataset_dir(dataset_dir)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc)) from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise click.ClickException(f"invalid dataset dir {dataset_dir}: {exc}") from exc


def _manifest_path(workspace: Path) -> Path:
    return workspace / "manifest.json"


def _index_path(workspace: Path) -> Path:
    return workspace / "index.bin"


def _pipeline_from_workspace(
    workspace: Path, backend: Backend | None = None
) -> QueryPipeline:
    manifest_file = _manifest_path(workspace)
    if not manifest_file.exists():
        raise click.ClickException(f"workspace has no manifest: {manifest_file}")
    manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
    index = VectorIndex.load(_index_path(workspace))
    pipeline = QueryPipeline(backend=backend, index=index)
    for entry in manifest.get("datasets", []):
        pipeline.adopt_dataset(_load_bundle(entry["dir"]))
    return pipeline


@click.group()
def cli() -> None:
    """Natural-language questions over registered SQLite datasets."""


@cli.command("onboard")
@click.option(
    "--dataset-dir",
    required=True,
    type=click.Path(exists=True, file_okay=False),
    help="Directory with schema.json, template.json, examples.jsonl, fixture.db.",
)
@click.option(
    "--workspace",
    required=True,
    type=click.Path(file_okay=False),
    help="Where the persisted index and manifest live.",
)
def cmd_onboard(dataset_dir: str, workspace: str) -> None:
    """Validate a dataset directory and add it to a workspace."""
    ws = Path(workspace)
    ws.mkdir(parents=True, exist_ok=True)
    manifest_file = _manifest_path(ws)
    manifest = (
        json.loads(manifest_file.read_text(encoding="utf-8"))
        if manifest_file.exists()
        else {"datasets": []}
    )

    bundle = _load_bundle(dataset_dir)
    index_file = _index_path(ws)
    index = VectorIndex.load(index_file) if index_file.exists() else None
    pipeline = QueryPipeline(index=index)
    for entry in manifest.get("datasets", []):
        pipeline.adopt_dataset(_load_bundle(entry["dir"]))

    try:
        added = pipeline.onboard(bundle)
    except DuplicateDatasetError:
        raise click.ClickException(
            f"dataset {bundle.dataset_id!r} is already onboarded"
        ) from None
    except OnboardingError as exc:
        for diag in exc.diagnostics:
            click.echo(
                f"  example {diag.get('index')}: {diag.get('error')}", err=True
            )
        raise click.ClickException(
            f"onboarding failed: {len(exc.diagnostics)} example(s) rejected"
        ) from None

    pipeline.index.persist(index_file)
    manifest["datasets"].append(
        {"dataset_id": bundle.dataset_id, "dir": str(Path(dataset_dir).resolve())}
    )
    manifest_file.write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    click.echo(
        f"onboarded {bundle.dataset_id}: {added} entries added "
        f"(index now holds {pipeline.index.count()})"
    )


@cli.command("query")
@click.argument("question")
@click.option("--workspace", type=click.Path(exists=True, file_okay=False))
@click.option("--dataset-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--dataset", "dataset_id", default=None, help="Dataset id to query.")
@click.option("--strategy", default="CFS", show_default=True)
@click.option("--k", type=int, default=None, help="Demonstrations to include.")
@click.option("--n", type=int, default=None, help="Self-consistency samples.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["sim", "http"]),
    default="sim",
    show_default=True,
)
@click.option("--competence", type=float, default=1.0, show_default=True)
@click.option("--zs-hit-rate", type=float, default=0.0, show_default=True)
@click.option("--fault-trigger", default=None, hidden=True)
@click.option("--endpoint", default=None, help="Chat-completions URL (http backend).")
@click.option("--model", default=None, help="Model name (http backend).")
@click.option("--api-key-env", default="ASKDB_API_KEY", show_default=True)
def cmd_query(
    question: str,
    workspace: str | None,
    dataset_dir: str | None,
    dataset_id: str | None,
    strategy: str,
    k: int | None,
    n: int | None,
    seed: int,
    backend_kind: str,
    competence: float,
    zs_hit_rate: float,
    fault_trigger: str | None,
    endpoint: str | None,
    model: str | None,
    api_key_env: str,
) -> None:
    """Answer one question and print the SQL, verdict, and result table."""
    if (workspace is None) == (dataset_dir is None):
        raise click.UsageError("pass exactly one of --workspace or --dataset-dir")
    backend = _build_backend(
        backend_kind, competence, zs_hit_rate, fault_trigger, endpoint, model, api_key_env
    )
    label, strat, forced_n = parse_strategy_token(strategy)

    if workspace is not None:
        pipeline = _pipeline_from_workspace(Path(workspace), backend=backend)
    else:
        pipeline = QueryPipeline(backend=backend)
        bundle = _load_bundle(dataset_dir)
        try:
            pipeline.onboard(bundle)
        except OnboardingError as exc:
            raise click.ClickException(
                f"onboarding failed: {len(exc.diagnostics)} example(s) rejected"
            ) from None

    if dataset_id is None:
        known = pipeline.datasets()
        if len(known) != 1:
            raise click.UsageError(
                f"--dataset required (workspace has {len(known)} datasets)"
            )
        dataset_id = known[0]

    try:
        result = pipeline.answer(
            dataset_id=dataset_id,
            question_text=question,
            strategy=strat,
            k=k,
            n=n if n is not None else forced_n,
            decoding_seed=seed,
        )
    except UnknownDatasetError:
        raise click.ClickException(f"unknown dataset {dataset_id!r}") from None

    click.echo(f"strategy: {label}")
    click.echo(f"SQL: {result.sql}")
    for warning in result.warnings:
        click.echo(f"warning: {warning}")

    if result.error_kind == "sanitizer":
        click.echo("rejected by sanitizer:")
        if result.verdict is not None:
            for v in result.verdict.violations:
                click.echo(f"  - {v.rule}: {v.detail} (offset {v.offset})")
        raise click.ClickException("query rejected")
    if result.error_kind is not None:
        raise click.ClickException(f"{result.error_kind} failure: {result.error}")

    table = result.table
    assert table is not None
    click.echo(" | ".join(table.columns))
    for row in table.rows:
        click.echo(" | ".join("" if v is None else str(v) for v in row))
    suffix = ", truncated" if table.truncated else ""
    click.echo(f"({table.row_count} row(s){suffix})")


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _report_payload(
    dataset_id: str,
    backend_label: str,
    k: int,
    seeds: Sequence[int],
    question_count: int,
    per_strategy: list[dict],
) -> dict:
    return {
        "dataset_id": dataset_id,
        "backend": backend_label,
        "k": k,
        "seeds": list(seeds),
        "question_count": question_count,
        "strategies": per_strategy,
    }


def _report_entry(label: str, strategy: Strategy, n: int, reports: list[tuple[int, BenchmarkReport]]) -> dict:
    return {
        "label": label,
        "strategy": strategy.value,
        "n": n,
        "mean_execution_accuracy": _mean([r.execution_accuracy for _, r in reports]),
        "mean_exact_match_rate": _mean([r.exact_match_rate for _, r in reports]),
        "per_seed": [
            {
                "seed": seed,
                "execution_accuracy": report.execution_accuracy,
                "exact_match_rate": report.exact_match_rate,
                "per_difficulty": {
                    name: {
                        "count": s.count,
                        "execution_accuracy": s.execution_accuracy,
                    }
                    for name, s in sorted(report.per_difficulty.items())
                },
                "outcomes": [
                    {
                        "question_id": o.question_id,
                        "exact_match": o.exact_match,
                        "execution_match": o.execution_match,
                        "difficulty": o.difficulty.value,
                        "sanitizer_rejected": o.sanitizer_rejected,
                    }
                    for o in report.outcomes
                ],
            }
            for seed, report in reports
        ],
    }


def _render_report_table(backend_label: str, entries: list[dict], seeds: Sequence[int]) -> str:
    # Strategies as rows, the backend as the single value column.
    width = max(len("strategy"), *(len(e["label"]) for e in entries))
    lines = [
        f"execution accuracy, mean over seed(s) {','.join(str(s) for s in seeds)}",
        "",
        f"{'strategy':<{width}}  {backend_label:>10}",
    ]
    for entry in entries:
        lines.append(
            f"{entry['label']:<{width}}  {entry['mean_execution_accuracy']:>10.4f}"
        )
    return "\n".join(lines) + "\n"


@cli.command("bench")
@click.option("--suite", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--strategies", default="ZS,FS,CFS", show_default=True)
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--n", type=int, default=None, help="Samples per question (SC tokens default to 5).")
@click.option("--seed", "seeds", type=int, multiple=True, default=(0,), show_default=True)
@click.option(
    "--backend",
    "backend_kind",
    type=click.Choice(["sim", "http"]),
    default="sim",
    show_default=True,
)
@click.option("--competence", type=float, default=0.9, show_default=True)
@click.option("--zs-hit-rate", type=float, default=0.1, show_default=True)
@click.option("--endpoint", default=None)
@click.option("--model", default=None)
@click.option("--api-key-env", default="ASKDB_API_KEY", show_default=True)
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
    help="Directory for report.json and report.txt.",
)
def cmd_bench(
    suite: str,
    dataset_dir: str,
    strategies: str,
    k: int,
    n: int | None,
    seeds: tuple[int, ...],
    backend_kind: str,
    competence: float,
    zs_hit_rate: float,
    endpoint: str | None,
    model: str | None,
    api_key_env: str,
    out: str,
) -> None:
    """Benchmark strategies over a suite; writes report.json and report.txt."""
    try:
        items = load_suite(suite)
    except SuiteConfigError as exc:
        raise click.ClickException(f"invalid suite: {exc}") from exc

    bundle = _load_bundle(dataset_dir)
    pipeline = QueryPipeline()
    try:
        pipeline.onboard(bundle)
    except OnboardingError as exc:
        raise click.ClickException(
            f"onboarding failed: {len(exc.diagnostics)} example(s) rejected"
        ) from None

    parsed = [parse_strategy_token(tok) for tok in strategies.split(",") if tok.strip()]
    if not parsed:
        raise click.UsageError("--strategies must name at least one strategy")

    if backend_kind == "sim":
        backend: Backend | SimulatedModelConfig = SimulatedModelConfig(
            competence=competence, zs_hit_rate=zs_hit_rate
        )
        backend_label = "sim"
    else:
        backend = _build_backend(
            backend_kind, competence, zs_hit_rate, None, endpoint, model, api_key_env
        )
        backend_label = model or "http"

    entries = []
    for label, strategy, forced_n in parsed:
        n_eff = n if n is not None else (forced_n if forced_n is not None else 1)
        runs = [
            (seed, run_benchmark(items, strategy, k, n_eff, backend, seed, pipeline))
            for seed in seeds
        ]
        entries.append(_report_entry(label, strategy, n_eff, runs))
        click.echo(
            f"{label}: execution_accuracy={entries[-1]['mean_execution_accuracy']:.4f} "
            f"exact_match={entries[-1]['mean_exact_match_rate']:.4f}"
        )

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _report_payload(
        bundle.dataset_id, backend_label, k, seeds, len(items), entries
    )
    report_json = out_dir / "report.json"
    report_json.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    report_txt = out_dir / "report.txt"
    report_txt.write_text(
        _render_report_table(backend_label, entries, seeds), encoding="utf-8"
    )
    click.echo(f"wrote {report_json} and {report_txt}")


@cli.command("ksweep")
@click.option("--suite", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option(
    "--ks",
    default="0,1,2,3,4,5,6,7,8",
    show_default=True,
    help="Comma-separated k values, strictly increasing.",
)
@click.option("--n", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--competence", type=float, default=0.9, show_default=True)
@click.option("--zs-hit-rate", type=float, default=0.1, show_default=True)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    default="ksweep.csv",
    show_default=True,
)
def cmd_ksweep(
    suite: str,
    dataset_dir: str,
    ks: str,
    n: int,
    seed: int,
    competence: float,
    zs_hit_rate: float,
    out: str,
) -> None:
    """Sweep demonstration count k under CFS; writes a CSV plus a sparkline."""
    try:
        k_values = [int(part) for part in ks.split(",") if part.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad --ks value: {exc}") from exc

    try:
        items = load_suite(suite)
    except SuiteConfigError as exc:
        raise click.ClickException(f"invalid suite: {exc}") from exc

    bundle = _load_bundle(dataset_dir)
    pipeline = QueryPipeline()
    try:
        pipeline.onboard(bundle)
    except OnboardingError as exc:
        raise click.ClickException(
            f"onboarding failed: {len(exc.diagnostics)} example(s) rejected"
        ) from None
    config = SimulatedModelConfig(competence=competence, zs_hit_rate=zs_hit_rate)

    rows = []
    for k in k_values:
        report = run_benchmark(items, Strategy.CFS, k, n, config, seed, pipeline)
        rows.append(
            SweepRow(
                k=k,
                execution_accuracy=report.execution_accuracy,
                mean_prompt_tokens=_mean([o.prompt_tokens for o in report.outcomes]),
            )
        )
    try:
        result = SweepResult(rows=tuple(rows))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["k,accuracy,mean_prompt_tokens"]
    for row in result.rows:
        lines.append(
            f"{row.k},{row.execution_accuracy:.6f},{row.mean_prompt_tokens:.2f}"
        )
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    click.echo(
        "accuracy by k: " + sparkline([r.execution_accuracy for r in result.rows])
    )
    click.echo(f"wrote {out_path}")


@cli.command("corpus")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--dataset-id", default="sales_bench", show_default=True)
def cmd_corpus(out: str, dataset_id: str) -> None:
    """Write the synthetic benchmark corpus (dataset dir plus suite.jsonl)."""
    directory = write_benchmark_corpus(out, dataset_id=dataset_id)
    click.echo(f"wrote corpus to {directory} (pool of 20, suite of 40)")


@cli.command("serve")
@click.option("--config", required=True, type=click.Path(exists=True, dir_okay=False))
def cmd_serve(config: str) -> None:
    """Run the HTTP service."""
    from .service import load_service_config, serve

    try:
        service_config = load_service_config(config)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise click.ClickException(f"invalid config: {exc}") from exc
    serve(service_config)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point with the 0/1/2 exit-code convention."""
    try:
        cli.main(args=argv, prog_name="askdb", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - the 0/1/2 contract needs a catch-all
        click.echo(f"internal error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
