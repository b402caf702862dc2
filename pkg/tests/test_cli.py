import json
from pathlib import Path

import click
import pytest

from conftest import FIXTURES
from askdb.cli import (
    SPARK_BLOCKS,
    SweepResult,
    SweepRow,
    main,
    parse_strategy_token,
    sparkline,
)
from askdb.corpus import write_dataset_dir
from askdb.evaluation import load_suite, run_benchmark
from askdb.gateway import SimulatedModelConfig
from askdb.pipeline import QueryPipeline
from askdb.prompting import Strategy

SALES_DIR = str(FIXTURES / "sales")


@pytest.fixture(scope="module")
def cli_corpus(tmp_path_factory):
    """Corpus directory written through the CLI itself."""
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["corpus", "--out", str(out)]) == 0
    return out


class TestStrategyTokens:
    def test_plain_tokens(self):
        assert parse_strategy_token("ZS") == ("ZS", Strategy.ZS, None)
        assert parse_strategy_token("fs") == ("FS", Strategy.FS, None)
        assert parse_strategy_token(" cfs ") == ("CFS", Strategy.CFS, None)

    def test_self_consistency_tokens_force_n(self):
        assert parse_strategy_token("SC") == ("SC", Strategy.ZS, 5)
        assert parse_strategy_token("cfs-sc") == ("CFS-SC", Strategy.CFS, 5)

    def test_unknown_token(self):
        with pytest.raises(click.UsageError):
            parse_strategy_token("MAGIC")


class TestSparkline:
    def test_empty(self):
        assert sparkline([]) == ""

    def test_constant_series_is_flat(self):
        assert sparkline([0.5, 0.5, 0.5]) == "▄▄▄"

    def test_monotone_series_spans_blocks(self):
        line = sparkline([0.0, 0.25, 0.5, 0.75, 1.0])
        assert line[0] == SPARK_BLOCKS[0]
        assert line[-1] == SPARK_BLOCKS[-1]
        assert all(ch in SPARK_BLOCKS for ch in line)


class TestSweepTypes:
    def test_ks_must_increase(self):
        rows = (
            SweepRow(k=2, execution_accuracy=0.5, mean_prompt_tokens=10.0),
            SweepRow(k=1, execution_accuracy=0.6, mean_prompt_tokens=20.0),
        )
        with pytest.raises(ValueError):
            SweepResult(rows=rows)

    def test_accuracy_bounds(self):
        with pytest.raises(ValueError):
            SweepResult(
                rows=(SweepRow(k=0, execution_accuracy=1.5, mean_prompt_tokens=1.0),)
            )


class TestCorpusCommand:
    def test_writes_dataset_and_suite(self, cli_corpus, capsys):
        for name in (
            "schema.json",
            "template.json",
            "examples.jsonl",
            "fixture.db",
            "suite.jsonl",
        ):
            assert (cli_corpus / name).exists(), name
        assert len(load_suite(cli_corpus / "suite.jsonl")) == 40


class TestOnboardCommand:
    def test_onboards_fixture_dir(self, tmp_path, capsys):
        ws = tmp_path / "ws"
        code = main(["onboard", "--dataset-dir", SALES_DIR, "--workspace", str(ws)])
        out = capsys.readouterr().out
        assert code == 0
        assert "12 entries added" in out
        assert (ws / "manifest.json").exists()
        assert (ws / "index.bin").exists()
        manifest = json.loads((ws / "manifest.json").read_text())
        assert manifest["datasets"][0]["dataset_id"] == "sales"

    def test_duplicate_is_user_error(self, tmp_path, capsys):
        ws = tmp_path / "ws"
        assert main(["onboard", "--dataset-dir", SALES_DIR, "--workspace", str(ws)]) == 0
        capsys.readouterr()
        code = main(["onboard", "--dataset-dir", SALES_DIR, "--workspace", str(ws)])
        err = capsys.readouterr().err
        assert code == 1
        assert "already onboarded" in err

    def test_missing_template_names_the_file(self, tmp_path, capsys):
        broken = tmp_path / "broken"
        broken.mkdir()
        (broken / "schema.json").write_text(
            (Path(SALES_DIR) / "schema.json").read_text()
        )
        code = main(["onboard", "--dataset-dir", str(broken), "--workspace", str(tmp_path / "ws")])
        err = capsys.readouterr().err
        assert code == 1
        assert "template.json" in err

    def test_mutating_example_reports_diagnostics(self, tmp_path, capsys):
        bad_dir = tmp_path / "bad"
        for name in ("schema.json", "template.json", "monthly_sales.csv", "yearly_targets.csv", "fixture.db"):
            (bad_dir / name).parent.mkdir(parents=True, exist_ok=True)
            (bad_dir / name).write_bytes((Path(SALES_DIR) / name).read_bytes())
        lines = (Path(SALES_DIR) / "examples.jsonl").read_text().splitlines()
        lines.append(json.dumps({"question": "drop it", "sql": "DROP TABLE monthly_sales", "tags": []}))
        (bad_dir / "examples.jsonl").write_text("\n".join(lines) + "\n")

        code = main(["onboard", "--dataset-dir", str(bad_dir), "--workspace", str(tmp_path / "ws")])
        err = capsys.readouterr().err
        assert code == 1
        assert "example 12" in err
        assert "sanitizer" in err
        assert "1 example(s) rejected" in err


class TestQueryCommand:
    @pytest.fixture()
    def workspace(self, tmp_path, capsys):
        ws = tmp_path / "ws"
        assert main(["onboard", "--dataset-dir", SALES_DIR, "--workspace", str(ws)]) == 0
        capsys.readouterr()
        return ws

    def test_answers_from_persisted_workspace(self, workspace, capsys):
        code = main(
            ["query", "total revenue recorded for east", "--workspace", str(workspace)]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "strategy: CFS" in out
        assert "SQL: SELECT SUM(amount) FROM monthly_sales WHERE region = 'east'" in out
        assert "153838.75" in out
        assert "(1 row(s))" in out

    def test_requires_exactly_one_source(self, capsys):
        assert main(["query", "hello"]) == 1
        assert (
            main(
                [
                    "query",
                    "hello",
                    "--workspace",
                    SALES_DIR,
                    "--dataset-dir",
                    SALES_DIR,
                ]
            )
            == 1
        )
        err = capsys.readouterr().err
        assert "exactly one of" in err

    def test_unknown_dataset(self, capsys):
        code = main(
            [
                "query",
                "anything",
                "--dataset-dir",
                SALES_DIR,
                "--dataset",
                "nope",
            ]
        )
        err = capsys.readouterr().err
        assert code == 1
        assert "unknown dataset 'nope'" in err

    def test_sanitizer_rejection_prints_violations(self, capsys):
        code = main(
            [
                "query",
                "please inject mutation",
                "--dataset-dir",
                SALES_DIR,
                "--strategy",
                "ZS",
                "--k",
                "0",
                "--fault-trigger",
                "inject mutation",
            ]
        )
        captured = capsys.readouterr()
        assert code == 1
        assert "SQL: DROP TABLE monthly_sales" in captured.out
        assert "rejected by sanitizer:" in captured.out
        assert "forbidden_keyword" in captured.out
        assert "query rejected" in captured.err

    def test_empty_pool_degrades_but_still_answers(self, tmp_path, capsys):
        bare = write_dataset_dir(tmp_path / "bare", "bare", ())
        code = main(
            [
                "query",
                "total revenue recorded for east",
                "--dataset-dir",
                str(bare),
                "--strategy",
                "CFS",
            ]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "degraded to zero-shot" in out
        assert "(1 row(s))" in out


class TestBenchCommand:
    def test_report_files_and_ordering(self, cli_corpus, tmp_path, capsys):
        out_dir = tmp_path / "report"
        code = main(
            [
                "bench",
                "--suite",
                str(cli_corpus / "suite.jsonl"),
                "--dataset-dir",
                str(cli_corpus),
                "--strategies",
                "ZS,FS,CFS",
                "--seed",
                "0",
                "--seed",
                "1",
                "--out",
                str(out_dir),
            ]
        )
        stdout = capsys.readouterr().out
        assert code == 0
        assert "wrote" in stdout

        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["dataset_id"] == "sales_bench"
        assert payload["backend"] == "sim"
        assert payload["seeds"] == [0, 1]
        assert payload["question_count"] == 40
        labels = [entry["label"] for entry in payload["strategies"]]
        assert labels == ["ZS", "FS", "CFS"]
        by_label = {e["label"]: e for e in payload["strategies"]}
        assert (
            by_label["CFS"]["mean_execution_accuracy"]
            > by_label["FS"]["mean_execution_accuracy"]
            > by_label["ZS"]["mean_execution_accuracy"]
        )
        for entry in payload["strategies"]:
            assert len(entry["per_seed"]) == 2
            for per_seed in entry["per_seed"]:
                assert len(per_seed["outcomes"]) == 40

        # Reproducibility contract: no clocks anywhere in the outputs.
        raw = (out_dir / "report.json").read_text() + (out_dir / "report.txt").read_text()
        assert "wall" not in raw
        assert "latency" not in raw
        assert "duration" not in raw

        table = (out_dir / "report.txt").read_text()
        assert table.splitlines()[2].startswith("strategy")
        assert "sim" in table.splitlines()[2]
        for label in labels:
            assert any(line.startswith(label) for line in table.splitlines())

    def test_byte_identical_reruns(self, cli_corpus, tmp_path, capsys):
        args = [
            "bench",
            "--suite",
            str(cli_corpus / "suite.jsonl"),
            "--dataset-dir",
            str(cli_corpus),
            "--strategies",
            "CFS",
            "--seed",
            "7",
        ]
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(args + ["--out", str(first)]) == 0
        assert main(args + ["--out", str(second)]) == 0
        capsys.readouterr()
        assert (first / "report.json").read_bytes() == (second / "report.json").read_bytes()
        assert (first / "report.txt").read_bytes() == (second / "report.txt").read_bytes()

    def test_self_consistency_token_forces_n(self, cli_corpus, tmp_path, capsys):
        out_dir = tmp_path / "sc"
        code = main(
            [
                "bench",
                "--suite",
                str(cli_corpus / "suite.jsonl"),
                "--dataset-dir",
                str(cli_corpus),
                "--strategies",
                "SC",
                "--out",
                str(out_dir),
            ]
        )
        capsys.readouterr()
        assert code == 0
        payload = json.loads((out_dir / "report.json").read_text())
        entry = payload["strategies"][0]
        assert entry["label"] == "SC"
        assert entry["strategy"] == "ZS"
        assert entry["n"] == 5

    def test_invalid_suite_is_user_error(self, cli_corpus, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        code = main(
            [
                "bench",
                "--suite",
                str(bad),
                "--dataset-dir",
                str(cli_corpus),
                "--out",
                str(tmp_path / "r"),
            ]
        )
        err = capsys.readouterr().err
        assert code == 1
        assert "invalid suite" in err

    def test_unexpected_failure_is_internal_error(self, cli_corpus, tmp_path, capsys, monkeypatch):
        import askdb.cli as cli_module

        def boom(*args, **kwargs):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli_module, "run_benchmark", boom)
        code = main(
            [
                "bench",
                "--suite",
                str(cli_corpus / "suite.jsonl"),
                "--dataset-dir",
                str(cli_corpus),
                "--out",
                str(tmp_path / "r"),
            ]
        )
        err = capsys.readouterr().err
        assert code == 2
        assert "internal error: boom" in err


class TestKsweepCommand:
    def test_csv_shape_and_monotonicity(self, cli_corpus, tmp_path, capsys):
        csv_path = tmp_path / "sweep.csv"
        code = main(
            [
                "ksweep",
                "--suite",
                str(cli_corpus / "suite.jsonl"),
                "--dataset-dir",
                str(cli_corpus),
                "--ks",
                "0,1,2,4",
                "--out",
                str(csv_path),
            ]
        )
        stdout = capsys.readouterr().out
        assert code == 0
        assert "accuracy by k:" in stdout
        spark = stdout.split("accuracy by k:", 1)[1].strip().splitlines()[0]
        assert spark and all(ch in SPARK_BLOCKS for ch in spark)

        lines = csv_path.read_text().splitlines()
        assert lines[0] == "k,accuracy,mean_prompt_tokens"
        rows = [line.split(",") for line in lines[1:]]
        assert [int(r[0]) for r in rows] == [0, 1, 2, 4]
        accuracies = [float(r[1]) for r in rows]
        assert all(a <= b + 1e-9 for a, b in zip(accuracies, accuracies[1:]))
        tokens = [float(r[2]) for r in rows]
        assert all(a < b for a, b in zip(tokens, tokens[1:]))

    def test_k0_equals_zero_shot(self, cli_corpus, tmp_path, capsys):
        csv_path = tmp_path / "sweep0.csv"
        assert (
            main(
                [
                    "ksweep",
                    "--suite",
                    str(cli_corpus / "suite.jsonl"),
                    "--dataset-dir",
                    str(cli_corpus),
                    "--ks",
                    "0",
                    "--out",
                    str(csv_path),
                ]
            )
            == 0
        )
        capsys.readouterr()
        k0_accuracy = float(csv_path.read_text().splitlines()[1].split(",")[1])

        from askdb.corpus import load_dataset_dir

        items = load_suite(cli_corpus / "suite.jsonl")
        pipeline = QueryPipeline()
        pipeline.onboard(load_dataset_dir(cli_corpus))
        report = run_benchmark(
            items,
            Strategy.ZS,
            k=0,
            n=1,
            backend=SimulatedModelConfig(competence=0.9, zs_hit_rate=0.1),
            seed=0,
            pipeline=pipeline,
        )
        assert k0_accuracy == pytest.approx(report.execution_accuracy, abs=1e-6)

    def test_bad_ks_value(self, cli_corpus, tmp_path, capsys):
        code = main(
            [
                "ksweep",
                "--suite",
                str(cli_corpus / "suite.jsonl"),
                "--dataset-dir",
                str(cli_corpus),
                "--ks",
                "4,2",
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )
        err = capsys.readouterr().err
        assert code == 1
        assert "strictly increasing" in err


class TestHelp:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "onboard" in capsys.readouterr().out
