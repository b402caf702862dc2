import warnings

import pytest

from askdb.embedding import Embedder, embed_text
from askdb.index import ExampleEntry, VectorIndex
from askdb.prompting import (
    DEFAULT_K,
    AssembledPrompt,
    ColumnSpec,
    DemonstrationShortfallWarning,
    MissingStaticExamplesError,
    MissingTemplateError,
    NLQuestion,
    PromptBuilder,
    PromptTemplate,
    SchemaDescriptor,
    Strategy,
    TableSpec,
    render_demonstration,
    select_demonstrations,
)

SCHEMA = SchemaDescriptor(
    dataset_id="sales",
    tables=(
        TableSpec(
            name="monthly_sales",
            columns=(
                ColumnSpec("region", "TEXT"),
                ColumnSpec("month", "TEXT"),
                ColumnSpec("amount", "REAL"),
            ),
        ),
        TableSpec(
            name="yearly_targets",
            columns=(
                ColumnSpec("region", "TEXT"),
                ColumnSpec("target", "REAL"),
            ),
        ),
    ),
)

TEMPLATE = PromptTemplate(
    dataset_id="sales",
    system_instructions="Answer with one SQLite SELECT.",
    demonstration_header="Examples:",
    question_prefix="Question:",
)


def make_builder() -> PromptBuilder:
    builder = PromptBuilder()
    builder.register_template(TEMPLATE)
    return builder


def make_index(questions_sql) -> VectorIndex:
    embedder = Embedder()
    index = VectorIndex(dim=embedder.dim)
    for question, sql in questions_sql:
        index.add_entry("sales", question, sql, embedder.embed(question))
    return index


class TestSchemaRendering:
    def test_rendered_ddl(self):
        assert SCHEMA.rendered == (
            "CREATE TABLE monthly_sales (\n"
            "  region TEXT,\n"
            "  month TEXT,\n"
            "  amount REAL\n"
            ");\n"
            "\n"
            "CREATE TABLE yearly_targets (\n"
            "  region TEXT,\n"
            "  target REAL\n"
            ");"
        )

    def test_from_dict_round_trip(self):
        payload = {
            "dataset_id": "sales",
            "tables": [
                {
                    "name": "monthly_sales",
                    "columns": [
                        {"name": "region", "sql_type": "TEXT"},
                        {"name": "month", "sql_type": "TEXT"},
                        {"name": "amount", "sql_type": "REAL"},
                    ],
                },
                {
                    "name": "yearly_targets",
                    "columns": [
                        {"name": "region", "sql_type": "TEXT"},
                        {"name": "target", "sql_type": "REAL"},
                    ],
                },
            ],
        }
        assert SchemaDescriptor.from_dict(payload) == SCHEMA

    def test_duplicate_table_names_rejected(self):
        table = TableSpec(name="t", columns=(ColumnSpec("a", "TEXT"),))
        with pytest.raises(ValueError):
            SchemaDescriptor(dataset_id="d", tables=(table, table))

    def test_duplicate_column_names_rejected(self):
        with pytest.raises(ValueError):
            TableSpec(
                name="t",
                columns=(ColumnSpec("a", "TEXT"), ColumnSpec("a", "REAL")),
            )

    def test_empty_tables_rejected(self):
        with pytest.raises(ValueError):
            SchemaDescriptor(dataset_id="d", tables=())


class TestZeroShot:
    def test_golden_text(self):
        builder = make_builder()
        prompt = builder.build_prompt(
            NLQuestion(text="total revenue for east", dataset_id="sales"),
            SCHEMA,
            Strategy.ZS,
        )
        assert prompt.text == (
            "Answer with one SQLite SELECT.\n"
            "\n" + SCHEMA.rendered + "\n"
            "\n"
            "Question: total revenue for east\n"
        )
        assert prompt.strategy is Strategy.ZS
        assert prompt.k_used == 0
        assert prompt.demonstration_ids == ()

    def test_missing_template(self):
        builder = PromptBuilder()
        with pytest.raises(MissingTemplateError):
            builder.build_prompt(
                NLQuestion(text="q", dataset_id="sales"), SCHEMA, Strategy.ZS
            )


class TestFewShot:
    def _entries(self):
        return [
            ExampleEntry(
                id=i + 1,
                dataset_id="sales",
                question=f"question {i}",
                sql=f"SELECT {i}",
                embedding=embed_text(f"question {i}"),
            )
            for i in range(6)
        ]

    def test_uses_first_k_in_given_order(self):
        builder = make_builder()
        entries = self._entries()
        prompt = builder.build_prompt(
            NLQuestion(text="q", dataset_id="sales"),
            SCHEMA,
            Strategy.FS,
            k=3,
            static_examples=entries,
        )
        assert prompt.demonstration_ids == (1, 2, 3)
        assert "Q: question 0\nSQL: SELECT 0" in prompt.text
        assert "SELECT 3" not in prompt.text
        assert prompt.text.index("SELECT 0") < prompt.text.index("SELECT 2")

    def test_default_k(self):
        builder = make_builder()
        prompt = builder.build_prompt(
            NLQuestion(text="q", dataset_id="sales"),
            SCHEMA,
            Strategy.FS,
            static_examples=self._entries(),
        )
        assert prompt.k_used == DEFAULT_K == 4

    def test_requires_static_examples(self):
        builder = make_builder()
        with pytest.raises(MissingStaticExamplesError):
            builder.build_prompt(
                NLQuestion(text="q", dataset_id="sales"), SCHEMA, Strategy.FS, k=2
            )

    def test_shortfall_warns(self):
        builder = make_builder()
        with pytest.warns(DemonstrationShortfallWarning):
            prompt = builder.build_prompt(
                NLQuestion(text="q", dataset_id="sales"),
                SCHEMA,
                Strategy.FS,
                k=5,
                static_examples=self._entries()[:2],
            )
        assert prompt.k_used == 2


class TestContextualFewShot:
    POOL = [
        ("total revenue recorded for east", "SELECT SUM(amount) FROM monthly_sales"),
        ("average monthly revenue for east", "SELECT AVG(amount) FROM monthly_sales"),
        ("top three revenue months for east", "SELECT month FROM monthly_sales LIMIT 3"),
        ("regions ranked by revenue including east", "SELECT region FROM monthly_sales"),
    ]

    def test_retrieves_most_similar_first(self):
        builder = make_builder()
        index = make_index(self.POOL)
        embedder = Embedder()
        prompt = builder.build_prompt(
            NLQuestion(text="total revenue recorded for west", dataset_id="sales"),
            SCHEMA,
            Strategy.CFS,
            k=2,
            embedder=embedder,
            index=index,
        )
        assert prompt.k_used == 2
        # The same-family question shares 4 of 5 tokens and must come first.
        first_block = prompt.text.split("Examples:\n")[1].split("\n\n")[0]
        assert "total revenue recorded for east" in first_block

    def test_accepts_preretrieved_demonstrations(self):
        builder = make_builder()
        index = make_index(self.POOL)
        entries = index.entries("sales")[:2]
        prompt = builder.build_prompt(
            NLQuestion(text="whatever", dataset_id="sales"),
            SCHEMA,
            Strategy.CFS,
            k=2,
            demonstrations=entries,
        )
        assert prompt.demonstration_ids == (entries[0].id, entries[1].id)

    def test_k_zero_equals_zero_shot(self):
        builder = make_builder()
        index = make_index(self.POOL)
        embedder = Embedder()
        question = NLQuestion(text="any question at all", dataset_id="sales")
        zs = builder.build_prompt(question, SCHEMA, Strategy.ZS)
        cfs0 = builder.build_prompt(
            question, SCHEMA, Strategy.CFS, k=0, embedder=embedder, index=index
        )
        assert cfs0.text == zs.text
        assert cfs0.k_used == 0

    def test_empty_pool_warns_and_degrades(self):
        builder = make_builder()
        embedder = Embedder()
        empty = VectorIndex(dim=embedder.dim)
        question = NLQuestion(text="q", dataset_id="sales")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prompt = builder.build_prompt(
                question, SCHEMA, Strategy.CFS, k=4, embedder=embedder, index=empty
            )
        assert prompt.k_used == 0
        assert prompt.text == builder.build_prompt(question, SCHEMA, Strategy.ZS).text

    def test_section_order(self):
        builder = make_builder()
        index = make_index(self.POOL)
        prompt = builder.build_prompt(
            NLQuestion(text="total revenue recorded for west", dataset_id="sales"),
            SCHEMA,
            Strategy.CFS,
            k=1,
            embedder=Embedder(),
            index=index,
        )
        text = prompt.text
        i_instructions = text.index("Answer with one SQLite SELECT.")
        i_schema = text.index("CREATE TABLE monthly_sales")
        i_examples = text.index("Examples:")
        i_question = text.index("Question: total revenue recorded for west")
        assert i_instructions < i_schema < i_examples < i_question
        assert text.endswith("\n")


class TestSelectDemonstrations:
    def test_negative_k_rejected(self):
        with pytest.raises(ValueError):
            select_demonstrations(
                NLQuestion(text="q", dataset_id="d"), -1, Embedder(), VectorIndex(dim=256)
            )

    def test_shortfall_warning(self):
        embedder = Embedder()
        index = VectorIndex(dim=embedder.dim)
        index.add_entry("d", "only one", "SELECT 1", embedder.embed("only one"))
        with pytest.warns(DemonstrationShortfallWarning):
            got = select_demonstrations(
                NLQuestion(text="only one", dataset_id="d"), 3, embedder, index
            )
        assert len(got) == 1


class TestRenderDemonstration:
    def test_format(self):
        entry = ExampleEntry(
            id=1,
            dataset_id="d",
            question="how many rows",
            sql="SELECT COUNT(*) FROM t",
            embedding=embed_text("how many rows"),
        )
        assert render_demonstration(entry) == "Q: how many rows\nSQL: SELECT COUNT(*) FROM t"


class TestTemplateStore:
    def test_templates_file_round_trip(self, tmp_path):
        builder = make_builder()
        other = PromptTemplate(dataset_id="hr", system_instructions="Different rules.")
        builder.register_template(other)
        path = tmp_path / "templates.json"
        builder.dump_templates_file(path)

        fresh = PromptBuilder()
        assert fresh.load_templates_file(path) == 2
        assert fresh.template_for("sales") == TEMPLATE
        assert fresh.template_for("hr") == other

    def test_register_replaces(self):
        builder = make_builder()
        updated = PromptTemplate(dataset_id="sales", system_instructions="New.")
        builder.register_template(updated)
        assert builder.template_for("sales").system_instructions == "New."

    def test_has_template(self):
        builder = make_builder()
        assert builder.has_template("sales")
        assert not builder.has_template("nope")


class TestValidation:
    def test_blank_question_rejected(self):
        with pytest.raises(ValueError):
            NLQuestion(text="   ", dataset_id="d")

    def test_blank_instructions_rejected(self):
        with pytest.raises(ValueError):
            PromptTemplate(dataset_id="d", system_instructions="  ")

    def test_assembled_prompt_consistency(self):
        with pytest.raises(ValueError):
            AssembledPrompt(
                text="x", strategy=Strategy.ZS, k_used=2, demonstration_ids=(1,)
            )
