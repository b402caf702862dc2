"""Fixture data and the synthetic benchmark corpus.

The fixture is a small sales warehouse: 36 monthly revenue rows (3 regions x
12 months) plus per-region prior-year totals and targets. Values are fixed
literals, quantized to quarters so that sums are exact in float64 regardless
of addition order.

The synthetic corpus builds on it with ten question families. Each family
pairs a question template with a SQL template over the fixture schema; the
only free variable is a region-like surface parameter, which by convention
is the final token of the question. Pool entries embed a
"-- family:<tag> param:<value>" comment in their SQL so the simulated model
can recognize which family a demonstration answers. Family tags are chosen
so that every question contains its own tag's tokens and no other family's.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .engine import build_database
from .evaluation import SuiteItem, dump_suite
from .pipeline import DatasetBundle
from .prompting import ColumnSpec, PromptTemplate, SchemaDescriptor, TableSpec

REGIONS = ("east", "west", "north")

MONTHS = tuple(f"2023-{m:02d}" for m in range(1, 13))

# region -> 12 monthly revenue amounts, January through December.
_AMOUNTS: dict[str, tuple[float, ...]] = {
    "east": (
        11200.0, 11450.5, 11980.25, 12340.0, 12010.75, 12875.5,
        13420.25, 13100.0, 12660.5, 13790.25, 14120.0, 14890.75,
    ),
    "west": (
        9850.25, 9760.0, 10150.5, 10480.25, 10240.0, 10890.75,
        11230.5, 11510.25, 11090.0, 11760.5, 12040.25, 12310.0,
    ),
    "north": (
        7420.5, 7580.25, 7310.0, 7890.75, 8120.5, 8340.25,
        8095.0, 8560.5, 8790.25, 9120.0, 8930.75, 9480.5,
    ),
}

MONTHLY_SALES: tuple[tuple[str, str, float], ...] = tuple(
    (region, month, amount)
    for region in REGIONS
    for month, amount in zip(MONTHS, _AMOUNTS[region])
)

# region -> (prior_year_total, target)
YEARLY_TARGETS: tuple[tuple[str, float, float], ...] = (
    ("east", 142000.0, 160000.0),
    ("west", 118500.0, 135000.0),
    ("north", 89250.0, 103000.0),
)

_TABLES = (
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
            ColumnSpec("prior_year_total", "REAL"),
            ColumnSpec("target", "REAL"),
        ),
    ),
)

_SYSTEM_INSTRUCTIONS = (
    "You are a careful analytics assistant. Answer the question with exactly "
    "one read-only SQLite SELECT statement against the schema below. "
    "Output SQL only."
)


def fixture_schema(dataset_id: str) -> SchemaDescriptor:
    return SchemaDescriptor(dataset_id=dataset_id, tables=_TABLES)


def fixture_template(dataset_id: str) -> PromptTemplate:
    return PromptTemplate(
        dataset_id=dataset_id,
        system_instructions=_SYSTEM_INSTRUCTIONS,
        demonstration_header="Examples:",
        question_prefix="Question:",
    )


def build_fixture_db(db_path: str | Path) -> None:
    """Materialize the fixture warehouse as a SQLite file."""
    build_database(
        db_path,
        schema_sql=[
            "CREATE TABLE monthly_sales (region TEXT, month TEXT, amount REAL)",
            "CREATE TABLE yearly_targets (region TEXT, prior_year_total REAL, target REAL)",
        ],
        rows={
            "monthly_sales": list(MONTHLY_SALES),
            "yearly_targets": list(YEARLY_TARGETS),
        },
    )


@dataclass(frozen=True)
class QueryFamily:
    """One question theme: a question template and its gold SQL template.

    question_template ends with "{param}" (the convention the simulated
    model relies on); sql_template may use the parameter any number of
    times, including zero.
    """

    tag: str
    question_template: str
    sql_template: str

    def question(self, param: str) -> str:
        return self.question_template.format(param=param)

    def sql(self, param: str) -> str:
        return self.sql_template.format(param=param)

    def pool_sql(self, param: str) -> str:
        """Gold SQL plus the family comment demonstrations carry."""
        return f"{self.sql(param)} -- family:{self.tag} param:{param}"


FAMILIES: tuple[QueryFamily, ...] = (
    QueryFamily(
        tag="total_revenue_recorded",
        question_template="total revenue recorded for {param}",
        sql_template="SELECT SUM(amount) FROM monthly_sales WHERE region = '{param}'",
    ),
    QueryFamily(
        tag="average_monthly_revenue",
        question_template="average monthly revenue for {param}",
        sql_template="SELECT AVG(amount) FROM monthly_sales WHERE region = '{param}'",
    ),
    QueryFamily(
        tag="monthly_revenue_trend",
        question_template="monthly revenue trend for {param}",
        sql_template=(
            "SELECT month, SUM(amount) FROM monthly_sales "
            "WHERE region = '{param}' GROUP BY month"
        ),
    ),
    QueryFamily(
        tag="top_revenue_months",
        question_template="top three revenue months for {param}",
        sql_template=(
            "SELECT month, amount FROM monthly_sales WHERE region = '{param}' "
            "ORDER BY amount DESC LIMIT 3"
        ),
    ),
    QueryFamily(
        tag="regions_ranked_by_revenue",
        question_template="regions ranked by revenue including {param}",
        sql_template=(
            "SELECT region, SUM(amount) FROM monthly_sales "
            "GROUP BY region ORDER BY 2 DESC"
        ),
    ),
    QueryFamily(
        tag="months_above_average",
        question_template="months above the regional average for {param}",
        sql_template=(
            "SELECT month FROM monthly_sales WHERE region = '{param}' AND amount > "
            "(SELECT AVG(amount) FROM monthly_sales WHERE region = '{param}')"
        ),
    ),
    QueryFamily(
        tag="year_over_year_change",
        question_template="year over year revenue change for {param}",
        sql_template=(
            "SELECT m.region, SUM(m.amount) - t.prior_year_total "
            "FROM monthly_sales m JOIN yearly_targets t ON m.region = t.region "
            "WHERE m.region = '{param}' GROUP BY m.region, t.prior_year_total"
        ),
    ),
    QueryFamily(
        tag="progress_against_target",
        question_template="revenue progress against target for {param}",
        sql_template=(
            "SELECT m.region, SUM(m.amount), t.target "
            "FROM monthly_sales m JOIN yearly_targets t ON m.region = t.region "
            "WHERE m.region = '{param}' GROUP BY m.region, t.target "
            "HAVING SUM(m.amount) < t.target + 100000 ORDER BY m.region"
        ),
    ),
    QueryFamily(
        tag="strongest_quarter",
        question_template="strongest quarter by revenue for {param}",
        sql_template=(
            "SELECT (CAST(substr(month, 6, 2) AS INTEGER) + 2) / 3 AS quarter, "
            "SUM(amount) FROM monthly_sales WHERE region = '{param}' AND amount >= "
            "(SELECT MIN(amount) FROM monthly_sales WHERE region = '{param}') "
            "GROUP BY quarter ORDER BY 2 DESC LIMIT 1"
        ),
    ),
    QueryFamily(
        tag="compare_revenue_between",
        question_template="compare monthly revenue between east and {param}",
        sql_template=(
            "SELECT month, SUM(amount) FROM monthly_sales WHERE region = 'east' "
            "GROUP BY month UNION SELECT month, SUM(amount) FROM monthly_sales "
            "WHERE region = '{param}' GROUP BY month"
        ),
    ),
)

# The last family fixes 'east' inside its SQL, so its pool parameters must
# avoid 'east' or parameter substitution would corrupt the fixed arm.
_DEFAULT_POOL_PARAMS = ("east", "west")
_COMPARE_POOL_PARAMS = ("west", "north")

SUITE_PARAMS = ("east", "west", "north", "south")

# The hand-checked subset shipped as the in-repo fixture dataset.
FIXTURE_FAMILIES = FAMILIES[:6]


def _pool_params(family: QueryFamily) -> tuple[str, ...]:
    if family.tag == "compare_revenue_between":
        return _COMPARE_POOL_PARAMS
    return _DEFAULT_POOL_PARAMS


def pool_examples(
    families: Sequence[QueryFamily] = FAMILIES,
) -> list[tuple[str, str, tuple[str, ...]]]:
    """Demonstration pool entries, interleaved so any k-prefix spans k families."""
    out = []
    for round_no in range(2):
        for family in families:
            param = _pool_params(family)[round_no]
            out.append(
                (family.question(param), family.pool_sql(param), (family.tag,))
            )
    return out


def suite_items(
    dataset_id: str, families: Sequence[QueryFamily] = FAMILIES
) -> list[SuiteItem]:
    """The benchmark suite: every family crossed with every suite parameter."""
    items = []
    qid = 1
    for family in families:
        for param in SUITE_PARAMS:
            items.append(
                SuiteItem(
                    question_id=qid,
                    question=family.question(param),
                    gold_sql=family.sql(param),
                    dataset_id=dataset_id,
                    family_tag=family.tag,
                )
            )
            qid += 1
    return items


# -- dataset directories -------------------------------------------------------


def write_dataset_dir(
    path: str | Path,
    dataset_id: str,
    examples: Sequence[tuple[str, str, tuple[str, ...]]],
    build_db: bool = True,
) -> Path:
    """Write a self-contained dataset directory.

    Layout: schema.json, template.json, examples.jsonl, one CSV per table,
    and (optionally) the prebuilt fixture.db.
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)

    schema = fixture_schema(dataset_id)
    schema_payload = {
        "dataset_id": dataset_id,
        "tables": [
            {
                "name": t.name,
                "columns": [{"name": c.name, "sql_type": c.sql_type} for c in t.columns],
            }
            for t in schema.tables
        ],
    }
    (directory / "schema.json").write_text(
        json.dumps(schema_payload, indent=2) + "\n", encoding="utf-8"
    )

    template = fixture_template(dataset_id)
    (directory / "template.json").write_text(
        json.dumps(
            {
                "dataset_id": dataset_id,
                "system_instructions": template.system_instructions,
                "demonstration_header": template.demonstration_header,
                "question_prefix": template.question_prefix,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    with (directory / "examples.jsonl").open("w", encoding="utf-8") as fh:
        for question, sql, tags in examples:
            fh.write(
                json.dumps(
                    {"question": question, "sql": sql, "tags": list(tags)},
                    ensure_ascii=False,
                )
                + "\n"
            )

    _write_csv(
        directory / "monthly_sales.csv", ("region", "month", "amount"), MONTHLY_SALES
    )
    _write_csv(
        directory / "yearly_targets.csv",
        ("region", "prior_year_total", "target"),
        YEARLY_TARGETS,
    )
    if build_db:
        build_fixture_db(directory / "fixture.db")
    return directory


def _write_csv(path: Path, header: tuple[str, ...], rows: Sequence[tuple]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def load_dataset_dir(path: str | Path) -> DatasetBundle:
    """Read a dataset directory back into an onboarding bundle.

    fixture.db is built from the CSVs when absent, so repositories only need
    to ship text files.
    """
    directory = Path(path)
    schema = SchemaDescriptor.from_dict(
        json.loads((directory / "schema.json").read_text(encoding="utf-8"))
    )
    template_payload = json.loads(
        (directory / "template.json").read_text(encoding="utf-8")
    )
    template = PromptTemplate(
        dataset_id=template_payload["dataset_id"],
        system_instructions=template_payload["system_instructions"],
        demonstration_header=template_payload.get("demonstration_header", "Examples:"),
        question_prefix=template_payload.get("question_prefix", "Question:"),
    )
    examples = []
    examples_path = directory / "examples.jsonl"
    if examples_path.exists():
        for line in examples_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            examples.append(
                (row["question"], row["sql"], tuple(row.get("tags", ())))
            )

    db_path = directory / "fixture.db"
    if not db_path.exists():
        _build_db_from_csvs(directory, schema, db_path)
    return DatasetBundle(
        dataset_id=schema.dataset_id,
        schema=schema,
        template=template,
        examples=tuple(examples),
        db_path=db_path,
    )


def _build_db_from_csvs(
    directory: Path, schema: SchemaDescriptor, db_path: Path
) -> None:
    schema_sql = []
    rows: dict[str, list[tuple]] = {}
    for table in schema.tables:
        cols = ", ".join(f"{c.name} {c.sql_type}" for c in table.columns)
        schema_sql.append(f"CREATE TABLE {table.name} ({cols})")
        csv_path = directory / f"{table.name}.csv"
        if not csv_path.exists():
            raise FileNotFoundError(
                f"dataset dir {directory} has neither fixture.db nor {csv_path.name}"
            )
        with csv_path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            coerced = []
            for record in reader:
                coerced.append(
                    tuple(
                        _coerce(record[c.name], c.sql_type) for c in table.columns
                    )
                )
            rows[table.name] = coerced
    build_database(db_path, schema_sql, rows)


def _coerce(raw: str, sql_type: str) -> str | int | float | None:
    if raw == "":
        return None
    kind = sql_type.upper()
    if "INT" in kind:
        return int(raw)
    if kind in ("REAL", "FLOAT", "DOUBLE", "NUMERIC"):
        return float(raw)
    return raw


def write_benchmark_corpus(path: str | Path, dataset_id: str = "sales_bench") -> Path:
    """Write the full synthetic benchmark: dataset dir plus suite.jsonl."""
    directory = Path(path)
    write_dataset_dir(directory, dataset_id, pool_examples())
    dump_suite(suite_items(dataset_id), directory / "suite.jsonl")
    return directory


def fixture_examples() -> list[tuple[str, str, tuple[str, ...]]]:
    """The 12 hand-checked examples of the in-repo sales dataset."""
    return pool_examples(FIXTURE_FAMILIES)
