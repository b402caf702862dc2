import { describe, expect, it } from "vitest";

import {
  availableKinds,
  classifyColumn,
  inferChartSpec,
  renderBarChart,
  renderChart,
  renderLineChart,
} from "../src/charts.js";
import type { ResultTablePayload } from "../src/types.js";

function table(columns: string[], rows: (number | string | null)[][]): ResultTablePayload {
  return { columns, rows, row_count: rows.length, truncated: false };
}

const REGION_TOTALS = table(
  ["region", "SUM(amount)"],
  [
    ["east", 153838.75],
    ["west", 131313.25],
    ["north", 99639.25],
  ],
);

const MONTHLY_TREND = table(
  ["month", "SUM(amount)"],
  [
    ["2024-01", 100.5],
    ["2024-02", 200.25],
    ["2024-03", 150.0],
  ],
);

describe("classifyColumn", () => {
  it("classifies numbers as numeric", () => {
    expect(classifyColumn([1, 2.5, -3])).toBe("numeric");
  });

  it("ignores nulls when the rest are numbers", () => {
    expect(classifyColumn([1, null, 3])).toBe("numeric");
  });

  it("classifies month-like strings as temporal", () => {
    expect(classifyColumn(["2024-01", "2024-12"])).toBe("temporal");
    expect(classifyColumn(["2024-01-15", "2024-02-01"])).toBe("temporal");
  });

  it("classifies other strings as categorical", () => {
    expect(classifyColumn(["east", "west"])).toBe("categorical");
    expect(classifyColumn(["2024-1", "not a date"])).toBe("categorical");
  });

  it("classifies all-null as empty and number/string blends as mixed", () => {
    expect(classifyColumn([null, null])).toBe("empty");
    expect(classifyColumn([1, "east"])).toBe("mixed");
  });
});

describe("inferChartSpec", () => {
  it("suggests a bar chart for one categorical and one numeric column", () => {
    const spec = inferChartSpec(REGION_TOTALS);
    expect(spec).toEqual({ kind: "bar", x_column: "region", y_columns: ["SUM(amount)"] });
  });

  it("suggests a line chart when the label column is temporal", () => {
    const spec = inferChartSpec(MONTHLY_TREND);
    expect(spec).toEqual({ kind: "line", x_column: "month", y_columns: ["SUM(amount)"] });
  });

  it("collects every numeric column as a series", () => {
    const spec = inferChartSpec(
      table(
        ["region", "total", "target"],
        [
          ["east", 10, 12],
          ["west", 8, 9],
        ],
      ),
    );
    expect(spec.kind).toBe("bar");
    expect(spec.y_columns).toEqual(["total", "target"]);
  });

  it("falls back to table for a single-cell numeric result", () => {
    const spec = inferChartSpec(table(["SUM(amount)"], [[153838.75]]));
    expect(spec).toEqual({ kind: "table", x_column: null, y_columns: [] });
  });

  it("falls back to table when no rows", () => {
    expect(inferChartSpec(table(["region", "total"], [])).kind).toBe("table");
  });

  it("falls back to table when the label column is ambiguous", () => {
    const spec = inferChartSpec(
      table(
        ["region", "month", "total"],
        [
          ["east", "2024-01", 10],
          ["west", "2024-02", 8],
        ],
      ),
    );
    expect(spec.kind).toBe("table");
  });

  it("falls back to table when nothing is numeric", () => {
    const spec = inferChartSpec(table(["region"], [["east"], ["west"]]));
    expect(spec.kind).toBe("table");
  });
});

describe("availableKinds", () => {
  it("offers bar and line overrides whenever a chart is possible", () => {
    expect(availableKinds(REGION_TOTALS)).toEqual(["table", "bar", "line"]);
  });

  it("offers only the table otherwise", () => {
    expect(availableKinds(table(["SUM(amount)"], [[1]]))).toEqual(["table"]);
  });
});

describe("renderBarChart", () => {
  it("draws one bar per row with the value attached", () => {
    const spec = inferChartSpec(REGION_TOTALS);
    const svg = renderBarChart(REGION_TOTALS, spec);
    const bars = svg.querySelectorAll("rect.bar");
    expect(bars.length).toBe(3);
    expect(bars[0].getAttribute("data-label")).toBe("east");
    expect(bars[0].getAttribute("data-value")).toBe("153838.75");
    expect(svg.classList.contains("bar-chart")).toBe(true);
    const labels = [...svg.querySelectorAll("text.x-label")].map((t) => t.textContent);
    expect(labels).toEqual(["east", "west", "north"]);
  });

  it("draws grouped bars for multiple numeric columns", () => {
    const multi = table(
      ["region", "total", "target"],
      [
        ["east", 10, 12],
        ["west", 8, 9],
      ],
    );
    const svg = renderBarChart(multi, inferChartSpec(multi));
    expect(svg.querySelectorAll("rect.bar").length).toBe(4);
  });
});

describe("renderLineChart", () => {
  it("draws a polyline and one point per row", () => {
    const spec = inferChartSpec(MONTHLY_TREND);
    const svg = renderLineChart(MONTHLY_TREND, spec);
    expect(svg.querySelectorAll("polyline.line").length).toBe(1);
    expect(svg.querySelectorAll("circle.point").length).toBe(3);
    expect(svg.classList.contains("line-chart")).toBe(true);
  });
});

describe("renderChart", () => {
  it("returns null for the table kind", () => {
    expect(renderChart(REGION_TOTALS, "table")).toBeNull();
  });

  it("returns null when the data cannot be charted", () => {
    expect(renderChart(table(["SUM(amount)"], [[1]]), "bar")).toBeNull();
  });

  it("honors a user override from bar to line", () => {
    const svg = renderChart(REGION_TOTALS, "line");
    expect(svg).not.toBeNull();
    expect(svg!.classList.contains("line-chart")).toBe(true);
  });
});
