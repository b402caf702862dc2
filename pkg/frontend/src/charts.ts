import type { CellValue, ChartKind, ChartSpec, ResultTablePayload } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const MONTH_LIKE = /^\d{4}-\d{2}(-\d{2})?$/;

export type ColumnClass = "numeric" | "temporal" | "categorical" | "empty" | "mixed";

export function classifyColumn(values: CellValue[]): ColumnClass {
  const present = values.filter((v): v is number | string => v !== null);
  if (present.length === 0) return "empty";
  if (present.every((v) => typeof v === "number" && Number.isFinite(v))) {
    return "numeric";
  }
  if (present.every((v) => typeof v === "string")) {
    return present.every((v) => MONTH_LIKE.test(v as string)) ? "temporal" : "categorical";
  }
  return "mixed";
}

/** Pick a chart for a result, or fall back to the plain table.
 *
 * Bar/line need at least one numeric column and exactly one label column
 * (categorical or temporal); a temporal label suggests a line. Anything
 * else — no rows, no labels, several label candidates — stays a table.
 */
export function inferChartSpec(table: ResultTablePayload): ChartSpec {
  const fallback: ChartSpec = { kind: "table", x_column: null, y_columns: [] };
  if (table.rows.length === 0) return fallback;

  const classes = table.columns.map((_, i) =>
    classifyColumn(table.rows.map((row) => row[i] ?? null)),
  );
  const numeric = table.columns.filter((_, i) => classes[i] === "numeric");
  const labels = table.columns.filter(
    (_, i) => classes[i] === "temporal" || classes[i] === "categorical",
  );
  if (numeric.length < 1 || labels.length !== 1) return fallback;

  const labelIndex = table.columns.indexOf(labels[0]);
  const kind: ChartKind = classes[labelIndex] === "temporal" ? "line" : "bar";
  return { kind, x_column: labels[0], y_columns: numeric };
}

/** Chart kinds that make sense for this result; "table" is always first. */
export function availableKinds(table: ResultTablePayload): ChartKind[] {
  const spec = inferChartSpec(table);
  return spec.kind === "table" ? ["table"] : ["table", "bar", "line"];
}

interface Series {
  column: string;
  values: number[];
}

function extractSeries(table: ResultTablePayload, spec: ChartSpec): {
  labels: string[];
  series: Series[];
} {
  const xIndex = spec.x_column === null ? -1 : table.columns.indexOf(spec.x_column);
  const labels = table.rows.map((row, r) =>
    xIndex >= 0 ? String(row[xIndex]) : String(r + 1),
  );
  const series = spec.y_columns.map((column) => {
    const c = table.columns.indexOf(column);
    return {
      column,
      values: table.rows.map((row) => (typeof row[c] === "number" ? (row[c] as number) : 0)),
    };
  });
  return { labels, series };
}

const WIDTH = 640;
const HEIGHT = 320;
const MARGIN = { top: 16, right: 16, bottom: 48, left: 64 };

function svgRoot(kindClass: string): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", `chart ${kindClass}`);
  svg.setAttribute("role", "img");
  return svg;
}

function valueScale(series: Series[]): { lo: number; hi: number } {
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(0, ...all);
  const hi = Math.max(0, ...all);
  return hi === lo ? { lo, hi: lo + 1 } : { lo, hi };
}

function text(x: number, y: number, content: string, cls: string): SVGTextElement {
  const node = document.createElementNS(SVG_NS, "text");
  node.setAttribute("x", String(x));
  node.setAttribute("y", String(y));
  node.setAttribute("class", cls);
  node.textContent = content;
  return node;
}

export function renderBarChart(table: ResultTablePayload, spec: ChartSpec): SVGSVGElement {
  const { labels, series } = extractSeries(table, spec);
  const svg = svgRoot("bar-chart");
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const { lo, hi } = valueScale(series);
  const yFor = (v: number) => MARGIN.top + plotH - ((v - lo) / (hi - lo)) * plotH;

  const groupW = plotW / Math.max(1, labels.length);
  const barW = (groupW * 0.8) / Math.max(1, series.length);

  labels.forEach((label, r) => {
    series.forEach((s, si) => {
      const value = s.values[r];
      const x = MARGIN.left + r * groupW + groupW * 0.1 + si * barW;
      const y0 = yFor(Math.max(0, value));
      const y1 = yFor(Math.min(0, value));
      const rect = document.createElementNS(SVG_NS, "rect");
      rect.setAttribute("class", "bar");
      rect.setAttribute("x", x.toFixed(2));
      rect.setAttribute("y", y0.toFixed(2));
      rect.setAttribute("width", Math.max(1, barW - 2).toFixed(2));
      rect.setAttribute("height", Math.max(1, y1 - y0).toFixed(2));
      rect.setAttribute("data-label", label);
      rect.setAttribute("data-series", s.column);
      rect.setAttribute("data-value", String(value));
      const title = document.createElementNS(SVG_NS, "title");
      title.textContent = `${label} · ${s.column}: ${value}`;
      rect.appendChild(title);
      svg.appendChild(rect);
    });
    svg.appendChild(
      text(MARGIN.left + r * groupW + groupW / 2, HEIGHT - MARGIN.bottom + 20, label, "x-label"),
    );
  });
  svg.appendChild(text(MARGIN.left - 8, MARGIN.top + 10, String(hi), "y-label"));
  svg.appendChild(text(MARGIN.left - 8, MARGIN.top + plotH, String(lo), "y-label"));
  return svg;
}

export function renderLineChart(table: ResultTablePayload, spec: ChartSpec): SVGSVGElement {
  const { labels, series } = extractSeries(table, spec);
  const svg = svgRoot("line-chart");
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const { lo, hi } = valueScale(series);
  const yFor = (v: number) => MARGIN.top + plotH - ((v - lo) / (hi - lo)) * plotH;
  const xFor = (r: number) =>
    MARGIN.left + (labels.length === 1 ? plotW / 2 : (r / (labels.length - 1)) * plotW);

  series.forEach((s) => {
    const line = document.createElementNS(SVG_NS, "polyline");
    line.setAttribute("class", "line");
    line.setAttribute("data-series", s.column);
    line.setAttribute("fill", "none");
    line.setAttribute(
      "points",
      s.values.map((v, r) => `${xFor(r).toFixed(2)},${yFor(v).toFixed(2)}`).join(" "),
    );
    svg.appendChild(line);
    s.values.forEach((v, r) => {
      const dot = document.createElementNS(SVG_NS, "circle");
      dot.setAttribute("class", "point");
      dot.setAttribute("cx", xFor(r).toFixed(2));
      dot.setAttribute("cy", yFor(v).toFixed(2));
      dot.setAttribute("r", "3");
      dot.setAttribute("data-label", labels[r]);
      dot.setAttribute("data-series", s.column);
      dot.setAttribute("data-value", String(v));
      svg.appendChild(dot);
    });
  });
  labels.forEach((label, r) => {
    if (labels.length <= 12 || r % Math.ceil(labels.length / 12) === 0) {
      svg.appendChild(text(xFor(r), HEIGHT - MARGIN.bottom + 20, label, "x-label"));
    }
  });
  svg.appendChild(text(MARGIN.left - 8, MARGIN.top + 10, String(hi), "y-label"));
  svg.appendChild(text(MARGIN.left - 8, MARGIN.top + plotH, String(lo), "y-label"));
  return svg;
}

/** Render `kind` for this table, or null when `kind` is "table". */
export function renderChart(
  table: ResultTablePayload,
  kind: ChartKind,
): SVGSVGElement | null {
  if (kind === "table") return null;
  const inferred = inferChartSpec(table);
  if (inferred.kind === "table") return null;
  const spec: ChartSpec = { ...inferred, kind };
  return kind === "line" ? renderLineChart(table, spec) : renderBarChart(table, spec);
}
