import type { CellValue, ResultTablePayload } from "./types.js";

type SortState = { column: number; direction: 1 | -1 } | null;

function compareCells(a: CellValue, b: CellValue): number {
  // Nulls sort after everything regardless of direction's sign flip,
  // so the comparator handles them before delegating.
  if (a === null && b === null) return 0;
  if (a === null) return 1;
  if (b === null) return -1;
  if (typeof a === "number" && typeof b === "number") return a - b;
  return String(a).localeCompare(String(b));
}

function renderCell(value: CellValue): HTMLTableCellElement {
  const td = document.createElement("td");
  if (value === null) {
    td.className = "null-cell";
    td.textContent = "NULL";
  } else {
    td.textContent = String(value);
    if (typeof value === "number") td.className = "numeric-cell";
  }
  return td;
}

/** Result grid with client-side column sorting and a truncation banner. */
export function renderTable(payload: ResultTablePayload): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "result-table";

  if (payload.truncated) {
    const banner = document.createElement("div");
    banner.className = "truncation-banner";
    banner.textContent = `showing first ${payload.rows.length} rows`;
    wrap.appendChild(banner);
  }

  const table = document.createElement("table");
  const thead = document.createElement("thead");
  const headRow = document.createElement("tr");
  const tbody = document.createElement("tbody");
  let sort: SortState = null;

  const renderBody = () => {
    const rows = [...payload.rows];
    if (sort !== null) {
      const { column, direction } = sort;
      rows.sort((ra, rb) => {
        const a = ra[column] ?? null;
        const b = rb[column] ?? null;
        if (a === null || b === null) return compareCells(a, b);
        return compareCells(a, b) * direction;
      });
    }
    tbody.replaceChildren(
      ...rows.map((row) => {
        const tr = document.createElement("tr");
        row.forEach((cell) => tr.appendChild(renderCell(cell)));
        return tr;
      }),
    );
  };

  payload.columns.forEach((name, index) => {
    const th = document.createElement("th");
    th.textContent = name;
    th.tabIndex = 0;
    th.addEventListener("click", () => {
      sort =
        sort !== null && sort.column === index && sort.direction === 1
          ? { column: index, direction: -1 }
          : { column: index, direction: 1 };
      headRow.querySelectorAll("th").forEach((h) => h.removeAttribute("aria-sort"));
      th.setAttribute("aria-sort", sort.direction === 1 ? "ascending" : "descending");
      renderBody();
    });
    headRow.appendChild(th);
  });

  renderBody();
  thead.appendChild(headRow);
  table.appendChild(thead);
  table.appendChild(tbody);
  wrap.appendChild(table);
  return wrap;
}
