import { describe, expect, it } from "vitest";

import { renderTable } from "../src/table.js";
import type { ResultTablePayload } from "../src/types.js";

function payload(
  columns: string[],
  rows: (number | string | null)[][],
  truncated = false,
): ResultTablePayload {
  return { columns, rows, row_count: rows.length, truncated };
}

function bodyCells(root: HTMLElement, column: number): string[] {
  return [...root.querySelectorAll("tbody tr")].map(
    (tr) => tr.children[column].textContent ?? "",
  );
}

describe("renderTable", () => {
  it("renders every row of a full fixture-sized result", () => {
    const months = Array.from({ length: 12 }, (_, m) => `2024-${String(m + 1).padStart(2, "0")}`);
    const rows: (string | number)[][] = [];
    for (const region of ["east", "west", "north"]) {
      for (const month of months) rows.push([region, month, 100 + rows.length]);
    }
    const root = renderTable(payload(["region", "month", "amount"], rows));
    expect(root.querySelectorAll("tbody tr").length).toBe(36);
    expect(root.querySelectorAll("thead th").length).toBe(3);
  });

  it("shows a truncation banner with the delivered row count", () => {
    const root = renderTable(payload(["v"], [[1], [2]], true));
    const banner = root.querySelector(".truncation-banner");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toBe("showing first 2 rows");
  });

  it("omits the banner when nothing was truncated", () => {
    const root = renderTable(payload(["v"], [[1]]));
    expect(root.querySelector(".truncation-banner")).toBeNull();
  });

  it("renders null cells with a distinct placeholder", () => {
    const root = renderTable(payload(["v"], [[null]]));
    const cell = root.querySelector("td.null-cell");
    expect(cell).not.toBeNull();
    expect(cell!.textContent).toBe("NULL");
  });

  it("sorts numerically ascending, then descending on a second click", () => {
    const root = renderTable(payload(["region", "amount"], [["east", 30], ["west", 9], ["north", 100]]));
    const amountHeader = root.querySelectorAll("th")[1] as HTMLElement;

    amountHeader.click();
    expect(bodyCells(root, 1)).toEqual(["9", "30", "100"]);
    expect(amountHeader.getAttribute("aria-sort")).toBe("ascending");

    amountHeader.click();
    expect(bodyCells(root, 1)).toEqual(["100", "30", "9"]);
    expect(amountHeader.getAttribute("aria-sort")).toBe("descending");
  });

  it("sorts strings lexicographically and keeps nulls last", () => {
    const root = renderTable(
      payload(["region", "amount"], [["west", 1], [null, 2], ["east", 3]]),
    );
    const regionHeader = root.querySelectorAll("th")[0] as HTMLElement;

    regionHeader.click();
    expect(bodyCells(root, 0)).toEqual(["east", "west", "NULL"]);

    regionHeader.click();
    expect(bodyCells(root, 0)).toEqual(["west", "east", "NULL"]);
  });

  it("sorting is client-side only and does not touch the payload", () => {
    const data = payload(["v"], [[2], [1]]);
    const root = renderTable(data);
    (root.querySelector("th") as HTMLElement).click();
    expect(data.rows).toEqual([[2], [1]]);
  });
});
