/** Wire types for the query service plus the client's own domain types.
 *
 * The wire shapes mirror the service JSON contract exactly; every error
 * body is a single object with an `error` discriminator.
 */

export type CellValue = number | string | null;

export interface ResultTablePayload {
  columns: string[];
  rows: CellValue[][];
  row_count: number;
  truncated: boolean;
}

export interface QueryResponse {
  dataset_id: string;
  sql: string;
  table: ResultTablePayload;
  demonstrations_used: number[];
  timings_ms: Record<string, number>;
  warnings: string[];
}

export interface HealthResponse {
  status: string;
  datasets: string[];
  index_entries: number;
}

export interface SanitizerViolation {
  rule: string;
  detail: string;
  offset: number;
}

export interface ApiErrorBody {
  error: string;
  detail?: unknown;
  sql?: string;
  verdict?: { allowed: boolean; violations: SanitizerViolation[] };
  warnings?: string[];
  diagnostics?: unknown[];
}

/** Every query attempt resolves to exactly one of these; nothing throws. */
export type QueryOutcome =
  | { kind: "success"; status: number; data: QueryResponse }
  | { kind: "api_error"; status: number; body: ApiErrorBody }
  | { kind: "network"; message: string };

export interface ChatTurn {
  id: string;
  datasetId: string;
  question: string;
  response: QueryOutcome;
  /** Epoch milliseconds; history is ordered by this. */
  timestamp: number;
}

export type ChartKind = "table" | "bar" | "line";

export interface ChartSpec {
  kind: ChartKind;
  /** Label column for bar/line; null when kind is "table". */
  x_column: string | null;
  y_columns: string[];
}
