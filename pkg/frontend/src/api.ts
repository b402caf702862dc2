import type {
  ApiErrorBody,
  HealthResponse,
  QueryOutcome,
  QueryResponse,
} from "./types.js";

export interface QueryOptions {
  strategy?: string;
  k?: number;
  n?: number;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the service.
 *
 * This client never assembles SQL; it forwards question text and hands
 * back whatever SQL the service chose to report.
 */
export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async query(
    datasetId: string,
    question: string,
    options: QueryOptions = {},
  ): Promise<QueryOutcome> {
    const payload: Record<string, unknown> = {
      dataset_id: datasetId,
      question,
    };
    if (options.strategy !== undefined) payload.strategy = options.strategy;
    if (options.k !== undefined) payload.k = options.k;
    if (options.n !== undefined) payload.n = options.n;

    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}/v1/query`, {
        method: "POST",
        headers: {
          "content-type": "application/json",
          authorization: `Bearer ${this.token}`,
        },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      return { kind: "network", message: err instanceof Error ? err.message : String(err) };
    }

    if (response.ok) {
      const data = (await response.json()) as QueryResponse;
      return { kind: "success", status: response.status, data };
    }
    let body: ApiErrorBody;
    try {
      body = (await response.json()) as ApiErrorBody;
    } catch {
      body = { error: `http_${response.status}` };
    }
    return { kind: "api_error", status: response.status, body };
  }

  /** Null means the service could not be reached or answered abnormally. */
  async health(): Promise<HealthResponse | null> {
    try {
      const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
      if (!response.ok) return null;
      return (await response.json()) as HealthResponse;
    } catch {
      return null;
    }
  }
}
