import type { ChatTurn } from "./types.js";

const DEFAULT_KEY = "askdb.history.v1";
const MAX_TURNS = 200;

function isTurn(value: unknown): value is ChatTurn {
  if (typeof value !== "object" || value === null) return false;
  const turn = value as Record<string, unknown>;
  return (
    typeof turn.id === "string" &&
    typeof turn.datasetId === "string" &&
    typeof turn.question === "string" &&
    typeof turn.timestamp === "number" &&
    typeof turn.response === "object" &&
    turn.response !== null
  );
}

/** Append-only conversation log persisted in browser storage.
 *
 * All state is per-browser; the service never sees history. Reads parse
 * the stored value fresh, so a second store over the same Storage (a page
 * reload) sees earlier turns.
 */
export class HistoryStore {
  constructor(
    private readonly storage: Storage,
    private readonly key: string = DEFAULT_KEY,
  ) {}

  list(): ChatTurn[] {
    const raw = this.storage.getItem(this.key);
    if (raw === null) return [];
    try {
      const parsed: unknown = JSON.parse(raw);
      if (!Array.isArray(parsed)) return [];
      return parsed
        .filter(isTurn)
        .sort((a, b) => a.timestamp - b.timestamp);
    } catch {
      return [];
    }
  }

  append(turn: ChatTurn): void {
    const turns = this.list();
    turns.push(turn);
    this.storage.setItem(this.key, JSON.stringify(turns.slice(-MAX_TURNS)));
  }

  clear(): void {
    this.storage.removeItem(this.key);
  }
}
