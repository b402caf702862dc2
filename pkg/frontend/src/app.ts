import { ApiClient } from "./api.js";
import { availableKinds, inferChartSpec, renderChart } from "./charts.js";
import { HistoryStore } from "./history.js";
import { renderTable } from "./table.js";
import type { ChartKind, ChatTurn, QueryOutcome, SanitizerViolation } from "./types.js";

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface AppConfig {
  baseUrl: string;
  token: string;
  storage?: Storage;
  fetchImpl?: FetchLike;
  now?: () => number;
  makeId?: () => string;
}

export interface AppHandle {
  /** Resolves once the dataset list has been loaded (or failed to). */
  ready: Promise<void>;
  sendQuestion(question: string): Promise<void>;
  readonly pending: boolean;
  readonly client: ApiClient;
}

let idCounter = 0;

function defaultId(): string {
  if (typeof crypto !== "undefined" && "randomUUID" in crypto) {
    return crypto.randomUUID();
  }
  idCounter += 1;
  return `turn-${Date.now()}-${idCounter}`;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  textContent?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (textContent !== undefined) node.textContent = textContent;
  return node;
}

function renderSql(sql: string): HTMLElement {
  // The client never builds SQL; this string always came off the wire.
  const pre = el("pre", "sql");
  const code = document.createElement("code");
  code.textContent = sql;
  pre.appendChild(code);
  return pre;
}

function renderViolations(violations: SanitizerViolation[]): HTMLUListElement {
  const list = el("ul", "violations");
  violations.forEach((v) => {
    list.appendChild(el("li", "violation", `${v.rule}: ${v.detail} (offset ${v.offset})`));
  });
  return list;
}

function renderWarnings(warnings: string[]): HTMLElement | null {
  if (warnings.length === 0) return null;
  const box = el("div", "warnings");
  warnings.forEach((w) => box.appendChild(el("div", "warning", `warning: ${w}`)));
  return box;
}

export function createApp(root: HTMLElement, config: AppConfig): AppHandle {
  const storage = config.storage ?? window.localStorage;
  const now = config.now ?? (() => Date.now());
  const makeId = config.makeId ?? defaultId;
  const client = new ApiClient(config.baseUrl, config.token, config.fetchImpl);
  const store = new HistoryStore(storage);

  root.replaceChildren();
  const header = el("header", "app-header");
  header.appendChild(el("h1", undefined, "askdb"));
  const datasetLabel = el("label", "dataset-label", "dataset ");
  const datasetSelect = document.createElement("select");
  datasetSelect.id = "dataset-select";
  datasetLabel.appendChild(datasetSelect);
  header.appendChild(datasetLabel);
  const healthNote = el("span", "health-note");
  healthNote.id = "health-note";
  header.appendChild(healthNote);
  root.appendChild(header);

  const chatLog = el("ol", "chat-log");
  chatLog.id = "chat-log";
  root.appendChild(chatLog);

  const form = el("form", "ask-form");
  form.id = "ask-form";
  const input = document.createElement("input");
  input.id = "question-input";
  input.type = "text";
  input.autocomplete = "off";
  input.placeholder = "Ask a question about the data";
  const sendButton = document.createElement("button");
  sendButton.id = "send-button";
  sendButton.type = "submit";
  sendButton.textContent = "Ask";
  form.appendChild(input);
  form.appendChild(sendButton);
  root.appendChild(form);

  let pending = false;

  function renderResultSection(turn: ChatTurn): HTMLElement | null {
    if (turn.response.kind !== "success") return null;
    const { table } = turn.response.data;
    const section = el("section", "result");
    const kinds = availableKinds(table);
    const suggested = inferChartSpec(table).kind;
    let active: ChartKind = suggested;

    const chartSlot = el("div", "chart-slot");
    const drawChart = () => {
      const chart = renderChart(table, active);
      chartSlot.replaceChildren(...(chart ? [chart] : []));
    };

    if (kinds.length > 1) {
      const toolbar = el("div", "chart-toolbar");
      const buttons = kinds.map((kind) => {
        const button = el("button", "chart-kind-button", kind);
        button.type = "button";
        button.dataset.kind = kind;
        if (kind === suggested) button.dataset.suggested = "true";
        button.setAttribute("aria-pressed", String(kind === active));
        button.addEventListener("click", () => {
          active = kind;
          buttons.forEach((b) =>
            b.setAttribute("aria-pressed", String(b.dataset.kind === active)),
          );
          drawChart();
        });
        return button;
      });
      buttons.forEach((b) => toolbar.appendChild(b));
      section.appendChild(toolbar);
    }

    section.appendChild(chartSlot);
    drawChart();
    section.appendChild(renderTable(table));
    return section;
  }

  function renderOutcome(turn: ChatTurn): HTMLElement {
    const body = el("div", "turn-body");
    const outcome: QueryOutcome = turn.response;

    if (outcome.kind === "success") {
      body.appendChild(renderSql(outcome.data.sql));
      const warnings = renderWarnings(outcome.data.warnings ?? []);
      if (warnings) body.appendChild(warnings);
      const ids = outcome.data.demonstrations_used ?? [];
      const demos = el("details", "demos");
      demos.appendChild(el("summary", undefined, `demonstrations used (${ids.length})`));
      demos.appendChild(
        el("div", "demo-ids", ids.length ? ids.map((id) => `#${id}`).join(" ") : "none"),
      );
      body.appendChild(demos);
      const result = renderResultSection(turn);
      if (result) body.appendChild(result);
      return body;
    }

    if (outcome.kind === "network") {
      const panel = el("div", "network-panel");
      panel.appendChild(el("p", undefined, `network error: ${outcome.message}`));
      const retry = el("button", "retry-button", "retry");
      retry.type = "button";
      retry.addEventListener("click", () => {
        void sendQuestion(turn.question);
      });
      panel.appendChild(retry);
      body.appendChild(panel);
      return body;
    }

    const { status, body: error } = outcome;
    if (error.error === "sanitization_rejected") {
      const panel = el("div", "violation-panel");
      panel.appendChild(el("h3", undefined, "rejected by sanitizer"));
      if (typeof error.sql === "string") panel.appendChild(renderSql(error.sql));
      panel.appendChild(renderViolations(error.verdict?.violations ?? []));
      const warnings = renderWarnings(error.warnings ?? []);
      if (warnings) panel.appendChild(warnings);
      body.appendChild(panel);
      return body;
    }
    if (status === 403) {
      body.appendChild(
        el("div", "access-panel", "access denied: this token may not query that dataset"),
      );
      return body;
    }
    const panel = el("div", "error-panel", `${error.error} (http ${status})`);
    if (typeof error.detail === "string") {
      panel.appendChild(el("p", "error-detail", error.detail));
    }
    body.appendChild(panel);
    return body;
  }

  function renderTurn(turn: ChatTurn): HTMLLIElement {
    const item = el("li", "chat-turn");
    item.dataset.turnId = turn.id;
    const head = el("div", "turn-head");
    head.appendChild(el("span", "turn-question", turn.question));
    const reAsk = el("button", "re-ask", "ask again");
    reAsk.type = "button";
    reAsk.addEventListener("click", () => {
      void sendQuestion(turn.question);
    });
    head.appendChild(reAsk);
    const stamp = el("time", "turn-time", new Date(turn.timestamp).toISOString());
    head.appendChild(stamp);
    item.appendChild(head);
    item.appendChild(renderOutcome(turn));
    return item;
  }

  async function sendQuestion(question: string): Promise<void> {
    if (pending) return;
    const trimmed = question.trim();
    if (!trimmed) return;
    const datasetId = datasetSelect.value;
    if (!datasetId) {
      healthNote.textContent = "no dataset selected";
      return;
    }
    pending = true;
    sendButton.disabled = true;
    try {
      const response = await client.query(datasetId, trimmed);
      const turn: ChatTurn = {
        id: makeId(),
        datasetId,
        question: trimmed,
        response,
        timestamp: now(),
      };
      store.append(turn);
      chatLog.appendChild(renderTurn(turn));
      if (response.kind === "success") input.value = "";
    } finally {
      pending = false;
      sendButton.disabled = false;
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void sendQuestion(input.value);
  });

  store.list().forEach((turn) => chatLog.appendChild(renderTurn(turn)));

  const ready = client.health().then((health) => {
    if (health === null) {
      healthNote.textContent = "service unreachable";
      return;
    }
    datasetSelect.replaceChildren(
      ...health.datasets.map((id) => {
        const option = document.createElement("option");
        option.value = id;
        option.textContent = id;
        return option;
      }),
    );
    healthNote.textContent = `${health.index_entries} indexed examples`;
  });

  return {
    ready,
    sendQuestion,
    get pending() {
      return pending;
    },
    client,
  };
}
