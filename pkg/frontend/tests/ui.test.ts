// @vitest-environment happy-dom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { Console } from "../src/ui.js";

type Handler = (url: string, init?: RequestInit) => { status: number; body: unknown };

function fakeFetch(handler: Handler): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) => {
    const { status, body } = handler(String(input), init);
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }) as typeof fetch;
}

const K = 4;
const CLASSES = ["alpha", "beta", "gamma"];

function serviceDouble() {
  // a minimal in-memory echo of the service phase machine
  const state = {
    phase: "Idle",
    rounds: [] as object[],
    labeled: 12,
    staged: [] as Array<{ id: number; payload: string; score: number; probs: number[] }>,
  };
  const batchBody = () => ({
    session_id: "sess",
    round: state.rounds.length + 1,
    phase: state.phase,
    class_names: CLASSES,
    batch: state.staged,
  });
  const handler: Handler = (url, init) => {
    const method = init?.method ?? "GET";
    if (url.endsWith("/batch") && method === "POST") {
      if (state.phase !== "Idle") {
        return { status: 409, body: { error: "WrongPhase", detail: "busy" } };
      }
      state.phase = "AwaitingLabels";
      state.staged = Array.from({ length: K }, (_, i) => ({
        id: 100 + state.rounds.length * K + i,
        payload: `sample ${i}`,
        score: -0.01 * i,
        probs: [0.5, 0.4, 0.3],
      }));
      return { status: 200, body: batchBody() };
    }
    if (url.endsWith("/batch")) {
      if (state.phase !== "AwaitingLabels") {
        return { status: 409, body: { error: "WrongPhase", detail: "no batch" } };
      }
      return { status: 200, body: batchBody() };
    }
    if (url.endsWith("/labels")) {
      const submitted = JSON.parse(String(init?.body)) as { labels: Record<string, number> };
      const ids = Object.keys(submitted.labels).map(Number).sort((a, b) => a - b);
      const staged = state.staged.map((c) => c.id).sort((a, b) => a - b);
      if (JSON.stringify(ids) !== JSON.stringify(staged)) {
        return { status: 422, body: { error: "PartialBatch", detail: "cover the batch" } };
      }
      const record = {
        round: state.rounds.length + 1,
        labeled: state.labeled,
        accuracy: 0.5 + 0.05 * state.rounds.length,
        mean_loss: 1.0,
        selected_ids: staged,
        wall_time: 0.1,
      };
      state.rounds.push(record);
      state.labeled += K;
      state.phase = "Idle";
      state.staged = [];
      return {
        status: 200,
        body: { session_id: "sess", phase: "Idle", record, labeled: state.labeled, unlabeled: 0 },
      };
    }
    if (url.endsWith("/metrics")) {
      return {
        status: 200,
        body: {
          session_id: "sess",
          phase: state.phase,
          labeled: state.labeled,
          unlabeled: 0,
          class_names: CLASSES,
          rounds: state.rounds,
        },
      };
    }
    throw new Error(`unexpected request ${method} ${url}`);
  };
  return { handler, state };
}

describe("Console", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById("app")!;
  });

  async function mount(handler: Handler) {
    const api = new ApiClient("http://svc", fakeFetch(handler));
    const console_ = new Console(api, "sess", root, document);
    await console_.start();
    return console_;
  }

  it("renders exactly K cards after fetching a batch", async () => {
    const { handler } = serviceDouble();
    const console_ = await mount(handler);
    await console_.fetchBatch();
    expect(root.querySelectorAll(".card").length).toBe(K);
  });

  it("keeps submit disabled until every card is labeled", async () => {
    const { handler } = serviceDouble();
    const console_ = await mount(handler);
    await console_.fetchBatch();
    const submit = () => root.querySelector(".submit") as HTMLButtonElement;
    expect(submit().disabled).toBe(true);
    const cards = [...root.querySelectorAll(".card")];
    for (const [index, card] of cards.entries()) {
      (card.querySelector(".class") as HTMLButtonElement).click();
      const expectDisabled = index < cards.length - 1;
      expect(submit().disabled).toBe(expectDisabled);
    }
  });

  it("labels the active card from digit keys", async () => {
    const { handler } = serviceDouble();
    const console_ = await mount(handler);
    await console_.fetchBatch();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "2" }));
    await console_.refresh(false);
    const chosen = root.querySelector(".card .chosen") as HTMLButtonElement;
    expect(chosen.textContent).toContain("beta");
  });

  it("shows a non-destructive notice on 409", async () => {
    const { handler, state } = serviceDouble();
    const console_ = await mount(handler);
    await console_.fetchBatch();
    state.phase = "Training"; // another client raced us into training
    await console_.fetchBatch();
    expect(root.querySelector(".notice")?.textContent).toContain("round in progress");
    expect(root.querySelectorAll(".card").length).toBe(K); // batch kept
  });

  it("completes a round and the curve equals the metrics payload", async () => {
    const { handler, state } = serviceDouble();
    const console_ = await mount(handler);
    await console_.fetchBatch();
    for (const card of root.querySelectorAll(".card")) {
      (card.querySelector(".class") as HTMLButtonElement).click();
    }
    await console_.submit();
    const points = [...root.querySelectorAll(".point")].map((li) => li.textContent);
    expect(points.length).toBe(1);
    const record = state.rounds[0] as { labeled: number; accuracy: number };
    expect(points[0]).toContain(`${record.labeled} labeled`);
    expect(points[0]).toContain(`accuracy ${record.accuracy}`);
  });
});
