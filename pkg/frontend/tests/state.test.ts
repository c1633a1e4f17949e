import { describe, expect, it } from "vitest";

import type { BatchResponse } from "../src/api.js";
import { RoundState } from "../src/state.js";

function staged(ids: number[], classes = ["a", "b", "c"]): BatchResponse {
  return {
    session_id: "s1",
    round: 1,
    phase: "AwaitingLabels",
    class_names: classes,
    batch: ids.map((id, i) => ({
      id,
      payload: `sample ${id}`,
      score: -0.1 * i,
      probs: classes.map((_, c) => 0.5 - 0.1 * c + 0.01 * i),
    })),
  };
}

describe("RoundState", () => {
  it("mirrors the staged batch one card per sample", () => {
    const state = new RoundState(staged([10, 11, 12, 13, 14]));
    expect(state.size).toBe(5);
    expect(state.views().map((v) => v.id)).toEqual([10, 11, 12, 13, 14]);
  });

  it("ranks per-class probabilities descending", () => {
    const state = new RoundState(staged([1]));
    const ranked = state.views()[0].ranked;
    for (let i = 1; i < ranked.length; i += 1) {
      expect(ranked[i - 1].probability).toBeGreaterThanOrEqual(ranked[i].probability);
    }
  });

  it("blocks submission until every card is labeled", () => {
    const state = new RoundState(staged([1, 2, 3]));
    expect(state.canSubmit()).toBe(false);
    state.label(1, 0);
    state.label(2, 2);
    expect(state.canSubmit()).toBe(false);
    state.label(3, 1);
    expect(state.canSubmit()).toBe(true);
    expect(state.toSubmission()).toEqual({ "1": 0, "2": 2, "3": 1 });
  });

  it("refuses submission payloads for partial batches", () => {
    const state = new RoundState(staged([1, 2]));
    state.label(1, 0);
    expect(() => state.toSubmission()).toThrow(/not every card/);
  });

  it("rejects labels for ids outside the batch and classes out of range", () => {
    const state = new RoundState(staged([1, 2]));
    expect(() => state.label(99, 0)).toThrow(/not in the staged batch/);
    expect(() => state.label(1, 7)).toThrow(/out of range/);
  });

  it("keyboard labeling targets the active card and advances", () => {
    const state = new RoundState(staged([5, 6, 7]));
    state.labelActive(1); // labels 5, advances to 6
    state.labelActive(2); // labels 6, advances to 7
    const views = state.views();
    expect(views[0].label).toBe(1);
    expect(views[1].label).toBe(2);
    expect(views[2].active).toBe(true);
  });

  it("advance skips already-labeled cards", () => {
    const state = new RoundState(staged([1, 2, 3]));
    state.label(2, 0);
    state.labelActive(1); // labels 1; next unlabeled is 3, not 2
    expect(state.views()[2].active).toBe(true);
  });

  it("preserves selections for surviving ids on re-fetch", () => {
    const state = new RoundState(staged([1, 2, 3]));
    state.label(1, 0);
    state.label(2, 1);
    state.mergeRefetched(staged([2, 3, 4]));
    const views = state.views();
    expect(views.map((v) => v.id)).toEqual([2, 3, 4]);
    expect(views[0].label).toBe(1); // id 2 survived with its label
    expect(views[1].label).toBeNull();
    expect(views[2].label).toBeNull();
    expect(state.canSubmit()).toBe(false);
  });
});
