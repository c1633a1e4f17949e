/**
 * Pure view-model state for one annotation round.
 *
 * The service's staged batch is mirrored one card per sample; a submission
 * becomes possible only when every card carries a label (the service rejects
 * partial batches anyway, this just keeps the button honest).
 */

import type { BatchCard, BatchResponse } from "./api.js";

export interface CardView {
  id: number;
  payload: string;
  /** class index and probability, sorted by probability descending */
  ranked: Array<{ classIndex: number; probability: number }>;
  label: number | null;
  active: boolean;
}

export class RoundState {
  readonly sessionId: string;
  readonly round: number;
  readonly classNames: string[];
  private cards: BatchCard[];
  private labels: Map<number, number> = new Map();
  private activeIndex = 0;

  constructor(batch: BatchResponse) {
    this.sessionId = batch.session_id;
    this.round = batch.round;
    this.classNames = batch.class_names;
    this.cards = batch.batch;
  }

  get size(): number {
    return this.cards.length;
  }

  /** One view model per staged sample, in service order. */
  views(): CardView[] {
    return this.cards.map((card, index) => ({
      id: card.id,
      payload: card.payload ?? `sample ${card.id}`,
      ranked: card.probs
        .map((probability, classIndex) => ({ classIndex, probability }))
        .sort((a, b) => b.probability - a.probability),
      label: this.labels.get(card.id) ?? null,
      active: index === this.activeIndex,
    }));
  }

  label(sampleId: number, classIndex: number): void {
    if (!this.cards.some((c) => c.id === sampleId)) {
      throw new Error(`sample ${sampleId} is not in the staged batch`);
    }
    if (classIndex < 0 || classIndex >= this.classNames.length) {
      throw new Error(`class ${classIndex} out of range`);
    }
    this.labels.set(sampleId, classIndex);
    const index = this.cards.findIndex((c) => c.id === sampleId);
    if (index === this.activeIndex) {
      this.advance();
    }
  }

  /** Keyboard path: digit keys 1..9 label the active card. */
  labelActive(classIndex: number): void {
    const card = this.cards[this.activeIndex];
    if (card) {
      this.label(card.id, classIndex);
    }
  }

  setActive(sampleId: number): void {
    const index = this.cards.findIndex((c) => c.id === sampleId);
    if (index >= 0) {
      this.activeIndex = index;
    }
  }

  private advance(): void {
    for (let step = 1; step <= this.cards.length; step += 1) {
      const index = (this.activeIndex + step) % this.cards.length;
      if (!this.labels.has(this.cards[index].id)) {
        this.activeIndex = index;
        return;
      }
    }
  }

  /** Submission stays blocked until the whole batch is labeled. */
  canSubmit(): boolean {
    return (
      this.cards.length > 0 &&
      this.cards.every((card) => this.labels.has(card.id))
    );
  }

  toSubmission(): Record<string, number> {
    if (!this.canSubmit()) {
      throw new Error("cannot submit: not every card is labeled");
    }
    const out: Record<string, number> = {};
    for (const card of this.cards) {
      out[String(card.id)] = this.labels.get(card.id)!;
    }
    return out;
  }

  /**
   * Replace the staged cards after a stale-batch re-fetch, keeping the
   * selections whose sample ids survived.
   */
  mergeRefetched(batch: BatchResponse): void {
    const surviving = new Map<number, number>();
    for (const card of batch.batch) {
      const kept = this.labels.get(card.id);
      if (kept !== undefined) {
        surviving.set(card.id, kept);
      }
    }
    this.cards = batch.batch;
    this.labels = surviving;
    this.activeIndex = 0;
    if (this.cards.length > 0 && this.labels.has(this.cards[0].id)) {
      this.advance();
    }
  }
}
