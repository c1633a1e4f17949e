/**
 * DOM console: one card per staged sample, class buttons, digit shortcuts,
 * and the live learning curve. Strictly a client of the service API; every
 * rendered number is a response field.
 */

import { ApiClient, ApiError } from "./api.js";
import { curvePath, toCurveView, type CurveView } from "./curve.js";
import { RoundState } from "./state.js";

export class Console {
  private state: RoundState | null = null;
  private notice = "";

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    private readonly root: HTMLElement,
    private readonly doc: Document,
  ) {}

  async start(): Promise<void> {
    this.doc.addEventListener("keydown", (event) => this.onKey(event as KeyboardEvent));
    // a round may already be staged (e.g. after a reload): recover it
    try {
      this.state = new RoundState(await this.api.stagedBatch(this.sessionId));
    } catch (error) {
      if (!(error instanceof ApiError && error.status === 409)) throw error;
    }
    await this.refresh();
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.state) return;
    const digit = Number(event.key);
    if (
      Number.isInteger(digit) &&
      digit >= 1 &&
      digit <= 9 &&
      digit <= this.state.classNames.length
    ) {
      this.state.labelActive(digit - 1);
      void this.refresh(false);
    }
  }

  async fetchBatch(): Promise<void> {
    this.notice = "";
    try {
      this.state = new RoundState(await this.api.nextBatch(this.sessionId));
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // non-destructive: a round is already in progress; recover the
        // staged batch if there is one, keep existing selections otherwise
        this.notice = "round in progress";
        if (!this.state) {
          try {
            this.state = new RoundState(await this.api.stagedBatch(this.sessionId));
          } catch {
            /* still training; try again later */
          }
        }
      } else if (error instanceof ApiError && error.status === 410) {
        this.notice = "pool exhausted; the run is finished";
      } else {
        throw error;
      }
    }
    await this.refresh();
  }

  async submit(): Promise<void> {
    const state = this.state;
    if (!state || !state.canSubmit()) return;
    try {
      await this.api.submitLabels(this.sessionId, state.toSubmission());
      this.state = null;
      this.notice = "";
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        // stale batch: re-fetch and keep selections whose ids persist
        this.notice = "batch changed on the server; selections were preserved where possible";
        state.mergeRefetched(await this.api.stagedBatch(this.sessionId));
      } else {
        throw error;
      }
    }
    await this.refresh();
  }

  label(sampleId: number, classIndex: number): void {
    this.state?.label(sampleId, classIndex);
    void this.refresh(false);
  }

  /** Re-render; optionally pull fresh metrics from the service. */
  async refresh(withMetrics = true): Promise<void> {
    let curve: CurveView | null = null;
    if (withMetrics) {
      curve = toCurveView(await this.api.metrics(this.sessionId));
      this.lastCurve = curve;
    } else {
      curve = this.lastCurve;
    }
    this.render(curve);
  }

  private lastCurve: CurveView | null = null;

  private render(curve: CurveView | null): void {
    this.root.replaceChildren();
    const header = this.el("div", "header");
    header.append(
      this.el("span", "session", `session ${this.sessionId.slice(0, 8)}`),
      this.el("span", "phase", curve ? `phase: ${curve.phase}` : ""),
      this.el("span", "labeled", curve ? `${curve.labeled} labeled` : ""),
    );
    this.root.append(header);

    if (this.notice) {
      this.root.append(this.el("div", "notice", this.notice));
    }

    const controls = this.el("div", "controls");
    const fetchButton = this.el("button", "fetch", "Next batch") as HTMLButtonElement;
    fetchButton.addEventListener("click", () => void this.fetchBatch());
    controls.append(fetchButton);
    const submitButton = this.el("button", "submit", "Submit labels") as HTMLButtonElement;
    submitButton.disabled = !this.state || !this.state.canSubmit();
    submitButton.addEventListener("click", () => void this.submit());
    controls.append(submitButton);
    this.root.append(controls);

    if (this.state) {
      const batch = this.el("div", "batch");
      for (const view of this.state.views()) {
        const card = this.el("div", view.active ? "card active" : "card");
        card.dataset.sampleId = String(view.id);
        card.addEventListener("click", () => {
          this.state?.setActive(view.id);
          void this.refresh(false);
        });
        card.append(this.el("div", "payload", view.payload));
        const probs = this.el("ul", "probs");
        for (const entry of view.ranked) {
          probs.append(
            this.el(
              "li",
              "prob",
              `${this.state.classNames[entry.classIndex]}: ${entry.probability.toFixed(4)}`,
            ),
          );
        }
        card.append(probs);
        const buttons = this.el("div", "classes");
        this.state.classNames.forEach((name, classIndex) => {
          const button = this.el(
            "button",
            view.label === classIndex ? "class chosen" : "class",
            `${classIndex + 1} ${name}`,
          ) as HTMLButtonElement;
          button.addEventListener("click", (event) => {
            event.stopPropagation();
            this.label(view.id, classIndex);
          });
          buttons.append(button);
        });
        card.append(buttons);
        batch.append(card);
      }
      this.root.append(batch);
    }

    if (curve) {
      this.root.append(this.renderCurve(curve));
    }
  }

  private renderCurve(curve: CurveView): HTMLElement {
    const wrap = this.el("div", "curve");
    wrap.append(this.el("h3", "", "Learning curve"));
    const svg = this.doc.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", "0 0 480 200");
    svg.setAttribute("width", "480");
    svg.setAttribute("height", "200");
    const path = this.doc.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("d", curvePath(curve, 480, 200));
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", "#2266cc");
    path.setAttribute("stroke-width", "2");
    svg.append(path);
    wrap.append(svg);
    const list = this.el("ol", "points");
    for (const point of curve.points) {
      list.append(
        this.el(
          "li",
          "point",
          `round ${point.round}: ${point.labeled} labeled, accuracy ${
            point.accuracy === null ? "n/a" : point.accuracy
          }`,
        ),
      );
    }
    wrap.append(list);
    return wrap;
  }

  private el(tag: string, className = "", text = ""): HTMLElement {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text) node.textContent = text;
    return node;
  }
}
