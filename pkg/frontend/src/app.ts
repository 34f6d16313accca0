import { ApiClient, ApiError, DuplicateLabelError } from "./api.js";
import { renderGraph } from "./graph.js";
import type {
  Choice,
  Dimension,
  SessionStats,
  TaskView,
} from "./types.js";

const DIMENSIONS: Dimension[] = ["faithfulness", "coverage"];

const DIMENSION_HINT: Record<Dimension, string> = {
  faithfulness: "Which sentence reflects only what the graph says?",
  coverage: "Which sentence preserves more of the graph's content?",
};

/**
 * One annotator's session flow. All state is authoritative on the service:
 * the client always renders whatever /next returns, so a page reload
 * resumes exactly where the service says.
 */
export class App {
  private choices: Partial<Record<Dimension, Choice>> = {};
  private current: TaskView | null = null;
  private busy = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
    private readonly annotatorId: string,
  ) {}

  async start(): Promise<void> {
    this.root.ownerDocument.addEventListener("keydown", (event) =>
      this.handleKey(event),
    );
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    try {
      const next = await this.api.fetchNext(this.annotatorId);
      if (next.done) {
        const stats = await this.api.fetchStats().catch(() => null);
        this.renderDone(stats);
        return;
      }
      this.current = next;
      this.choices = {};
      this.renderTask(next);
    } catch (err) {
      this.renderRetry(err, () => this.loadNext());
    }
  }

  /** Current choices survive a failed submit; only an ack advances. */
  async submit(): Promise<void> {
    const task = this.current;
    const faithfulness = this.choices.faithfulness;
    const coverage = this.choices.coverage;
    if (!task || !faithfulness || !coverage || this.busy) return;
    this.busy = true;
    this.updateSubmitState();
    try {
      await this.api.submitLabel({
        task_id: task.task_id,
        annotator_id: this.annotatorId,
        faithfulness_choice: faithfulness,
        coverage_choice: coverage,
      });
      this.busy = false;
      await this.loadNext();
    } catch (err) {
      this.busy = false;
      if (err instanceof DuplicateLabelError) {
        // Already recorded (e.g. a retried request landed twice): skip on.
        await this.loadNext();
        return;
      }
      this.updateSubmitState();
      this.renderRetry(err, () => this.submit(), "Submission failed.");
    }
  }

  choose(dimension: Dimension, choice: Choice): void {
    if (!this.current || this.busy) return;
    this.choices[dimension] = choice;
    for (const dim of DIMENSIONS) {
      const row = this.root.querySelector(`[data-dimension="${dim}"]`);
      if (!row) continue;
      for (const button of row.querySelectorAll("button[data-choice]")) {
        button.classList.toggle(
          "selected",
          this.choices[dim] === button.getAttribute("data-choice"),
        );
      }
    }
    this.updateSubmitState();
  }

  handleKey(event: KeyboardEvent): void {
    if (!this.current) return;
    if (event.key === "1" || event.key === "2") {
      const choice: Choice = event.key === "1" ? "A" : "B";
      const dimension = this.choices.faithfulness === undefined
        ? "faithfulness"
        : "coverage";
      this.choose(dimension, choice);
    } else if (event.key === "Enter") {
      void this.submit();
    }
  }

  private updateSubmitState(): void {
    const button = this.root.querySelector<HTMLButtonElement>("#submit");
    if (button) {
      button.disabled =
        this.busy || DIMENSIONS.some((dim) => this.choices[dim] === undefined);
    }
  }

  private clearBanner(): void {
    this.root.querySelector(".banner")?.remove();
  }

  private renderRetry(err: unknown, retry: () => void, title = "Connection problem."): void {
    this.clearBanner();
    const doc = this.root.ownerDocument;
    const banner = doc.createElement("div");
    banner.className = "banner";
    banner.setAttribute("role", "alert");
    const message = err instanceof ApiError ? err.message : String(err);
    const text = doc.createElement("span");
    text.textContent = `${title} ${message}`;
    const button = doc.createElement("button");
    button.id = "retry";
    button.textContent = "Retry";
    button.addEventListener("click", () => {
      this.clearBanner();
      retry();
    });
    banner.append(text, button);
    this.root.prepend(banner);
  }

  private renderTask(task: TaskView): void {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren();

    const header = doc.createElement("header");
    const heading = doc.createElement("h1");
    heading.textContent = "Which sentence describes this causal graph better?";
    const progress = doc.createElement("span");
    progress.id = "progress";
    progress.textContent = `Task ${task.progress.done + 1} of ${task.progress.total}`;
    header.append(heading, progress);

    const graphPanel = doc.createElement("section");
    graphPanel.id = "graph-panel";
    renderGraph(task.graph, graphPanel);

    const sentences = doc.createElement("section");
    sentences.id = "sentences";
    for (const [choice, sentence] of [
      ["A", task.sentence_a],
      ["B", task.sentence_b],
    ] as const) {
      const card = doc.createElement("article");
      card.className = "sentence-card";
      card.setAttribute("data-sentence", choice);
      const tag = doc.createElement("h2");
      tag.textContent = `Sentence ${choice}`;
      const body = doc.createElement("p");
      body.textContent = sentence;
      card.append(tag, body);
      sentences.append(card);
    }

    const form = doc.createElement("section");
    form.id = "choices";
    for (const dimension of DIMENSIONS) {
      const row = doc.createElement("div");
      row.className = "choice-row";
      row.setAttribute("data-dimension", dimension);
      const label = doc.createElement("span");
      label.className = "dimension-label";
      label.textContent = `${dimension}: ${DIMENSION_HINT[dimension]}`;
      row.append(label);
      for (const choice of ["A", "B"] as const) {
        const button = doc.createElement("button");
        button.setAttribute("data-choice", choice);
        button.textContent = choice;
        button.addEventListener("click", () => this.choose(dimension, choice));
        row.append(button);
      }
      form.append(row);
    }

    const submit = doc.createElement("button");
    submit.id = "submit";
    submit.textContent = "Submit";
    submit.disabled = true;
    submit.addEventListener("click", () => void this.submit());

    const hint = doc.createElement("p");
    hint.className = "hint";
    hint.textContent =
      "Keys: 1/2 pick A/B for the next undecided dimension, Enter submits.";

    this.root.append(header, graphPanel, sentences, form, submit, hint);
  }

  private renderDone(stats: SessionStats | null): void {
    const doc = this.root.ownerDocument;
    this.root.replaceChildren();
    const heading = doc.createElement("h1");
    heading.textContent = "Session complete. Thank you!";
    this.root.append(heading);
    const summary = doc.createElement("section");
    summary.id = "stats";
    if (!stats) {
      summary.textContent = "Statistics are not available yet.";
      this.root.append(summary);
      return;
    }
    const intro = doc.createElement("p");
    intro.textContent = `${stats.labels} labels over ${stats.n_tasks} tasks.`;
    summary.append(intro);
    for (const dimension of DIMENSIONS) {
      const block = doc.createElement("div");
      block.setAttribute("data-stats-dimension", dimension);
      const title = doc.createElement("h2");
      title.textContent = dimension;
      block.append(title);
      const list = doc.createElement("ul");
      const preference = stats.preference[dimension] ?? {};
      for (const [variant, pct] of Object.entries(preference)) {
        const item = doc.createElement("li");
        item.setAttribute("data-variant", variant);
        item.textContent = `${variant}: ${pct.toFixed(2)}%`;
        list.append(item);
      }
      block.append(list);
      summary.append(block);
    }
    this.root.append(summary);
  }
}
