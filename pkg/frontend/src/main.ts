// Application bootstrap: issue picker, keyboard-driven review loop,
// live stats, and the threshold explorer.
//
// Keys: y confirm, n reject, u skip, arrows move without judging.

import { ApiClient } from "./api.js";
import { VerdictQueue } from "./queue.js";
import { ReviewSession } from "./session.js";
import {
  renderCandidate,
  renderQueueBadge,
  renderStats,
  renderThreshold,
} from "./view.js";

function annotatorId(): string {
  const stored = localStorage.getItem("embclean-annotator");
  if (stored) return stored;
  const fresh = `curator-${Math.random().toString(36).slice(2, 8)}`;
  localStorage.setItem("embclean-annotator", fresh);
  return fresh;
}

export class ReviewApp {
  session!: ReviewSession;
  readonly queue: VerdictQueue;
  private pick: HTMLSelectElement;
  private showScores: HTMLInputElement;
  private position: HTMLElement;
  private candidateBox: HTMLElement;
  private statsBox: HTMLElement;
  private slider: HTMLInputElement;
  private thresholdBox: HTMLElement;

  constructor(
    root: HTMLElement,
    private api: ApiClient = new ApiClient(),
    private annotator: string = annotatorId(),
  ) {
    root.innerHTML = `
      <header>
        <h1>embclean review</h1>
        <select id="issue-picker"></select>
        <label class="toggle"><input type="checkbox" id="show-scores"> show scores/ranks</label>
        <span id="queue-badge" class="queue-badge idle"></span>
        <span id="position"></span>
      </header>
      <main>
        <section id="candidate"></section>
        <aside>
          <h2>progress</h2>
          <div id="stats"></div>
          <h2>threshold explorer</h2>
          <input type="range" id="threshold-slider" min="0" value="0">
          <div id="threshold"></div>
        </aside>
      </main>
      <footer>keys: y confirm &middot; n reject &middot; u skip &middot; &larr;/&rarr; move</footer>
    `;
    this.pick = root.querySelector<HTMLSelectElement>("#issue-picker")!;
    this.showScores = root.querySelector<HTMLInputElement>("#show-scores")!;
    const badge = root.querySelector<HTMLElement>("#queue-badge")!;
    this.position = root.querySelector<HTMLElement>("#position")!;
    this.candidateBox = root.querySelector<HTMLElement>("#candidate")!;
    this.statsBox = root.querySelector<HTMLElement>("#stats")!;
    this.slider = root.querySelector<HTMLInputElement>("#threshold-slider")!;
    this.thresholdBox = root.querySelector<HTMLElement>("#threshold")!;

    this.queue = new VerdictQueue((rec) => this.api.postConfirmation(rec), {
      onChange: (pending, retrying) => renderQueueBadge(badge, pending, retrying),
    });

    this.pick.addEventListener("change", () => void this.openIssue(this.pick.value));
    this.showScores.addEventListener("change", () => void this.showCurrent());
    this.slider.addEventListener("input", () => void this.setThreshold(Number(this.slider.value)));
  }

  async init(): Promise<void> {
    const infos = await this.api.rankings();
    if (!infos.length) {
      this.candidateBox.textContent = "no rankings served";
      return;
    }
    for (const info of infos) {
      const opt = document.createElement("option");
      opt.value = info.issue_type;
      opt.textContent = `${info.issue_type} (${info.listed})`;
      this.pick.appendChild(opt);
    }
    await this.openIssue(infos[0].issue_type);
  }

  async openIssue(issue: string): Promise<void> {
    this.session = new ReviewSession(this.api, this.queue, issue, this.annotator);
    await this.session.load();
    this.slider.max = String(this.session.total);
    this.slider.value = "0";
    renderThreshold(this.thresholdBox, null);
    await this.showCurrent();
    await this.refreshStats();
  }

  async showCurrent(): Promise<void> {
    const entry = await this.session.current();
    if (entry) {
      renderCandidate(this.candidateBox, entry, {
        showScores: this.showScores.checked,
      });
    } else {
      this.candidateBox.textContent = "end of ranking";
    }
    this.position.textContent = `rank ${this.session.cursor} / ${this.session.total}`;
  }

  async refreshStats(): Promise<void> {
    renderStats(this.statsBox, await this.api.stats(this.session.issueType));
  }

  async setThreshold(rank: number): Promise<void> {
    if (rank < 1) {
      renderThreshold(this.thresholdBox, null);
      return;
    }
    renderThreshold(
      this.thresholdBox,
      await this.api.threshold(this.session.issueType, rank),
    );
  }

  async handleKey(key: string): Promise<void> {
    if (!this.session) return;
    if (key === "y") await this.session.judge("confirmed");
    else if (key === "n") await this.session.judge("rejected");
    else if (key === "u") await this.session.skip();
    else if (key === "ArrowRight") await this.session.next();
    else if (key === "ArrowLeft") await this.session.prev();
    else return;
    await this.showCurrent();
    await this.refreshStats();
  }
}

export async function start(root: HTMLElement, api = new ApiClient()): Promise<ReviewApp> {
  const app = new ReviewApp(root, api);
  window.addEventListener("keydown", (ev) => void app.handleKey(ev.key));
  window.addEventListener("online", () => app.queue.kick());
  await app.init();
  return app;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void start(document.getElementById("app")!);
}
