// DOM rendering. Candidate cards, the rolling-window chart, and the
// threshold readout; all values are printed exactly as the server sent
// them.

import type { PageEntry, Stats, ThresholdPoint, WindowPoint } from "./api.js";
import { keyLabel } from "./session.js";

export interface ViewOptions {
  showScores: boolean;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function mediaPane(ref: string | null, index: number | string): HTMLElement {
  const pane = el("div", "pane");
  if (ref) {
    const img = el("img");
    img.src = ref;
    img.alt = `sample ${index}`;
    img.onerror = () => {
      // degrade to a key-only card when media cannot be fetched
      pane.replaceChildren(el("div", "placeholder", `sample ${index}`));
    };
    pane.appendChild(img);
  } else {
    pane.appendChild(el("div", "placeholder", `sample ${index}`));
  }
  return pane;
}

export function renderCandidate(
  container: HTMLElement,
  entry: PageEntry,
  opts: ViewOptions,
): void {
  const card = el("div", "card");
  card.dataset.key = keyLabel(entry.key);
  const panes = el("div", Array.isArray(entry.key) ? "panes pair" : "panes single");
  if (Array.isArray(entry.key)) {
    panes.appendChild(mediaPane(entry.media[0] ?? null, entry.key[0]));
    panes.appendChild(mediaPane(entry.media[1] ?? null, entry.key[1]));
  } else {
    panes.appendChild(mediaPane(entry.media[0] ?? null, entry.key));
  }
  card.appendChild(panes);

  const meta = el("div", "meta");
  meta.appendChild(el("span", "key", keyLabel(entry.key)));
  if (opts.showScores) {
    meta.appendChild(el("span", "rank", `rank ${entry.rank}`));
    meta.appendChild(el("span", "score", `score ${entry.score}`));
  }
  const verdict = el("span", "verdict", entry.verdict ?? "unreviewed");
  verdict.classList.add(entry.verdict ?? "none");
  meta.appendChild(verdict);
  card.appendChild(meta);
  container.replaceChildren(card);
}

export function renderWindowsChart(
  container: HTMLElement,
  windows: WindowPoint[],
): void {
  const width = 520;
  const height = 140;
  const pad = 24;
  const svgns = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgns, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "windows-chart");

  const points = windows.filter((w) => w.fraction !== null);
  const maxStart = Math.max(...windows.map((w) => w.start_rank), 1);
  const x = (start: number) =>
    pad + ((start - 1) / Math.max(maxStart - 1, 1)) * (width - 2 * pad);
  const y = (frac: number) => height - pad - frac * (height - 2 * pad);

  const axis = document.createElementNS(svgns, "path");
  axis.setAttribute(
    "d",
    `M ${pad} ${pad} L ${pad} ${height - pad} L ${width - pad} ${height - pad}`,
  );
  axis.setAttribute("class", "axis");
  svg.appendChild(axis);

  if (points.length) {
    const poly = document.createElementNS(svgns, "polyline");
    poly.setAttribute(
      "points",
      points.map((w) => `${x(w.start_rank)},${y(w.fraction as number)}`).join(" "),
    );
    poly.setAttribute("class", "fraction-line");
    svg.appendChild(poly);
  }
  for (const w of points) {
    const dot = document.createElementNS(svgns, "circle");
    dot.setAttribute("cx", String(x(w.start_rank)));
    dot.setAttribute("cy", String(y(w.fraction as number)));
    dot.setAttribute("r", "2.5");
    dot.setAttribute("class", "window-point");
    dot.dataset.start = String(w.start_rank);
    dot.dataset.fraction = String(w.fraction);
    svg.appendChild(dot);
  }
  container.replaceChildren(svg);
}

export function renderStats(container: HTMLElement, stats: Stats | null): void {
  if (!stats) {
    container.replaceChildren(
      el("div", "stats-empty", "review more candidates"),
    );
    return;
  }
  const box = el("div", "stats");
  const line = (cls: string, label: string, value: string) => {
    const row = el("div", `stat ${cls}`);
    row.appendChild(el("span", "label", label));
    row.appendChild(el("span", "value", value));
    box.appendChild(row);
  };
  line("reviewed", "reviewed", String(stats.reviewed));
  line("confirmed", "confirmed", String(stats.confirmed));
  line(
    "precision",
    `precision@${stats.max_reviewed_rank}`,
    stats.precision === null ? "n/a" : String(stats.precision),
  );
  line("fe", `effort@${stats.max_reviewed_rank}`, stats.fe === null ? "n/a" : String(stats.fe));
  line("p-value", "head vs random p", stats.p_value === null ? "n/a" : String(stats.p_value));
  container.replaceChildren(box);
  const chart = el("div", "chart-holder");
  container.appendChild(chart);
  renderWindowsChart(chart, stats.windows);
}

export function renderThreshold(
  container: HTMLElement,
  point: ThresholdPoint | null,
): void {
  if (!point) {
    container.replaceChildren(el("div", "threshold-empty", "move the slider to explore"));
    return;
  }
  const box = el("div", "threshold");
  box.appendChild(el("span", "rank", `rank ${point.rank}`));
  box.appendChild(
    el(
      "span",
      "precision",
      `precision ${point.precision === null ? "n/a" : point.precision}`,
    ),
  );
  box.appendChild(el("span", "fe", `effort ${point.fe === null ? "n/a" : point.fe}`));
  box.appendChild(
    el("span", "counts", `${point.confirmed}/${point.reviewed} confirmed`),
  );
  container.replaceChildren(box);
}

export function renderQueueBadge(
  container: HTMLElement,
  pending: number,
  retrying: boolean,
): void {
  if (!pending) {
    container.replaceChildren();
    container.className = "queue-badge idle";
    return;
  }
  container.className = retrying ? "queue-badge retrying" : "queue-badge sending";
  container.textContent = retrying
    ? `${pending} verdict(s) queued, retrying`
    : `${pending} verdict(s) sending`;
}
