// Review session: a cursor over one issue's ranking, a page cache, and
// optimistic local verdicts layered over what the server reported.

import type { ApiClient, Key, PageEntry } from "./api.js";
import type { VerdictQueue } from "./queue.js";

export const PAGE_SIZE = 50;

export function keyLabel(key: Key): string {
  return Array.isArray(key) ? `${key[0]} / ${key[1]}` : String(key);
}

export class ReviewSession {
  cursor = 1;
  total = 0;
  private pages = new Map<number, PageEntry[]>();
  private localVerdicts = new Map<string, string>();

  constructor(
    private api: ApiClient,
    private queue: VerdictQueue,
    readonly issueType: string,
    readonly annotator: string,
    private now: () => number = () => Date.now(),
  ) {}

  async load(): Promise<void> {
    const infos = await this.api.rankings();
    const info = infos.find((r) => r.issue_type === this.issueType);
    if (!info) throw new Error(`issue ${this.issueType} not served`);
    this.total = info.listed;
    this.cursor = Math.min(this.cursor, Math.max(this.total, 1));
    await this.ensurePage(this.cursor);
  }

  private pageIndex(rank: number): number {
    return Math.floor((rank - 1) / PAGE_SIZE);
  }

  private async ensurePage(rank: number): Promise<void> {
    const idx = this.pageIndex(rank);
    if (this.pages.has(idx)) return;
    const page = await this.api.page(this.issueType, idx * PAGE_SIZE, PAGE_SIZE);
    this.pages.set(idx, page.entries);
  }

  async entryAt(rank: number): Promise<PageEntry | null> {
    if (rank < 1 || rank > this.total) return null;
    await this.ensurePage(rank);
    const entries = this.pages.get(this.pageIndex(rank)) ?? [];
    const entry = entries[(rank - 1) % PAGE_SIZE];
    if (!entry) return null;
    const local = this.localVerdicts.get(keyLabel(entry.key));
    return local ? { ...entry, verdict: local } : entry;
  }

  current(): Promise<PageEntry | null> {
    return this.entryAt(this.cursor);
  }

  async moveTo(rank: number): Promise<void> {
    this.cursor = Math.min(Math.max(rank, 1), Math.max(this.total, 1));
    await this.ensurePage(this.cursor);
  }

  next(): Promise<void> {
    return this.moveTo(this.cursor + 1);
  }

  prev(): Promise<void> {
    return this.moveTo(this.cursor - 1);
  }

  /** Queue a verdict for the current candidate and advance. */
  async judge(verdict: "confirmed" | "rejected"): Promise<void> {
    const entry = await this.current();
    if (!entry) return;
    this.localVerdicts.set(keyLabel(entry.key), verdict);
    this.queue.push({
      issue_type: this.issueType,
      key: entry.key,
      verdict,
      annotator: this.annotator,
      timestamp_ms: this.now(),
    });
    await this.next();
  }

  /** Advance without recording anything. */
  skip(): Promise<void> {
    return this.next();
  }
}
