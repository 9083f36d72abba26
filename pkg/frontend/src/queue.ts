// Ordered verdict queue with retries. Exactly one record is in flight at a
// time and the head is retried until acknowledged, so server-side order
// always matches submission order, whatever the network does.

import type { Confirmation } from "./api.js";

export type PostFn = (record: Confirmation) => Promise<void>;

export interface QueueOptions {
  retryDelayMs?: number;
  onChange?: (pending: number, retrying: boolean) => void;
}

export class VerdictQueue {
  private items: Confirmation[] = [];
  private pumping = false;
  private retrying = false;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private retryDelayMs: number;
  private onChange: (pending: number, retrying: boolean) => void;
  private idle: (() => void)[] = [];

  constructor(
    private post: PostFn,
    options: QueueOptions = {},
  ) {
    this.retryDelayMs = options.retryDelayMs ?? 1500;
    this.onChange = options.onChange ?? (() => {});
  }

  push(record: Confirmation): void {
    this.items.push(record);
    this.notify();
    void this.pump();
  }

  pending(): number {
    return this.items.length;
  }

  isRetrying(): boolean {
    return this.retrying;
  }

  /** Resolves once the queue is fully drained (all records acked). */
  settled(): Promise<void> {
    if (!this.items.length && !this.pumping) return Promise.resolve();
    return new Promise((resolve) => this.idle.push(resolve));
  }

  /** Retry immediately, e.g. when connectivity returns. */
  kick(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    void this.pump();
  }

  private notify(): void {
    this.onChange(this.items.length, this.retrying);
  }

  private async pump(): Promise<void> {
    if (this.pumping) return;
    this.pumping = true;
    try {
      while (this.items.length) {
        try {
          await this.post(this.items[0]);
        } catch {
          this.retrying = true;
          this.notify();
          this.timer = setTimeout(() => {
            this.timer = null;
            void this.pump();
          }, this.retryDelayMs);
          return;
        }
        this.items.shift();
        this.retrying = false;
        this.notify();
      }
    } finally {
      this.pumping = false;
    }
    for (const resolve of this.idle.splice(0)) resolve();
  }
}
