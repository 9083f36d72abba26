// Typed client for the review service REST API. Every number shown in the
// UI comes verbatim from these responses; the client never recomputes
// statistics.

export type Key = number | [number, number];

export interface RankingInfo {
  issue_type: string;
  total_candidates: number;
  listed: number;
  truncated: boolean;
}

export interface PageEntry {
  rank: number;
  key: Key;
  score: number;
  media: (string | null)[];
  verdict: string | null;
}

export interface Page {
  issue_type: string;
  offset: number;
  limit: number;
  total: number;
  entries: PageEntry[];
}

export interface WindowPoint {
  start_rank: number;
  reviewed: number;
  confirmed: number;
  fraction: number | null;
}

export interface Stats {
  issue_type: string;
  reviewed: number;
  confirmed: number;
  max_reviewed_rank: number;
  windows: WindowPoint[];
  precision: number | null;
  fe: number | null;
  p_value: number | null;
  head_outcomes: number;
  baseline_outcomes: number;
  baseline_keys: Key[];
}

export interface ThresholdPoint {
  issue_type: string;
  rank: number;
  reviewed: number;
  confirmed: number;
  precision: number | null;
  fe: number | null;
}

export interface Confirmation {
  issue_type: string;
  key: Key;
  verdict: "confirmed" | "rejected";
  annotator: string;
  timestamp_ms: number;
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  rankings(): Promise<RankingInfo[]> {
    return this.get<RankingInfo[]>("/api/rankings");
  }

  page(issue: string, offset: number, limit: number): Promise<Page> {
    return this.get<Page>(`/api/rankings/${issue}?offset=${offset}&limit=${limit}`);
  }

  /** Stats, or null while the service reports 409 (nothing reviewed yet). */
  async stats(issue: string): Promise<Stats | null> {
    try {
      return await this.get<Stats>(`/api/stats/${issue}`);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) return null;
      throw err;
    }
  }

  threshold(issue: string, rank: number): Promise<ThresholdPoint> {
    return this.get<ThresholdPoint>(`/api/threshold/${issue}?rank=${rank}`);
  }

  async postConfirmation(record: Confirmation): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/confirmations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(record),
    });
    await expectJson<unknown>(resp);
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchImpl(`${this.baseUrl}${path}`).then((r) => expectJson<T>(r));
  }
}
