import type { LabelSubmission, NextResponse, SessionStats } from "./types.js";

/** Thrown for transport failures and non-2xx statuses other than 409. */
export class ApiError extends Error {
  constructor(message: string, readonly status: number | null = null) {
    super(message);
  }
}

/** 409 from the service: this annotator already labeled the task. */
export class DuplicateLabelError extends ApiError {
  constructor(message: string) {
    super(message, 409);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}/session/${encodeURIComponent(this.sessionId)}${path}`;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.url(path), init);
    } catch (err) {
      throw new ApiError(`network failure: ${String(err)}`);
    }
    if (response.status === 409) {
      throw new DuplicateLabelError(await response.text());
    }
    if (!response.ok) {
      throw new ApiError(`service returned ${response.status}`, response.status);
    }
    return response;
  }

  async fetchNext(annotatorId: string): Promise<NextResponse> {
    const response = await this.request(
      `/next?annotator=${encodeURIComponent(annotatorId)}`,
    );
    return (await response.json()) as NextResponse;
  }

  async submitLabel(label: LabelSubmission): Promise<void> {
    await this.request("/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(label),
    });
  }

  async fetchStats(): Promise<SessionStats> {
    const response = await this.request("/stats");
    return (await response.json()) as SessionStats;
  }
}
