// Minimal client for the gateway control plane. The console never touches
// gateway state through anything but the documented decision endpoint.

import type { DecisionResult, EventsPage, PendingEntry, PendingState } from "./types.js";

export class GatewayUnreachable extends Error {}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: string,
  ) {
    super(`gateway returned ${status}: ${body}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private inFlightDecisions = new Map<string, Promise<DecisionResult>>();

  constructor(
    private readonly baseUrl: string,
    private token: string | null = null,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new GatewayUnreachable(String(err));
    }
    return response;
  }

  async listPending(): Promise<PendingEntry[]> {
    const response = await this.request("/v1/pending", { headers: this.headers(false) });
    if (!response.ok) throw new ApiError(response.status, await response.text());
    const doc = (await response.json()) as { pending: PendingEntry[] };
    return doc.pending;
  }

  async listEvents(since: number): Promise<EventsPage> {
    const response = await this.request(`/v1/events?since=${since}`, {
      headers: this.headers(false),
    });
    if (!response.ok) throw new ApiError(response.status, await response.text());
    return (await response.json()) as EventsPage;
  }

  /**
   * Submit an allow/deny decision. Calls for a call_id already in flight
   * coalesce onto the same request, so a double-click can never submit
   * twice; AlreadyDecided comes back as a non-error result.
   */
  submitDecision(
    callId: string,
    decision: "allow" | "deny",
    decider: string,
  ): Promise<DecisionResult> {
    const existing = this.inFlightDecisions.get(callId);
    if (existing) return existing;
    const promise = this.postDecision(callId, decision, decider).finally(() => {
      this.inFlightDecisions.delete(callId);
    });
    this.inFlightDecisions.set(callId, promise);
    return promise;
  }

  private async postDecision(
    callId: string,
    decision: "allow" | "deny",
    decider: string,
  ): Promise<DecisionResult> {
    const response = await this.request(`/v1/pending/${encodeURIComponent(callId)}/decision`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify({ decision, decider }),
    });
    if (response.status === 404) return { ok: false, reason: "unknown_call" };
    if (response.status === 409) {
      const body = (await response.json()) as { state?: PendingState };
      return { ok: false, reason: "already_decided", state: body.state ?? "Expired" };
    }
    if (!response.ok) throw new ApiError(response.status, await response.text());
    return { ok: true, outcome: await response.json() };
  }
}
