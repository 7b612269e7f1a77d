// Wire types mirrored from the gateway control plane.

export interface ByteSpan {
  readonly key: string;
  readonly kind: string;
  /** byte offsets [start, end) into the UTF-8 encoding of the payload value */
  readonly span: readonly [number, number];
}

export interface FindingLocus {
  readonly kind: string;
  readonly path: string;
  readonly span: readonly [number, number];
}

export interface Finding {
  readonly id: string;
  readonly leaf: string;
  readonly category: string;
  readonly severity: string;
  readonly detector: string;
  readonly confidence: number;
  readonly locus: FindingLocus;
  readonly evidence: string;
  readonly remediation: string;
}

export interface PayloadPair {
  readonly key: string;
  readonly value: string;
}

export interface PendingCall {
  readonly action_name: string;
  readonly endpoint: string;
  readonly method: string;
  readonly payload: readonly PayloadPair[];
  readonly consent: string;
}

export type PendingState = "Pending" | "Allowed" | "Denied" | "Expired";

export interface PendingEntry {
  readonly call_id: string;
  readonly state: PendingState;
  readonly age_secs: number;
  readonly expires_in_secs: number;
  readonly call: PendingCall;
  readonly findings: readonly Finding[];
  readonly pii_spans: readonly ByteSpan[];
  readonly decided_by: string | null;
}

export interface GatewayEvent {
  readonly seq: number;
  readonly ts: number;
  readonly kind: string;
  readonly call_id: string | null;
  readonly data: Record<string, unknown>;
}

export interface EventsPage {
  readonly events: readonly GatewayEvent[];
  readonly next: number;
}

export interface DecisionOutcome {
  readonly outcome: string;
  readonly findings?: readonly Finding[];
  readonly upstream_status?: number;
  readonly reason?: string;
}

export type DecisionResult =
  | { readonly ok: true; readonly outcome: DecisionOutcome }
  | { readonly ok: false; readonly reason: "already_decided"; readonly state: PendingState }
  | { readonly ok: false; readonly reason: "unknown_call" };
