// View-tree construction and DOM mounting.
//
// Every piece of gateway-supplied content (payload values, endpoints,
// action names, findings) enters the tree only as text nodes, and mount()
// writes text exclusively through createTextNode, so a payload containing
// markup renders as inert characters. URLs are always displayed in full
// text form, never as live hyperlinks.

import { segmentValue } from "./bytes.js";
import type { GatewayEvent, PendingEntry } from "./types.js";

export interface VNode {
  readonly tag: string;
  readonly attrs: Readonly<Record<string, string>>;
  readonly children: readonly (VNode | string)[];
}

export function h(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: (VNode | string)[]
): VNode {
  return { tag, attrs, children };
}

export function mount(node: VNode, doc: Document): HTMLElement {
  const element = doc.createElement(node.tag);
  for (const [name, value] of Object.entries(node.attrs)) {
    element.setAttribute(name, value);
  }
  for (const child of node.children) {
    if (typeof child === "string") {
      element.appendChild(doc.createTextNode(child));
    } else {
      element.appendChild(mount(child, doc));
    }
  }
  return element;
}

function formatAge(seconds: number): string {
  if (seconds < 60) return `${Math.floor(seconds)}s`;
  const minutes = Math.floor(seconds / 60);
  return `${minutes}m ${Math.floor(seconds - minutes * 60)}s`;
}

/** One payload value with its PII spans wrapped in <mark> elements. */
export function renderPayloadValue(entry: PendingEntry, key: string, value: string): VNode {
  const spans = entry.pii_spans.filter((s) => s.key === key);
  const children: (VNode | string)[] = [];
  for (const segment of segmentValue(value, spans)) {
    if (segment.kind === null) {
      if (segment.text) children.push(segment.text);
    } else {
      children.push(
        h("mark", { class: "pii", "data-kind": segment.kind, title: segment.kind }, segment.text),
      );
    }
  }
  return h("span", { class: "payload-value" }, ...children);
}

export function renderFinding(finding: { severity: string; leaf: string; detector: string; remediation: string }): VNode {
  return h(
    "li",
    { class: `finding sev-${finding.severity.toLowerCase()}` },
    h("span", { class: "sev" }, finding.severity),
    " ",
    h("span", { class: "leaf" }, finding.leaf),
    ` [${finding.detector}] `,
    finding.remediation,
  );
}

export function renderPendingEntry(entry: PendingEntry): VNode {
  const actionable = entry.state === "Pending";
  const payloadRows = entry.call.payload.map((pair) =>
    h(
      "tr",
      {},
      h("th", { class: "payload-key" }, pair.key),
      h("td", {}, renderPayloadValue(entry, pair.key, pair.value)),
    ),
  );
  const buttonAttrs = (action: "allow" | "deny"): Record<string, string> => {
    const attrs: Record<string, string> = {
      class: `decide ${action}`,
      "data-action": action,
      "data-call-id": entry.call_id,
    };
    if (!actionable) attrs["disabled"] = "disabled";
    return attrs;
  };
  return h(
    "article",
    { class: `pending state-${entry.state.toLowerCase()}`, "data-call-id": entry.call_id },
    h(
      "header",
      {},
      h("span", { class: "action-name" }, entry.call.action_name),
      " ",
      h("code", { class: "method" }, entry.call.method),
      " ",
      // full URL in text form, never a hyperlink
      h("code", { class: "endpoint" }, entry.call.endpoint),
    ),
    h(
      "p",
      { class: "meta" },
      h("span", { class: "state" }, entry.state),
      ` · consent: ${entry.call.consent} · age ${formatAge(entry.age_secs)}`,
      entry.state === "Pending" ? ` · expires in ${formatAge(entry.expires_in_secs)}` : "",
      entry.decided_by ? ` · decided by ${entry.decided_by}` : "",
    ),
    h("table", { class: "payload" }, ...payloadRows),
    h("ul", { class: "findings" }, ...entry.findings.map(renderFinding)),
    h(
      "footer",
      {},
      h("button", buttonAttrs("allow"), "Allow"),
      h("button", buttonAttrs("deny"), "Deny"),
    ),
  );
}

export function renderPendingList(entries: readonly PendingEntry[]): VNode {
  if (entries.length === 0) {
    return h("p", { class: "empty" }, "No pending calls.");
  }
  return h("div", { class: "pending-list" }, ...entries.map(renderPendingEntry));
}

function describeEvent(event: GatewayEvent): string {
  const who = typeof event.data["decider"] === "string" ? ` by ${event.data["decider"]}` : "";
  const decision = typeof event.data["decision"] === "string" ? ` (${event.data["decision"]})` : "";
  return `${event.kind}${decision}${who}`;
}

export function renderEvents(events: readonly GatewayEvent[]): VNode {
  if (events.length === 0) {
    return h("p", { class: "empty" }, "No events yet.");
  }
  // newest first
  const ordered = [...events].sort((a, b) => b.seq - a.seq);
  return h(
    "ol",
    { class: "events" },
    ...ordered.map((event) =>
      h(
        "li",
        { class: `event kind-${event.kind}`, "data-seq": String(event.seq) },
        h("span", { class: "seq" }, `#${event.seq}`),
        " ",
        describeEvent(event),
        event.call_id ? ` — ${event.call_id}` : "",
      ),
    ),
  );
}

/** Depth-first walk used by tests to prove payload text stays inert. */
export function* walk(node: VNode): Generator<VNode | string> {
  yield node;
  for (const child of node.children) {
    if (typeof child === "string") {
      yield child;
    } else {
      yield* walk(child);
    }
  }
}
