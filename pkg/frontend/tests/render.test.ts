import { describe, expect, it } from "vitest";

import { h, renderEvents, renderPendingEntry, renderPendingList, renderPayloadValue, walk } from "../src/render.js";
import type { GatewayEvent, PendingEntry, VNode } from "../src/types.js";

const encoder = new TextEncoder();

function byteSpanOf(value: string, needle: string): [number, number] {
  const charStart = value.indexOf(needle);
  const start = encoder.encode(value.slice(0, charStart)).length;
  return [start, start + encoder.encode(needle).length];
}

function entryWith(overrides: Partial<PendingEntry> = {}): PendingEntry {
  const message = "I am anxious. Reach me at alice.w@example-mail.com please.";
  return {
    call_id: "c-test123",
    state: "Pending",
    age_secs: 12.5,
    expires_in_secs: 287.5,
    call: {
      action_name: "saveNote",
      endpoint: "https://collector.attacker-example.com/v1/notes",
      method: "POST",
      payload: [{ key: "message", value: message }],
      consent: "granted",
    },
    findings: [
      {
        id: "f-1",
        leaf: "DirectPhishing",
        category: "InformationTheft",
        severity: "High",
        detector: "payload-pii",
        confidence: 0.85,
        locus: { kind: "ApiPayload", path: "payload.message", span: [0, 1] },
        evidence: "alice.w@example-mail.com",
        remediation: "payload carries email PII",
      },
    ],
    pii_spans: [
      { key: "message", kind: "email", span: byteSpanOf(message, "alice.w@example-mail.com") },
    ],
    decided_by: null,
    ...overrides,
  };
}

function textOf(node: VNode): string {
  let out = "";
  for (const part of walk(node)) {
    if (typeof part === "string") out += part;
  }
  return out;
}

function findAll(node: VNode, predicate: (n: VNode) => boolean): VNode[] {
  const found: VNode[] = [];
  for (const part of walk(node)) {
    if (typeof part !== "string" && predicate(part)) found.push(part);
  }
  return found;
}

describe("renderPayloadValue", () => {
  it("marks the PII span and keeps surrounding text", () => {
    const entry = entryWith();
    const pair = entry.call.payload[0]!;
    const node = renderPayloadValue(entry, pair.key, pair.value);
    const marks = findAll(node, (n) => n.tag === "mark");
    expect(marks).toHaveLength(1);
    expect(marks[0]!.attrs["data-kind"]).toBe("email");
    expect(textOf(marks[0]!)).toBe("alice.w@example-mail.com");
    expect(textOf(node)).toBe(pair.value);
  });

  it("is escape-safe: markup in payloads stays text, never becomes a tag", () => {
    const hostile = 'see <img src=x onerror="alert(1)"> and <script>alert(2)</script>';
    const entry = entryWith({
      call: {
        ...entryWith().call,
        payload: [{ key: "message", value: hostile }],
      },
      pii_spans: [],
    });
    const node = renderPendingEntry(entry);
    for (const part of walk(node)) {
      if (typeof part !== "string") {
        expect(["img", "script", "a"]).not.toContain(part.tag);
        for (const value of Object.values(part.attrs)) {
          expect(value).not.toContain("alert(");
        }
      }
    }
    expect(textOf(node)).toContain(hostile); // verbatim, inert
  });
});

describe("renderPendingEntry", () => {
  it("shows action, method, full endpoint URL as text, age and countdown", () => {
    const node = renderPendingEntry(entryWith());
    const text = textOf(node);
    expect(text).toContain("saveNote");
    expect(text).toContain("POST");
    expect(text).toContain("https://collector.attacker-example.com/v1/notes");
    expect(text).toContain("age 12s");
    expect(text).toContain("expires in 4m 47s");
    expect(text).toContain("consent: granted");
    // URLs are never rendered as hyperlinks
    expect(findAll(node, (n) => n.tag === "a")).toHaveLength(0);
  });

  it("renders findings", () => {
    const text = textOf(renderPendingEntry(entryWith()));
    expect(text).toContain("DirectPhishing");
    expect(text).toContain("payload carries email PII");
  });

  it("enables decision buttons only while Pending", () => {
    const pending = renderPendingEntry(entryWith());
    const buttons = findAll(pending, (n) => n.tag === "button");
    expect(buttons).toHaveLength(2);
    for (const button of buttons) {
      expect(button.attrs["disabled"]).toBeUndefined();
      expect(button.attrs["data-call-id"]).toBe("c-test123");
    }
    for (const state of ["Denied", "Allowed", "Expired"] as const) {
      const node = renderPendingEntry(entryWith({ state, decided_by: "op" }));
      for (const button of findAll(node, (n) => n.tag === "button")) {
        expect(button.attrs["disabled"]).toBe("disabled");
      }
    }
  });

  it("shows the expired state distinctly", () => {
    const node = renderPendingEntry(entryWith({ state: "Expired" }));
    expect(node.attrs["class"]).toContain("state-expired");
    expect(textOf(node)).toContain("Expired");
  });
});

describe("renderPendingList", () => {
  it("shows an explicit empty state", () => {
    expect(textOf(renderPendingList([]))).toBe("No pending calls.");
  });
});

describe("renderEvents", () => {
  const events: GatewayEvent[] = [
    { seq: 1, ts: 1, kind: "call_held", call_id: "c-1", data: {} },
    { seq: 2, ts: 2, kind: "decision", call_id: "c-1", data: { decision: "denied", decider: "op" } },
  ];

  it("renders newest first", () => {
    const node = renderEvents(events);
    const items = findAll(node, (n) => n.tag === "li");
    expect(items.map((i) => i.attrs["data-seq"])).toEqual(["2", "1"]);
    expect(textOf(items[0]!)).toContain("decision (denied) by op");
  });

  it("renders an empty feed state", () => {
    expect(textOf(renderEvents([]))).toBe("No events yet.");
  });
});

describe("h", () => {
  it("builds plain trees", () => {
    const node = h("div", { class: "x" }, "a", h("span", {}, "b"));
    expect(node.tag).toBe("div");
    expect(node.children).toHaveLength(2);
  });
});
