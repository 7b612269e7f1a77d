// End-to-end acceptance: the console client and renderer against a real
// gateway process, with an instrumented local upstream counting requests.

import { spawn, type ChildProcess } from "node:child_process";
import { createServer, type Server } from "node:http";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { renderPendingList, walk } from "../src/render.js";
import type { VNode } from "../src/render.js";

const REPO_ROOT = fileURLToPath(new URL("../..", import.meta.url));

let upstream: Server;
let upstreamPort = 0;
let upstreamHits = 0;
let gateway: ChildProcess;
let base = "";

function textOf(node: VNode): string {
  let out = "";
  for (const part of walk(node)) {
    if (typeof part === "string") out += part;
  }
  return out;
}

async function startUpstream(): Promise<void> {
  upstream = createServer((_req, res) => {
    upstreamHits += 1;
    res.writeHead(200, { "Content-Type": "application/json" });
    res.end('{"stored": true}');
  });
  await new Promise<void>((resolve) => upstream.listen(0, "127.0.0.1", resolve));
  const address = upstream.address();
  if (address && typeof address === "object") upstreamPort = address.port;
}

async function startGateway(): Promise<void> {
  const dir = mkdtempSync(join(tmpdir(), "gptguard-console-"));
  const policyPath = join(dir, "policy.json");
  writeFileSync(
    policyPath,
    JSON.stringify({
      mode: "enforce",
      pii_action: "require_approval",
      undeclared_host_action: "require_approval",
      declared_hosts: [],
      approval_timeout_secs: 300,
    }),
  );
  gateway = spawn("python3", ["-m", "gptguard", "serve-gateway", "--policy", policyPath, "--listen", "127.0.0.1:0"], {
    cwd: REPO_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  base = await new Promise<string>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`gateway never became ready: ${buffer}`)), 15000);
    gateway.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/listening on (http:\/\/[^\s]+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]!);
      }
    });
    gateway.stderr!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
    });
    gateway.on("exit", (code) => reject(new Error(`gateway exited early (${code}): ${buffer}`)));
  });
}

async function proxyCall(payloadValue: string): Promise<{ status: number; doc: { outcome: string; call_id?: string } }> {
  const response = await fetch(`${base}/v1/proxy`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({
      action_name: "saveNote",
      endpoint: `http://127.0.0.1:${upstreamPort}/collect`,
      method: "POST",
      payload: [{ key: "message", value: payloadValue }],
      consent: "granted",
    }),
  });
  return { status: response.status, doc: (await response.json()) as { outcome: string; call_id?: string } };
}

beforeAll(async () => {
  await startUpstream();
  await startGateway();
}, 30000);

afterAll(async () => {
  gateway?.kill("SIGTERM");
  await new Promise((resolve) => gateway?.on("exit", resolve));
  await new Promise((resolve) => upstream?.close(resolve));
});

describe("console against a live gateway", () => {
  const HOSTILE_PAYLOAD =
    'Please keep this private. Mail me at alice.w@example-mail.com <img src=x onerror="alert(1)">';

  it("shows the held PII call with a highlighted span and denies it with zero upstream requests", async () => {
    const client = new GatewayClient(base);

    const { status, doc } = await proxyCall(HOSTILE_PAYLOAD);
    expect(status).toBe(202);
    expect(doc.outcome).toBe("held");
    const callId = doc.call_id!;
    expect(upstreamHits).toBe(0);

    // queue view: highlighted span + markup rendered inert
    const pending = await client.listPending();
    expect(pending).toHaveLength(1);
    const entry = pending[0]!;
    expect(entry.state).toBe("Pending");
    expect(entry.pii_spans.map((s) => s.kind)).toContain("email");

    const tree = renderPendingList(pending);
    const marks: VNode[] = [];
    for (const part of walk(tree)) {
      if (typeof part !== "string" && part.tag === "mark") marks.push(part);
    }
    expect(marks.length).toBeGreaterThan(0);
    expect(marks.map((m) => textOf(m))).toContain("alice.w@example-mail.com");
    for (const part of walk(tree)) {
      if (typeof part !== "string") {
        expect(part.tag).not.toBe("img");
        expect(part.tag).not.toBe("script");
      }
    }
    expect(textOf(tree)).toContain('<img src=x onerror="alert(1)">');

    // deny round-trip
    const result = await client.submitDecision(callId, "deny", "console-test");
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.outcome.outcome).toBe("rejected");
    expect(upstreamHits).toBe(0);

    const after = await client.listPending();
    expect(after.find((e) => e.call_id === callId)?.state).toBe("Denied");
    expect(after.find((e) => e.call_id === callId)?.decided_by).toBe("console-test");

    // a second deny is a calm, non-error notice
    const repeat = await client.submitDecision(callId, "deny", "console-test");
    expect(repeat).toEqual({ ok: false, reason: "already_decided", state: "Denied" });
    expect(upstreamHits).toBe(0);
  }, 30000);

  it("forwards exactly once after an allow", async () => {
    const client = new GatewayClient(base);
    const { doc } = await proxyCall("second note: reach me at bob@x.example");
    const callId = doc.call_id!;
    expect(upstreamHits).toBe(0);

    const result = await client.submitDecision(callId, "allow", "console-test");
    expect(result.ok).toBe(true);
    if (result.ok) {
      expect(result.outcome.outcome).toBe("forwarded");
      expect(result.outcome.upstream_status).toBe(200);
    }
    expect(upstreamHits).toBe(1);
  }, 30000);

  it("pages the event feed and stays stable past the end", async () => {
    const client = new GatewayClient(base);
    const page = await client.listEvents(0);
    const kinds = page.events.map((e) => e.kind);
    expect(kinds).toContain("call_held");
    expect(kinds).toContain("decision");
    // payload values in the log are redacted
    const held = page.events.find((e) => e.kind === "call_held")!;
    const logged = JSON.stringify(held.data);
    expect(logged).not.toContain("alice.w@example-mail.com");
    expect(logged).toContain("<email>");

    const beyond = await client.listEvents(page.next);
    expect(beyond.events).toEqual([]);
    expect(beyond.next).toBe(page.next);
  }, 30000);

  it("never mutates gateway state except through the decision endpoint", async () => {
    // the client exposes only GETs plus the decision POST; listing twice
    // leaves the queue byte-identical
    const client = new GatewayClient(base);
    const first = await client.listPending();
    const second = await client.listPending();
    expect(second.map((e) => [e.call_id, e.state])).toEqual(
      first.map((e) => [e.call_id, e.state]),
    );
  }, 30000);
});
