// Console bootstrap: poll the queue and the event feed, submit decisions,
// reconcile optimistic updates against the next poll.

import { ApiError, GatewayClient, GatewayUnreachable } from "./api.js";
import { mount, renderEvents, renderPendingList } from "./render.js";
import type { GatewayEvent, PendingEntry, PendingState } from "./types.js";

const POLL_INTERVAL_MS = 2000;
const MAX_BACKOFF_MS = 30_000;
const EVENT_CAP = 200;

interface AppState {
  entries: PendingEntry[];
  events: GatewayEvent[];
  eventCursor: number;
  optimistic: Map<string, PendingState>;
  notice: string | null;
  backoffMs: number;
}

function applyOptimistic(entries: PendingEntry[], optimistic: Map<string, PendingState>): PendingEntry[] {
  return entries.map((entry) => {
    const state = optimistic.get(entry.call_id);
    return state && entry.state === "Pending" ? { ...entry, state } : entry;
  });
}

export function startApp(doc: Document, win: Window): void {
  const base = win.location.origin;
  let token = win.localStorage.getItem("gptguard-token");
  const client = new GatewayClient(base, token);

  const state: AppState = {
    entries: [],
    events: [],
    eventCursor: 0,
    optimistic: new Map(),
    notice: null,
    backoffMs: POLL_INTERVAL_MS,
  };

  const banner = doc.getElementById("banner")!;
  const pendingRoot = doc.getElementById("pending")!;
  const eventsRoot = doc.getElementById("events")!;
  const tokenButton = doc.getElementById("set-token")!;

  tokenButton.addEventListener("click", () => {
    const entered = win.prompt("Control-plane bearer token (empty to clear):", token ?? "");
    if (entered === null) return;
    token = entered || null;
    if (token) win.localStorage.setItem("gptguard-token", token);
    else win.localStorage.removeItem("gptguard-token");
    client.setToken(token);
  });

  function showBanner(text: string | null): void {
    banner.textContent = text ?? "";
    banner.classList.toggle("hidden", text === null);
  }

  function redraw(): void {
    pendingRoot.replaceChildren(
      mount(renderPendingList(applyOptimistic(state.entries, state.optimistic)), doc),
    );
    eventsRoot.replaceChildren(mount(renderEvents(state.events), doc));
  }

  async function decide(callId: string, action: "allow" | "deny"): Promise<void> {
    state.optimistic.set(callId, action === "allow" ? "Allowed" : "Denied");
    redraw();
    try {
      const result = await client.submitDecision(callId, action, "console");
      if (!result.ok) {
        state.notice =
          result.reason === "already_decided"
            ? `Call ${callId} was already ${result.state.toLowerCase()}.`
            : `Call ${callId} is no longer known; refreshing.`;
        showBanner(state.notice);
        state.optimistic.delete(callId);
      }
    } catch (err) {
      state.optimistic.delete(callId);
      showBanner(err instanceof GatewayUnreachable ? "Gateway unreachable; decision not sent." : String(err));
    }
    void poll();
  }

  pendingRoot.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const action = target.getAttribute("data-action");
    const callId = target.getAttribute("data-call-id");
    if ((action === "allow" || action === "deny") && callId && !target.hasAttribute("disabled")) {
      void decide(callId, action);
    }
  });

  let polling = false;
  async function poll(): Promise<void> {
    if (polling) return; // coalesce concurrent polls
    polling = true;
    try {
      const entries = await client.listPending();
      const page = await client.listEvents(state.eventCursor);
      state.entries = entries;
      // a fresh poll is the source of truth: drop reconciled optimism
      for (const entry of entries) {
        if (entry.state !== "Pending") state.optimistic.delete(entry.call_id);
      }
      if (page.events.length > 0) {
        state.events = [...state.events, ...page.events].slice(-EVENT_CAP);
        state.eventCursor = page.next;
      }
      state.backoffMs = POLL_INTERVAL_MS;
      if (state.notice === null) showBanner(null);
      state.notice = null;
      redraw();
    } catch (err) {
      if (err instanceof GatewayUnreachable) {
        showBanner(`Gateway unreachable; retrying in ${Math.round(state.backoffMs / 1000)}s…`);
      } else if (err instanceof ApiError && err.status === 401) {
        showBanner("Unauthorized: set the control-plane token.");
      } else {
        showBanner(String(err));
      }
      state.backoffMs = Math.min(state.backoffMs * 2, MAX_BACKOFF_MS);
    } finally {
      polling = false;
      win.setTimeout(() => void poll(), state.backoffMs);
    }
  }

  void poll();
}

declare global {
  interface Window {
    __gptguardConsoleStarted?: boolean;
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined" && !window.__gptguardConsoleStarted) {
  window.__gptguardConsoleStarted = true;
  window.addEventListener("DOMContentLoaded", () => startApp(document, window));
}
