/**
 * Console wiring: one polling loop, last-response-wins rendering.
 *
 * The console is stateless beyond what the API returns; killing it
 * mid-session changes nothing server-side except that pending requests
 * time out to deny.
 */

import { ApiError, ConsoleApi, type PendingRequest } from "./api.js";
import {
  chainBadge,
  groupByRequest,
  resolveDepartures,
  toPendingViews,
  type ResolvedView,
} from "./state.js";
import {
  renderAuditGroups,
  renderBadge,
  renderDegradedBanner,
  renderQueue,
} from "./render.js";

const POLL_INTERVAL_MS = 1000;
const RESOLVED_CARD_TTL_MS = 8000;

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("api") ?? "http://127.0.0.1:8787";
}

const api = new ConsoleApi(apiBase());

let lastPending: PendingRequest[] = [];
let lastFetchAt = 0;
let recentlyResolved: { view: ResolvedView; at: number }[] = [];
let degraded = false;

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

async function poll(): Promise<void> {
  try {
    const [pending, audit] = await Promise.all([api.pending(), api.audit()]);
    degraded = false;
    const now = Date.now();
    const departures = resolveDepartures(lastPending, pending, audit.records);
    recentlyResolved = [
      ...departures.map((view) => ({ view, at: now })),
      ...recentlyResolved,
    ].filter((entry) => now - entry.at < RESOLVED_CARD_TTL_MS);
    lastPending = pending;
    lastFetchAt = now;

    el("queue").innerHTML = renderQueue(
      toPendingViews(pending, 0),
      recentlyResolved.map((entry) => entry.view),
    );
    el("chain-badge").innerHTML = renderBadge(chainBadge(audit.chainOk, audit.brokenAt));
    el("audit-body").innerHTML = renderAuditGroups(groupByRequest(audit.records));
    el("record-count").textContent = `${audit.total} records`;
  } catch (err) {
    degraded = true;
    if (!(err instanceof ApiError)) {
      // Network failure: keep the last view, show the banner.
    }
  }
  el("banner-slot").innerHTML = renderDegradedBanner(degraded);
}

/** Tick displayed countdowns between polls without re-fetching. */
function tick(): void {
  if (degraded) return;
  const elapsed = (Date.now() - lastFetchAt) / 1000;
  el("queue").innerHTML = renderQueue(
    toPendingViews(lastPending, elapsed),
    recentlyResolved.map((entry) => entry.view),
  );
}

async function onQueueClick(event: Event): Promise<void> {
  const button = (event.target as HTMLElement).closest("button[data-decision]");
  if (!button) return;
  const card = button.closest("[data-request-id]");
  if (!card) return;
  const requestId = card.getAttribute("data-request-id")!;
  const decision = button.getAttribute("data-decision") as "approve" | "deny";
  if (degraded) return; // fail closed: no offline queuing
  try {
    await api.decide(requestId, decision);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      // Decided elsewhere (or timed out); the next poll shows the truth.
    } else {
      degraded = true;
      el("banner-slot").innerHTML = renderDegradedBanner(true);
    }
  }
  await poll();
}

export function start(): void {
  el("queue").addEventListener("click", (event) => {
    void onQueueClick(event);
  });
  void poll();
  window.setInterval(() => void poll(), POLL_INTERVAL_MS);
  window.setInterval(tick, 250);
}

if (typeof document !== "undefined" && document.getElementById("queue")) {
  start();
}
