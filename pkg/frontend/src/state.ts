/**
 * Pure view-state computation: countdowns, resolved-request fates, and
 * lifecycle grouping. Kept free of DOM and network so it is directly
 * testable; rendering consumes the structures produced here.
 */

import type { AuditRecordView, PendingRequest } from "./api.js";

export interface PendingView extends PendingRequest {
  /** Clamped countdown for display; never below zero. */
  countdown: number;
}

export interface ResolvedView {
  requestId: string;
  op: string;
  target: string;
  outcome: string; // "approved" | "denied" | "auto-denied (timeout)"
}

/** Clamp server-reported deadlines and tick them between polls. */
export function toPendingViews(
  items: PendingRequest[],
  elapsedSinceFetch: number,
): PendingView[] {
  return items.map((item) => ({
    ...item,
    countdown: Math.max(0, item.secondsRemaining - elapsedSinceFetch),
  }));
}

/**
 * Fate of requests that left the pending queue, reconstructed from the
 * audit log. A decision record names its broker: the timeout broker
 * shows as auto-denied, anything else as plainly approved or denied.
 */
export function resolveDepartures(
  previous: PendingRequest[],
  current: PendingRequest[],
  records: AuditRecordView[],
): ResolvedView[] {
  const still = new Set(current.map((item) => item.requestId));
  const resolved: ResolvedView[] = [];
  for (const item of previous) {
    if (still.has(item.requestId)) continue;
    const decision = records.find(
      (r) => r.recordType === "irreversible.decision" && r.requestId === item.requestId,
    );
    let outcome = "resolved";
    if (decision) {
      const verdict = decision.payload["decision"];
      const broker = decision.payload["brokerId"];
      if (broker === "timeout") {
        outcome = "auto-denied (timeout)";
      } else {
        outcome = verdict === "approve" ? "approved" : "denied";
      }
    }
    resolved.push({
      requestId: item.requestId,
      op: item.op,
      target: item.target,
      outcome,
    });
  }
  return resolved;
}

export interface LifecycleGroup {
  requestId: string;
  records: AuditRecordView[];
}

/**
 * Group records by requestId preserving log order; records without a
 * request id (locks, loads, aborts) become their own single-record
 * groups so the chain view stays complete.
 */
export function groupByRequest(records: AuditRecordView[]): LifecycleGroup[] {
  const groups: LifecycleGroup[] = [];
  const byId = new Map<string, LifecycleGroup>();
  for (const record of records) {
    if (!record.requestId) {
      groups.push({ requestId: `record-${record.seq}`, records: [record] });
      continue;
    }
    const existing = byId.get(record.requestId);
    if (existing) {
      existing.records.push(record);
    } else {
      const group = { requestId: record.requestId, records: [record] };
      byId.set(record.requestId, group);
      groups.push(group);
    }
  }
  return groups;
}

export interface ChainBadge {
  ok: boolean;
  label: string;
}

export function chainBadge(chainOk: boolean, brokenAt: number | null): ChainBadge {
  return chainOk
    ? { ok: true, label: "chain ok" }
    : { ok: false, label: `chain broken at #${brokenAt ?? "?"}` };
}
