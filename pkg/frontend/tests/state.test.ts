import { describe, expect, it } from "vitest";

import type { AuditRecordView, PendingRequest } from "../src/api.js";
import {
  chainBadge,
  groupByRequest,
  resolveDepartures,
  toPendingViews,
} from "../src/state.js";

function pending(requestId: string, secondsRemaining = 30): PendingRequest {
  return {
    requestId,
    op: "fs.write.irrev",
    target: "corpus/report.txt",
    reasoning: "cleanup",
    originSkillId: "role-cleaner",
    originLevel: "declared",
    secondsRemaining,
  };
}

function decision(requestId: string, verdict: string, brokerId: string): AuditRecordView {
  return {
    seq: 1,
    recordType: "irreversible.decision",
    requestId,
    payload: { decision: verdict, brokerId },
    prevHash: "0".repeat(64),
    selfHash: "f".repeat(64),
  };
}

describe("toPendingViews", () => {
  it("ticks the countdown between polls", () => {
    const views = toPendingViews([pending("r1", 30)], 4.5);
    expect(views[0].countdown).toBeCloseTo(25.5);
  });

  it("never displays below zero", () => {
    const views = toPendingViews([pending("r1", 2)], 10);
    expect(views[0].countdown).toBe(0);
  });
});

describe("resolveDepartures", () => {
  it("shows timeout departures as auto-denied", () => {
    const resolved = resolveDepartures(
      [pending("r1")],
      [],
      [decision("r1", "deny", "timeout")],
    );
    expect(resolved).toHaveLength(1);
    expect(resolved[0].outcome).toBe("auto-denied (timeout)");
  });

  it("shows console approvals as approved", () => {
    const resolved = resolveDepartures(
      [pending("r1")],
      [],
      [decision("r1", "approve", "webhook")],
    );
    expect(resolved[0].outcome).toBe("approved");
  });

  it("keeps still-pending requests out of the resolved list", () => {
    const resolved = resolveDepartures([pending("r1")], [pending("r1")], []);
    expect(resolved).toHaveLength(0);
  });
});

describe("groupByRequest", () => {
  it("groups lifecycle records in log order", () => {
    const records: AuditRecordView[] = [
      { seq: 0, recordType: "trustroot.lock", requestId: null, payload: {},
        prevHash: "", selfHash: "" },
      { seq: 1, recordType: "irreversible.request", requestId: "r1", payload: {},
        prevHash: "", selfHash: "" },
      { seq: 2, recordType: "irreversible.decision", requestId: "r1", payload: {},
        prevHash: "", selfHash: "" },
      { seq: 3, recordType: "irreversible.executed", requestId: "r1", payload: {},
        prevHash: "", selfHash: "" },
    ];
    const groups = groupByRequest(records);
    expect(groups).toHaveLength(2);
    expect(groups[1].requestId).toBe("r1");
    expect(groups[1].records.map((r) => r.recordType)).toEqual([
      "irreversible.request",
      "irreversible.decision",
      "irreversible.executed",
    ]);
  });
});

describe("chainBadge", () => {
  it("is green when the chain verifies", () => {
    expect(chainBadge(true, null)).toEqual({ ok: true, label: "chain ok" });
  });

  it("names the broken record otherwise", () => {
    expect(chainBadge(false, 7)).toEqual({ ok: false, label: "chain broken at #7" });
  });
});
