/** HTML string templates for the two panels. All text is escaped. */

import type { ChainBadge, LifecycleGroup, PendingView, ResolvedView } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderPendingCard(item: PendingView): string {
  const seconds = Math.ceil(item.countdown);
  return `
<div class="card pending" data-request-id="${escapeHtml(item.requestId)}">
  <div class="card-head">
    <span class="op">${escapeHtml(item.op)}</span>
    <span class="target">${escapeHtml(item.target)}</span>
    <span class="countdown${seconds <= 10 ? " urgent" : ""}">${seconds}s</span>
  </div>
  <div class="origin">skill ${escapeHtml(item.originSkillId)}
    (${escapeHtml(item.originLevel ?? "unknown")})</div>
  <div class="reasoning">${escapeHtml(item.reasoning)}</div>
  <div class="actions">
    <button class="approve" data-decision="approve">Approve</button>
    <button class="deny" data-decision="deny">Deny</button>
  </div>
</div>`;
}

export function renderResolvedCard(item: ResolvedView): string {
  const cls = item.outcome.startsWith("approved") ? "approved" : "denied";
  return `
<div class="card resolved ${cls}">
  <span class="op">${escapeHtml(item.op)}</span>
  <span class="target">${escapeHtml(item.target)}</span>
  <span class="outcome">${escapeHtml(item.outcome)}</span>
</div>`;
}

export function renderQueue(pending: PendingView[], resolved: ResolvedView[]): string {
  const cards = [
    ...pending.map(renderPendingCard),
    ...resolved.map(renderResolvedCard),
  ];
  return cards.length ? cards.join("\n") : '<div class="empty">no pending requests</div>';
}

export function renderBadge(badge: ChainBadge): string {
  return `<span class="badge ${badge.ok ? "ok" : "broken"}">${escapeHtml(badge.label)}</span>`;
}

export function renderAuditGroups(groups: LifecycleGroup[]): string {
  return groups
    .map((group) => {
      const rows = group.records
        .map((record) => {
          const payload = escapeHtml(JSON.stringify(record.payload));
          return `<tr class="${escapeHtml(record.recordType)}">
  <td class="seq">#${record.seq}</td>
  <td class="type">${escapeHtml(record.recordType)}</td>
  <td class="payload"><code>${payload}</code></td>
</tr>`;
        })
        .join("\n");
      return `<tbody class="group" data-request-id="${escapeHtml(group.requestId)}">
${rows}
</tbody>`;
    })
    .join("\n");
}

export function renderDegradedBanner(visible: boolean): string {
  return visible
    ? '<div class="banner degraded">approval API unreachable; requests time out to deny server-side</div>'
    : "";
}
