/**
 * Pure HTML renderers.
 *
 * Every function maps server wire data to an HTML string with no state and
 * no API calls, so the views are unit-testable without a browser. Digests
 * are rendered exactly as the explorer API returns them.
 */

import type {
  AclEntryWire,
  AgreementWire,
  AnchorWire,
  ApiErrorPayload,
  ChainInfoWire,
  DeliveryWire,
  TraceReportWire,
} from "./api.js";
import type { ViewSession } from "./session.js";
import { permittedActions } from "./session.js";

export function escapeHtml(raw: unknown): string {
  return String(raw)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

function timestamp(ms: number | null): string {
  return ms === null ? "—" : new Date(ms).toISOString().replace("T", " ").slice(0, 19);
}

/** Trace timeline: one row per hop, with a per-hop verification badge. */
export function renderTraceTimeline(report: TraceReportWire): string {
  const hops = report.hops.map((hop, index) => {
    const badge = hop.verified
      ? `<span class="badge badge-ok" title="matches sealed block and anchored header">verified</span>`
      : `<span class="badge badge-bad" title="${escapeHtml(hop.failure ?? "")}">TAMPERED: ${escapeHtml(hop.delivery_id)}</span>`;
    return `
    <li class="hop ${hop.verified ? "hop-ok" : "hop-bad"}" data-delivery="${escapeHtml(hop.delivery_id)}">
      <div class="hop-head">
        <span class="hop-index">${index + 1}</span>
        <span class="hop-route">${escapeHtml(hop.address_from)} → ${escapeHtml(hop.address_to)}</span>
        ${badge}
      </div>
      <div class="hop-meta">
        <span>status ${escapeHtml(hop.status)}</span>
        <span>shipped ${timestamp(hop.shipped_at)}</span>
        <span>received ${timestamp(hop.received_at)}</span>
        <span class="hop-proof">${hop.proof.length} on-chain proofs</span>
      </div>
      ${hop.verified ? "" : `<div class="hop-failure">${escapeHtml(hop.failure ?? "verification failed")}</div>`}
    </li>`;
  });
  const summary = report.verified
    ? `<p class="trace-summary trace-ok">all ${report.hops.length} hops verified against the chain</p>`
    : `<p class="trace-summary trace-bad">verification failed for at least one hop</p>`;
  return `
  <div class="trace" data-batch="${escapeHtml(report.batch_key)}">
    <h3>Batch ${escapeHtml(report.batch_key)}</h3>
    ${summary}
    <ol class="timeline">${hops.join("")}</ol>
  </div>`;
}

/** Distinct user-facing states for trace errors. */
export function renderTraceError(error: ApiErrorPayload): string {
  if (error.code === "ItemNotFound") {
    return `<div class="trace-state state-not-found">
      <h3>Item not found</h3>
      <p>No batch matches that name, production date, and batch number.</p>
    </div>`;
  }
  if (error.code === "AccessDenied") {
    return `<div class="trace-state state-denied">
      <h3>Access denied</h3>
      <p>${escapeHtml(error.message)} <code>(${escapeHtml(error.code)})</code></p>
    </div>`;
  }
  return `<div class="trace-state state-error">
    <h3>Trace failed</h3>
    <p><code>${escapeHtml(error.code)}</code> ${escapeHtml(error.message)}</p>
  </div>`;
}

export function renderAclTable(entries: AclEntryWire[], session: ViewSession): string {
  const canRevoke = permittedActions(session).includes("revoke_access");
  const rows = entries.map((entry) => {
    const revoke = canRevoke && entry.status === "Granted"
      ? `<button class="revoke" data-entry="${escapeHtml(entry.entry_id)}">revoke</button>`
      : "";
    return `
    <tr class="grant-${entry.status.toLowerCase()}" data-entry="${escapeHtml(entry.entry_id)}">
      <td>${escapeHtml(entry.entry_id)}</td>
      <td>${escapeHtml(entry.grantee)}</td>
      <td>${escapeHtml(entry.resource.chain_id.label)} / ${escapeHtml(entry.resource.data_class)}</td>
      <td>${escapeHtml(entry.permission)}</td>
      <td class="status">${escapeHtml(entry.status)}</td>
      <td>${revoke}</td>
    </tr>`;
  });
  return `<table class="acl-table">
    <thead><tr><th>entry</th><th>grantee</th><th>resource</th><th>permission</th><th>status</th><th></th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

export function renderAgreements(agreements: AgreementWire[], session: ViewSession): string {
  const rows = agreements.map((agreement) => {
    const unsigned = agreement.parties.filter((p) => !(p in agreement.signatures));
    const canSign = unsigned.includes(session.entity_id)
      ? `<button class="sign" data-agreement="${escapeHtml(agreement.agreement_id)}">sign</button>`
      : "";
    return `
    <tr class="agreement-${agreement.status}">
      <td>${escapeHtml(agreement.agreement_id)}</td>
      <td>${agreement.parties.map(escapeHtml).join(", ")}</td>
      <td>${agreement.scopes.map((s) => `${escapeHtml(s.data_class)}:${escapeHtml(s.permission)}`).join(", ")}</td>
      <td class="status">${escapeHtml(agreement.status)}</td>
      <td>${canSign}</td>
    </tr>`;
  });
  return `<table class="agreement-table">
    <thead><tr><th>agreement</th><th>parties</th><th>scopes</th><th>status</th><th></th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

/** Which lifecycle button (if any) the session may press on a delivery. */
export function deliveryAction(delivery: DeliveryWire, session: ViewSession):
  { action: string; label: string } | null {
  if (!permittedActions(session).includes("create_delivery")) return null;
  const mine = session.entity_id;
  if (delivery.status === "Created" && delivery.address_from === mine) {
    return { action: "add_product", label: "add product" };
  }
  if (delivery.status === "Prepared" && delivery.address_from === mine) {
    return { action: "ship", label: "ship" };
  }
  if (delivery.status === "Shipped" && delivery.address_to === mine) {
    return { action: "receive", label: "receive" };
  }
  if (delivery.status === "Received" && delivery.address_to === mine) {
    return { action: "inbound", label: "post inbound" };
  }
  return null;
}

export function renderDeliveries(deliveries: DeliveryWire[], session: ViewSession): string {
  const rows = deliveries.map((delivery) => {
    const next = deliveryAction(delivery, session);
    const button = next
      ? `<button class="lifecycle" data-action="${next.action}" data-delivery="${escapeHtml(delivery.delivery_id)}">${next.label}</button>`
      : "";
    const items = delivery.items.map((i) => `${escapeHtml(i.product_id)}×${i.quantity}`).join(", ");
    return `
    <tr data-delivery="${escapeHtml(delivery.delivery_id)}">
      <td>${escapeHtml(delivery.delivery_id)}</td>
      <td>${escapeHtml(delivery.address_from)} → ${escapeHtml(delivery.address_to)}</td>
      <td>${items || "—"}</td>
      <td class="status">${escapeHtml(delivery.status)}</td>
      <td>${button}</td>
    </tr>`;
  });
  return `<table class="delivery-table">
    <thead><tr><th>delivery</th><th>route</th><th>items</th><th>status</th><th></th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

export function renderInventory(rows: { product_id: string; quantity: number }[]): string {
  if (!rows.length) return `<p class="empty">no stock on hand</p>`;
  const body = rows.map((r) =>
    `<tr><td>${escapeHtml(r.product_id)}</td><td>${r.quantity}</td></tr>`).join("");
  return `<table class="inventory-table">
    <thead><tr><th>product</th><th>quantity</th></tr></thead>
    <tbody>${body}</tbody>
  </table>`;
}

/** Chain explorer list; head hashes are shown byte-for-byte as the API returns them. */
export function renderChains(chains: ChainInfoWire[]): string {
  const rows = chains.map((chain) => `
    <tr data-chain="${escapeHtml(chain.key)}">
      <td>${escapeHtml(chain.key)}</td>
      <td>${escapeHtml(chain.chain_id.layer)}</td>
      <td>${escapeHtml(chain.chain_id.owner)}</td>
      <td>${chain.height}</td>
      <td><code class="digest">${escapeHtml(chain.head_hash)}</code></td>
    </tr>`);
  return `<table class="chain-table">
    <thead><tr><th>chain</th><th>layer</th><th>owner</th><th>height</th><th>head hash</th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

export function renderAnchors(anchors: AnchorWire[]): string {
  const rows = anchors.map((anchor) => `
    <tr>
      <td>${anchor.header.height}</td>
      <td><code class="digest">${escapeHtml(anchor.header.block_hash)}</code></td>
      <td>${escapeHtml(anchor.header.owner)}</td>
      <td><code class="digest">${escapeHtml(anchor.anchor_tx)}</code></td>
      <td>${timestamp(anchor.anchored_at)}</td>
    </tr>`);
  return `<table class="anchor-table">
    <thead><tr><th>height</th><th>block hash</th><th>owner</th><th>anchor tx</th><th>anchored</th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

export function renderCertificate(cert: { cert_id: string; patient: string; batch_key: string;
  dose_info: Record<string, unknown>; issued_at: number },
  verdict: { valid: boolean; reason: string | null } | null): string {
  const badge = verdict === null ? ""
    : verdict.valid
      ? `<span class="badge badge-ok">valid</span>`
      : `<span class="badge badge-bad">invalid: ${escapeHtml(verdict.reason ?? "")}</span>`;
  return `<div class="certificate" data-cert="${escapeHtml(cert.cert_id)}">
    <h3>Certificate ${escapeHtml(cert.cert_id)} ${badge}</h3>
    <dl>
      <dt>patient</dt><dd>${escapeHtml(cert.patient)}</dd>
      <dt>batch</dt><dd>${escapeHtml(cert.batch_key)}</dd>
      <dt>dose</dt><dd>${escapeHtml(JSON.stringify(cert.dose_info))}</dd>
      <dt>issued</dt><dd>${timestamp(cert.issued_at)}</dd>
    </dl>
  </div>`;
}

export function renderError(error: ApiErrorPayload): string {
  return `<div class="flash flash-error"><code>${escapeHtml(error.code)}</code> ${escapeHtml(error.message)}</div>`;
}
