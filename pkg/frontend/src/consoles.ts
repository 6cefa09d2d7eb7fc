/**
 * Role-aware console composition.
 *
 * Each form is tagged with the transaction kind it would produce
 * (data-produces="Query|Access|Send"), derived from the same action table
 * the gating uses, so tests can assert mechanically that a Passive session
 * renders no Send-producing controls.
 */

import type { AclEntryWire, AgreementWire, ChainInfoWire, DeliveryWire } from "./api.js";
import { ACTION_TX_KIND, DashboardAction, PanelId, ViewSession, panelsFor, permittedActions } from "./session.js";
import {
  escapeHtml,
  renderAclTable,
  renderAgreements,
  renderChains,
  renderDeliveries,
  renderInventory,
} from "./render.js";

export interface ConsoleData {
  deliveries: DeliveryWire[];
  inventory: { product_id: string; quantity: number }[];
  grants: AclEntryWire[];
  agreements: AgreementWire[];
  chains: ChainInfoWire[];
}

export const EMPTY_DATA: ConsoleData = {
  deliveries: [], inventory: [], grants: [], agreements: [], chains: [],
};

function form(action: DashboardAction, legend: string, fields: string): string {
  const produces = ACTION_TX_KIND[action];
  return `<form class="op-form" data-op="${action}" data-produces="${produces}">
    <fieldset><legend>${escapeHtml(legend)}</legend>${fields}
    <button type="submit">${escapeHtml(legend)}</button></fieldset>
  </form>`;
}

const FORM_TEMPLATES: Partial<Record<DashboardAction, () => string>> = {
  create_delivery: () => form("create_delivery", "create delivery",
    `<input name="address_to" placeholder="receiver email or id" required>`),
  add_product: () => form("add_product", "add product",
    `<input name="delivery_id" placeholder="delivery id" required>
     <input name="product_id" placeholder="product id" required>
     <input name="quantity" type="number" min="1" value="1" required>`),
  mint_stock: () => form("mint_stock", "mint stock",
    `<input name="name" placeholder="product name" required>
     <input name="production_date" placeholder="YYYY-MM-DD" required>
     <input name="batch_number" placeholder="batch number" required>
     <input name="quantity" type="number" min="1" value="100" required>`),
  propose_agreement: () => form("propose_agreement", "propose agreement",
    `<input name="parties" placeholder="party ids/emails, comma-separated" required>
     <input name="scopes" value="ShipmentTracking:Write,ShipmentTracking:Read" required>`),
  grant_access: () => form("grant_access", "grant access",
    `<input name="grantee" placeholder="grantee email or id" required>
     <input name="chain_key" placeholder="chain key or 'global'" required>
     <select name="data_class">
       <option>ShipmentTracking</option><option>OrderPlacement</option>
       <option>Inventory</option><option>Certificates</option><option>All</option>
     </select>
     <select name="permission"><option>Read</option><option>Write</option></select>`),
  issue_certificate: () => form("issue_certificate", "issue certificate",
    `<input name="patient" placeholder="patient email or id" required>
     <input name="product_id" placeholder="product id" required>
     <input name="dose" type="number" min="1" value="1" required>`),
  trace_batch: () => form("trace_batch", "trace batch",
    `<input name="name" placeholder="product name" required>
     <input name="production_date" placeholder="YYYY-MM-DD" required>
     <input name="batch_number" placeholder="batch number" required>`),
  view_certificate: () => form("view_certificate", "verify certificate",
    `<input name="cert_id" placeholder="certificate id" required>`),
};

function panelForms(panel: PanelId, actions: Set<DashboardAction>): string {
  const order: Record<PanelId, DashboardAction[]> = {
    deliveries: ["create_delivery", "add_product"],
    inventory: ["mint_stock"],
    acl: ["propose_agreement", "grant_access"],
    certificates: ["issue_certificate", "view_certificate"],
    trace: ["trace_batch"],
    explorer: [],
  };
  return order[panel]
    .filter((action) => actions.has(action))
    .map((action) => FORM_TEMPLATES[action]?.() ?? "")
    .join("");
}

const PANEL_TITLES: Record<PanelId, string> = {
  deliveries: "Deliveries",
  inventory: "Inventory",
  acl: "Access control",
  certificates: "Certificates",
  trace: "Batch trace",
  explorer: "Chain explorer",
};

function panelBody(panel: PanelId, session: ViewSession, data: ConsoleData): string {
  switch (panel) {
    case "deliveries":
      return renderDeliveries(data.deliveries, session);
    case "inventory":
      return renderInventory(data.inventory);
    case "acl":
      return renderAgreements(data.agreements, session)
        + renderAclTable(data.grants, session);
    case "certificates":
      return `<div class="certificate-slot"></div>`;
    case "trace":
      return `<div class="trace-slot"></div>`;
    case "explorer":
      return renderChains(data.chains) + `<div class="anchor-slot"></div>`;
  }
}

/** The whole role-aware console for one session. */
export function renderConsole(session: ViewSession, data: ConsoleData): string {
  const actions = new Set(permittedActions(session));
  const panels = panelsFor(session).map((panel) => `
    <section class="panel panel-${panel}" id="panel-${panel}">
      <h2>${PANEL_TITLES[panel]}</h2>
      ${panelForms(panel, actions)}
      ${panelBody(panel, session, data)}
    </section>`);
  return `
  <header class="whoami">
    <strong>${escapeHtml(session.identity)}</strong>
    <span>${escapeHtml(session.entity_id)}</span>
    <span class="role role-${session.role_class.toLowerCase()}">${session.role_class}</span>
    <button id="logout">log out</button>
  </header>
  <main class="console">${panels.join("")}</main>`;
}
