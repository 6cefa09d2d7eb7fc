/**
 * View-session model and role gating.
 *
 * The set of rendered actions is derived *exactly* from the transaction
 * kinds the server says the entity may write (plus identity-specific
 * narrowing for GHA/manufacturer consoles). A Passive session therefore
 * never sees a Send-producing form. This gating is cosmetic only: the
 * server re-checks every call, and denials are rendered verbatim.
 */

import type { LoginResult } from "./api.js";

export type TxKind = "Query" | "Access" | "Send";

export interface ViewSession {
  token: string;
  entity_id: string;
  identity: string;
  role_class: "Active" | "Passive";
  permitted_tx_kinds: string[];
}

export type DashboardAction =
  | "create_delivery"
  | "add_product"
  | "ship_delivery"
  | "receive_delivery"
  | "post_inbound"
  | "mint_stock"
  | "propose_agreement"
  | "sign_agreement"
  | "grant_access"
  | "revoke_access"
  | "issue_certificate"
  | "trace_batch"
  | "view_certificate"
  | "explore_chains";

/** The transaction kind each dashboard action produces on the ledgers. */
export const ACTION_TX_KIND: Record<DashboardAction, TxKind> = {
  create_delivery: "Send",
  add_product: "Send",
  ship_delivery: "Send",
  receive_delivery: "Send",
  post_inbound: "Send",
  mint_stock: "Access",
  propose_agreement: "Send",
  sign_agreement: "Send",
  grant_access: "Access",
  revoke_access: "Access",
  issue_certificate: "Access",
  trace_batch: "Query",
  view_certificate: "Query",
  explore_chains: "Query",
};

/** Identity-specific narrowing on top of the tx-kind gate. */
const IDENTITY_ONLY: Partial<Record<DashboardAction, (identity: string) => boolean>> = {
  mint_stock: (identity) => identity === "Manufacturer",
  issue_certificate: (identity) => identity === "GHA",
  grant_access: (identity) => identity !== "Patient" && identity !== "Hospital"
    && identity !== "Clinic",
  revoke_access: (identity) => identity !== "Patient" && identity !== "Hospital"
    && identity !== "Clinic",
};

export function makeSession(login: LoginResult): ViewSession {
  return {
    token: login.token,
    entity_id: login.entity_id,
    identity: login.identity,
    role_class: login.role_class,
    permitted_tx_kinds: login.permitted_tx_kinds,
  };
}

export function permittedActions(session: ViewSession): DashboardAction[] {
  const actions: DashboardAction[] = [];
  for (const action of Object.keys(ACTION_TX_KIND) as DashboardAction[]) {
    if (!session.permitted_tx_kinds.includes(ACTION_TX_KIND[action])) continue;
    const narrow = IDENTITY_ONLY[action];
    if (narrow && !narrow(session.identity)) continue;
    actions.push(action);
  }
  return actions;
}

/** True when any rendered form would produce a Send transaction. */
export function showsSendForms(session: ViewSession): boolean {
  return permittedActions(session).some((a) => ACTION_TX_KIND[a] === "Send");
}

export type PanelId =
  | "deliveries"
  | "inventory"
  | "acl"
  | "certificates"
  | "trace"
  | "explorer";

/** Which console panels a session renders, in display order. */
export function panelsFor(session: ViewSession): PanelId[] {
  const panels: PanelId[] = [];
  const actions = new Set(permittedActions(session));
  if (actions.has("create_delivery")) {
    panels.push("deliveries", "inventory");
  }
  if (actions.has("grant_access") || actions.has("propose_agreement")) {
    panels.push("acl");
  }
  panels.push("certificates", "trace", "explorer");
  return panels;
}
