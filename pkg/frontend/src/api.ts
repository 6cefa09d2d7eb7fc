/**
 * Typed client for the medledger JSON API.
 *
 * Every error the server returns carries a stable machine code; the client
 * surfaces it verbatim through ApiRequestError so the UI can render the
 * server's decision rather than making its own.
 */

export interface ApiErrorPayload {
  code: string;
  message: string;
  [extra: string]: unknown;
}

export class ApiRequestError extends Error {
  constructor(readonly status: number, readonly payload: ApiErrorPayload) {
    super(`${payload.code}: ${payload.message}`);
    this.name = "ApiRequestError";
  }

  get code(): string {
    return this.payload.code;
  }
}

export interface LoginResult {
  token: string;
  entity_id: string;
  identity: string;
  role_class: "Active" | "Passive";
  permitted_tx_kinds: string[];
}

export interface EntityInfo extends LoginResult {
  name: string;
  email: string;
  chain_address: { layer: string; owner: string; label: string } | null;
}

export interface DeliveryWire {
  delivery_id: string;
  address_from: string;
  address_to: string;
  items: { product_id: string; quantity: number }[];
  status: string;
  created_at: number | null;
  prepared_at: number | null;
  shipped_at: number | null;
  received_at: number | null;
  completed_at: number | null;
}

export interface TraceHopWire {
  delivery_id: string;
  address_from: string;
  address_to: string;
  shipped_at: number | null;
  received_at: number | null;
  status: string;
  verified: boolean;
  failure: string | null;
  proof: { record_id: string; block: unknown; header: unknown }[];
}

export interface TraceReportWire {
  batch_key: string;
  hops: TraceHopWire[];
  verified: boolean;
  confirmation: boolean;
}

export interface AclEntryWire {
  entry_id: string;
  grantee: string;
  resource: { chain_id: { layer: string; owner: string; label: string }; data_class: string };
  permission: string;
  granted_by: string;
  agreement_id: string | null;
  status: "Granted" | "Revoked";
  granted_at: number;
  revoked_at: number | null;
}

export interface AgreementWire {
  agreement_id: string;
  parties: string[];
  scopes: { data_class: string; permission: string }[];
  proposed_by: string;
  signatures: Record<string, number>;
  effective_at: number | null;
  status: "pending" | "active";
}

export interface ChainInfoWire {
  chain_id: { layer: string; owner: string; label: string };
  key: string;
  height: number;
  head_hash: string;
}

export interface AnchorWire {
  header: { chain_id: unknown; height: number; block_hash: string; owner: string; timestamp: number };
  anchored_at: number;
  anchor_tx: string;
}

export class MedledgerApi {
  token: string | null = null;

  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiRequestError(response.status, payload as ApiErrorPayload);
    }
    return payload as T;
  }

  register(name: string, email: string, identity: string, password: string) {
    return this.request<{ entity_id: string; chain_address: unknown; confirmation: boolean }>(
      "POST", "/register", { name, email, identity, password });
  }

  async login(email: string, password: string): Promise<LoginResult> {
    const result = await this.request<LoginResult>("POST", "/login", { email, password });
    this.token = result.token;
    return result;
  }

  async logout(): Promise<void> {
    await this.request("POST", "/logout");
    this.token = null;
  }

  me() {
    return this.request<EntityInfo>("GET", "/me");
  }

  createDelivery(addressTo: string) {
    return this.request<DeliveryWire>("POST", "/deliveries", { address_to: addressTo });
  }

  addProduct(deliveryId: string, productId: string, quantity: number) {
    return this.request<DeliveryWire>("POST", `/deliveries/${deliveryId}/products`,
      { product_id: productId, quantity });
  }

  ship(deliveryId: string) {
    return this.request<DeliveryWire>("POST", `/deliveries/${deliveryId}/ship`, {});
  }

  receive(deliveryId: string) {
    return this.request<DeliveryWire>("POST", `/deliveries/${deliveryId}/receive`, {});
  }

  postInbound(deliveryId: string) {
    return this.request<{ delivery: DeliveryWire; inventory: unknown[] }>(
      "POST", "/inventory/inbound", { delivery_id: deliveryId });
  }

  mint(name: string, productionDate: string, batchNumber: string, quantity: number) {
    return this.request<{ product: { product_id: string }; stock: number }>(
      "POST", "/inventory/mint",
      { name, production_date: productionDate, batch_number: batchNumber, quantity });
  }

  inventory() {
    return this.request<{ owner: string; inventory: { product_id: string; quantity: number }[] }>(
      "GET", "/inventory");
  }

  deliveries() {
    return this.request<{ deliveries: DeliveryWire[] }>("GET", "/deliveries");
  }

  trace(name: string, productionDate: string, batchNumber: string): Promise<TraceReportWire> {
    const params = new URLSearchParams({
      name, production_date: productionDate, batch_number: batchNumber,
    });
    return this.request<TraceReportWire>("GET", `/trace?${params}`);
  }

  proposeAgreement(parties: string[], scopes: { data_class: string; permission: string }[]) {
    return this.request<AgreementWire>("POST", "/acl/agreements", { parties, scopes });
  }

  signAgreement(agreementId: string) {
    return this.request<AgreementWire>("POST", `/acl/agreements/${agreementId}/sign`);
  }

  agreements() {
    return this.request<{ agreements: AgreementWire[] }>("GET", "/acl/agreements");
  }

  grant(grantee: string, chainKey: string, dataClass: string, permission: string) {
    return this.request<AclEntryWire>("POST", "/acl/grants",
      { grantee, chain_key: chainKey, data_class: dataClass, permission });
  }

  revoke(entryId: string) {
    return this.request<AclEntryWire>("POST", `/acl/grants/${entryId}/revoke`);
  }

  grants() {
    return this.request<{ grants: AclEntryWire[] }>("GET", "/acl/grants");
  }

  issueCertificate(patient: string, productId: string, doseInfo: Record<string, unknown>) {
    return this.request<{ cert_id: string }>("POST", "/certificates",
      { patient, product_id: productId, dose_info: doseInfo });
  }

  verifyCertificate(certId: string) {
    return this.request<{ valid: boolean; reason: string | null }>(
      "GET", `/certificates/${certId}/verify`);
  }

  chains() {
    return this.request<{ chains: ChainInfoWire[] }>("GET", "/chains");
  }

  blocks(chainKey: string) {
    return this.request<{ blocks: { height: number; block_hash: string }[] }>(
      "GET", `/chains/${chainKey}/blocks`);
  }

  anchors(chainKey: string) {
    return this.request<{ anchors: AnchorWire[] }>("GET", `/chains/${chainKey}/anchors`);
  }
}
