/**
 * Browser bootstrap: login screen, console mounting, polling refresh.
 *
 * The server is the source of truth; this file only wires DOM events to
 * API calls and re-renders from fresh server state. API errors are shown
 * verbatim (machine code + message) and never translated into local
 * decisions.
 */

import { ApiRequestError, MedledgerApi, TraceReportWire } from "./api.js";
import { ConsoleData, EMPTY_DATA, renderConsole } from "./consoles.js";
import {
  renderAnchors,
  renderCertificate,
  renderError,
  renderTraceError,
  renderTraceTimeline,
} from "./render.js";
import { ViewSession, makeSession, permittedActions } from "./session.js";

const POLL_MS = Number(localStorage.getItem("medledger_poll_ms") ?? 4000);
const BASE_URL = localStorage.getItem("medledger_api") ?? "http://127.0.0.1:8440";

const api = new MedledgerApi(BASE_URL);
let session: ViewSession | null = null;
let pollTimer: number | undefined;

function root(): HTMLElement {
  return document.getElementById("app")!;
}

function flash(html: string): void {
  const slot = document.getElementById("flash");
  if (slot) {
    slot.innerHTML = html;
    setTimeout(() => { slot.innerHTML = ""; }, 6000);
  }
}

function showError(error: unknown): void {
  if (error instanceof ApiRequestError) {
    flash(renderError(error.payload));
  } else {
    flash(renderError({ code: "NetworkError", message: String(error) }));
  }
}

function renderLogin(): void {
  root().innerHTML = `
  <div class="login-screen">
    <h1>medledger</h1>
    <p class="api-target">service: <code>${BASE_URL}</code></p>
    <div id="flash"></div>
    <form id="login-form">
      <fieldset><legend>log in</legend>
        <input name="email" placeholder="email" required>
        <input name="password" type="password" placeholder="password" required>
        <button type="submit">log in</button>
      </fieldset>
    </form>
    <form id="register-form">
      <fieldset><legend>register</legend>
        <input name="name" placeholder="name" required>
        <input name="email" placeholder="email" required>
        <select name="identity">
          <option>Manufacturer</option><option>Distributor</option>
          <option>Warehouse</option><option>Supplier</option>
          <option>Hospital</option><option>Clinic</option><option>Patient</option>
        </select>
        <input name="password" type="password" placeholder="password (min 8)" required>
        <button type="submit">register</button>
      </fieldset>
    </form>
  </div>`;

  document.getElementById("login-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const fields = new FormData(event.target as HTMLFormElement);
    try {
      const result = await api.login(String(fields.get("email")), String(fields.get("password")));
      session = makeSession(result);
      await renderDashboard();
    } catch (error) {
      showError(error);
    }
  });

  document.getElementById("register-form")!.addEventListener("submit", async (event) => {
    event.preventDefault();
    const fields = new FormData(event.target as HTMLFormElement);
    try {
      await api.register(String(fields.get("name")), String(fields.get("email")),
        String(fields.get("identity")), String(fields.get("password")));
      flash(`<div class="flash flash-ok">registered; you can log in now</div>`);
    } catch (error) {
      showError(error);
    }
  });
}

async function fetchConsoleData(current: ViewSession): Promise<ConsoleData> {
  const data: ConsoleData = { ...EMPTY_DATA };
  const actions = new Set(permittedActions(current));
  data.chains = (await api.chains()).chains;
  if (actions.has("create_delivery")) {
    data.deliveries = (await api.deliveries()).deliveries;
    data.inventory = (await api.inventory()).inventory;
  }
  if (actions.has("grant_access") || actions.has("propose_agreement")) {
    data.grants = (await api.grants()).grants;
    data.agreements = (await api.agreements()).agreements;
  }
  return data;
}

async function renderDashboard(): Promise<void> {
  if (!session) return renderLogin();
  const data = await fetchConsoleData(session);
  root().innerHTML = `<div id="flash"></div>` + renderConsole(session, data);
  wireConsole();
  if (pollTimer !== undefined) clearInterval(pollTimer);
  pollTimer = setInterval(refresh, POLL_MS) as unknown as number;
}

/** Polling refresh: tables re-render from fresh server state in place. */
async function refresh(): Promise<void> {
  if (!session) return;
  try {
    const data = await fetchConsoleData(session);
    const console_ = document.querySelector(".console");
    if (!console_) return;
    const replacement = document.createElement("div");
    replacement.innerHTML = renderConsole(session, data);
    for (const panel of ["deliveries", "inventory", "acl", "explorer"]) {
      const fresh = replacement.querySelector(`#panel-${panel}`);
      const current = document.getElementById(`panel-${panel}`);
      if (fresh && current) current.replaceWith(fresh);
    }
  } catch {
    // transient polling errors are ignored; the next tick retries
  }
}

async function runOperation(op: string, fields: FormData): Promise<void> {
  switch (op) {
    case "create_delivery":
      await api.createDelivery(String(fields.get("address_to")));
      break;
    case "add_product":
      await api.addProduct(String(fields.get("delivery_id")),
        String(fields.get("product_id")), Number(fields.get("quantity")));
      break;
    case "mint_stock":
      await api.mint(String(fields.get("name")), String(fields.get("production_date")),
        String(fields.get("batch_number")), Number(fields.get("quantity")));
      break;
    case "propose_agreement": {
      const parties = String(fields.get("parties")).split(",").map((s) => s.trim());
      const scopes = String(fields.get("scopes")).split(",").map((pair) => {
        const [data_class, permission] = pair.trim().split(":");
        return { data_class, permission };
      });
      await api.proposeAgreement(parties, scopes);
      break;
    }
    case "grant_access":
      await api.grant(String(fields.get("grantee")), String(fields.get("chain_key")),
        String(fields.get("data_class")), String(fields.get("permission")));
      break;
    case "issue_certificate":
      await api.issueCertificate(String(fields.get("patient")),
        String(fields.get("product_id")), { dose: Number(fields.get("dose")) });
      break;
    case "trace_batch": {
      let html: string;
      try {
        const report: TraceReportWire = await api.trace(
          String(fields.get("name")), String(fields.get("production_date")),
          String(fields.get("batch_number")));
        html = renderTraceTimeline(report);
      } catch (error) {
        if (error instanceof ApiRequestError) {
          html = renderTraceError(error.payload);
        } else {
          throw error;
        }
      }
      document.querySelector(".trace-slot")!.innerHTML = html;
      return;
    }
    case "view_certificate": {
      const certId = String(fields.get("cert_id"));
      const verdict = await api.verifyCertificate(certId);
      document.querySelector(".certificate-slot")!.innerHTML = renderCertificate(
        { cert_id: certId, patient: "—", batch_key: "—", dose_info: {}, issued_at: 0 },
        verdict);
      return;
    }
    default:
      throw new Error(`unknown operation: ${op}`);
  }
  await refresh();
}

function wireConsole(): void {
  document.getElementById("logout")?.addEventListener("click", async () => {
    try {
      await api.logout();
    } finally {
      session = null;
      if (pollTimer !== undefined) clearInterval(pollTimer);
      renderLogin();
    }
  });

  root().addEventListener("submit", async (event) => {
    const form = event.target as HTMLFormElement;
    if (!form.dataset.op) return;
    event.preventDefault();
    try {
      await runOperation(form.dataset.op, new FormData(form));
    } catch (error) {
      showError(error);
    }
  });

  root().addEventListener("click", async (event) => {
    const target = event.target as HTMLElement;
    try {
      if (target.matches("button.lifecycle")) {
        const id = target.dataset.delivery!;
        if (target.dataset.action === "ship") await api.ship(id);
        else if (target.dataset.action === "receive") await api.receive(id);
        else if (target.dataset.action === "inbound") await api.postInbound(id);
        else return;
        await refresh();
      } else if (target.matches("button.revoke")) {
        await api.revoke(target.dataset.entry!);
        await refresh();
      } else if (target.matches("button.sign")) {
        await api.signAgreement(target.dataset.agreement!);
        await refresh();
      } else if (target.closest("tr[data-chain]")) {
        const key = (target.closest("tr[data-chain]") as HTMLElement).dataset.chain!;
        const anchors = (await api.anchors(key)).anchors;
        document.querySelector(".anchor-slot")!.innerHTML =
          `<h3>anchors of ${key}</h3>` + renderAnchors(anchors);
      }
    } catch (error) {
      showError(error);
    }
  });
}

renderLogin();
