/**
 * Scripted stakeholder session against a live service.
 *
 * Drives the dashboard's own API client and renderers end to end:
 * registers a manufacturer, runs a full delivery cycle, and renders a
 * verified 1-hop trace timeline; then checks a patient session renders no
 * Send-producing controls. Set MEDLEDGER_URL to a running service to
 * enable; skipped otherwise.
 */

import assert from "node:assert/strict";
import { test } from "node:test";

import { ApiRequestError, MedledgerApi } from "../src/api.js";
import { EMPTY_DATA, renderConsole } from "../src/consoles.js";
import { renderTraceError, renderTraceTimeline } from "../src/render.js";
import { makeSession, showsSendForms } from "../src/session.js";

const BASE_URL = process.env.MEDLEDGER_URL;
const skip = BASE_URL ? false : "MEDLEDGER_URL not set; start `medledger serve` and export it";

const runId = `${Date.now()}-${Math.floor(Math.random() * 1e6)}`;
const mfgEmail = `mfg-${runId}@dash.example`;
const distEmail = `dist-${runId}@dash.example`;
const patientEmail = `patient-${runId}@dash.example`;
const PASSWORD = "dash-secret-01";
const BATCH = { name: "DashVax", production_date: "2021-05-01", batch_number: `D-${runId}` };

test("scripted manufacturer session: register, deliver, render verified trace", { skip }, async () => {
  const mfg = new MedledgerApi(BASE_URL!);
  const dist = new MedledgerApi(BASE_URL!);

  const registered = await mfg.register("Dash Mfg", mfgEmail, "Manufacturer", PASSWORD);
  assert.equal(registered.confirmation, true);
  assert.ok(registered.chain_address, "manufacturer gets a local chain");
  await dist.register("Dash Dist", distEmail, "Distributor", PASSWORD);

  const mfgLogin = await mfg.login(mfgEmail, PASSWORD);
  const distLogin = await dist.login(distEmail, PASSWORD);
  const mfgSession = makeSession(mfgLogin);
  assert.equal(showsSendForms(mfgSession), true);

  const agreement = await mfg.proposeAgreement(
    [mfgLogin.entity_id, distLogin.entity_id],
    [{ data_class: "ShipmentTracking", permission: "Write" },
     { data_class: "ShipmentTracking", permission: "Read" }]);
  await mfg.signAgreement(agreement.agreement_id);
  const active = await dist.signAgreement(agreement.agreement_id);
  assert.equal(active.status, "active");

  const minted = await mfg.mint(BATCH.name, BATCH.production_date, BATCH.batch_number, 250);
  const delivery = await mfg.createDelivery(distEmail);
  await mfg.addProduct(delivery.delivery_id, minted.product.product_id, 75);
  const shipped = await mfg.ship(delivery.delivery_id);
  assert.equal(shipped.status, "Shipped");
  const received = await dist.receive(delivery.delivery_id);
  assert.equal(received.status, "Received");
  const done = await dist.postInbound(delivery.delivery_id);
  assert.equal(done.delivery.status, "Completed");

  const report = await mfg.trace(BATCH.name, BATCH.production_date, BATCH.batch_number);
  assert.equal(report.hops.length, 1);
  assert.equal(report.verified, true);
  const html = renderTraceTimeline(report);
  assert.equal((html.match(/badge-ok/g) ?? []).length, 1);
  assert.ok(!html.includes("badge-bad"));
  assert.ok(html.includes(delivery.delivery_id));

  // The console the manufacturer sees carries live server data.
  const console_ = renderConsole(mfgSession, {
    ...EMPTY_DATA,
    deliveries: (await mfg.deliveries()).deliveries,
    inventory: (await mfg.inventory()).inventory,
    chains: (await mfg.chains()).chains,
  });
  assert.ok(console_.includes(delivery.delivery_id));
  assert.ok(console_.includes('data-produces="Send"'));
});

test("scripted patient session: no send controls, denials rendered verbatim", { skip }, async () => {
  const patient = new MedledgerApi(BASE_URL!);
  await patient.register("Dash Patient", patientEmail, "Patient", PASSWORD);
  const login = await patient.login(patientEmail, PASSWORD);
  const session = makeSession(login);

  assert.equal(session.role_class, "Passive");
  assert.equal(showsSendForms(session), false);
  const html = renderConsole(session, {
    ...EMPTY_DATA, chains: (await patient.chains()).chains,
  });
  assert.ok(!html.includes('data-produces="Send"'), "no Send-producing controls");
  assert.ok(!html.includes('data-op="create_delivery"'));
  assert.ok(html.includes('data-op="trace_batch"'));

  // Without a GHA grant the server denies the trace; the UI shows that state.
  try {
    await patient.trace(BATCH.name, BATCH.production_date, BATCH.batch_number);
    assert.fail("server must deny an ungranted patient trace");
  } catch (error) {
    assert.ok(error instanceof ApiRequestError);
    assert.equal(error.code, "AccessDenied");
    const rendered = renderTraceError(error.payload);
    assert.ok(rendered.includes("state-denied"));
  }
});
