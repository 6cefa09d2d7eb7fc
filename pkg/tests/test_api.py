import pytest
from fastapi.testclient import TestClient

from medledger.api import create_app
from medledger.errors import AccessDenied, MedLedgerError


@pytest.fixture
def client(engine):
    return TestClient(create_app(engine))


def register(client, email, identity, name=None, password="p@ssw0rd1"):
    response = client.post("/register", json={
        "name": name or email.split("@")[0], "email": email,
        "identity": identity, "password": password})
    assert response.status_code == 200, response.text
    return response.json()


def login(client, email, password="p@ssw0rd1"):
    response = client.post("/login", json={"email": email, "password": password})
    assert response.status_code == 200, response.text
    token = response.json()["token"]
    return {"Authorization": f"Bearer {token}"}


@pytest.fixture
def trade(client):
    m = register(client, "m@api.ex", "Manufacturer")
    d = register(client, "d@api.ex", "Distributor")
    m_auth = login(client, "m@api.ex")
    d_auth = login(client, "d@api.ex")
    agreement = client.post("/acl/agreements", json={
        "parties": [m["entity_id"], d["entity_id"]],
        "scopes": [{"data_class": "ShipmentTracking", "permission": "Write"},
                   {"data_class": "ShipmentTracking", "permission": "Read"}]},
        headers=m_auth).json()
    for auth in (m_auth, d_auth):
        client.post(f"/acl/agreements/{agreement['agreement_id']}/sign", headers=auth)
    minted = client.post("/inventory/mint", json={
        "name": "CoviVax", "production_date": "2021-01-05",
        "batch_number": "B-100", "quantity": 500}, headers=m_auth).json()
    return {"m": m, "d": d, "m_auth": m_auth, "d_auth": d_auth,
            "product_id": minted["product"]["product_id"]}


def test_health_is_open(client):
    assert client.get("/health").json()["status"] == "ok"


def test_register_login_me_logout_flow(client):
    result = register(client, "p@api.ex", "Patient")
    assert result["confirmation"] is True and result["chain_address"] is None
    auth = login(client, "p@api.ex")
    me = client.get("/me", headers=auth).json()
    assert me["identity"] == "Patient"
    assert me["permitted_tx_kinds"] == ["Access", "Query"]
    assert client.post("/logout", headers=auth).status_code == 200
    replay = client.get("/me", headers=auth)
    assert replay.status_code == 401
    assert replay.json()["code"] == "InvalidSession"


def test_duplicate_registration_maps_to_409(client):
    register(client, "dup@api.ex", "Patient")
    response = client.post("/register", json={
        "name": "x", "email": "dup@api.ex", "identity": "Patient",
        "password": "p@ssw0rd1"})
    assert response.status_code == 409
    body = response.json()
    assert body["code"] == "AccountAlreadyExists"
    assert body["confirmation"] is False


def test_unauthenticated_mutation_is_401(client):
    response = client.post("/deliveries", json={"address_to": "x@y.z"})
    assert response.status_code == 401
    assert response.json()["code"] == "AuthRequired"


def test_delivery_without_agreement_is_403_access_denied(client):
    register(client, "m2@api.ex", "Manufacturer")
    register(client, "d2@api.ex", "Distributor")
    auth = login(client, "m2@api.ex")
    response = client.post("/deliveries", json={"address_to": "d2@api.ex"},
                           headers=auth)
    assert response.status_code == 403
    assert response.json()["code"] == "AccessDenied"


def test_delivery_reads_are_access_gated(trade, client, engine):
    delivery = client.post("/deliveries", json={"address_to": "d@api.ex"},
                           headers=trade["m_auth"]).json()
    register(client, "stranger@api.ex", "Warehouse")
    stranger = login(client, "stranger@api.ex")
    blocked = client.get(f"/deliveries/{delivery['delivery_id']}", headers=stranger)
    assert blocked.status_code == 403
    assert blocked.json()["code"] == "AccessDenied"
    allowed = client.get(f"/deliveries/{delivery['delivery_id']}",
                         headers=trade["d_auth"])
    assert allowed.status_code == 200


def test_full_delivery_cycle_over_http(trade, client, engine):
    delivery = client.post("/deliveries", json={"address_to": "d@api.ex"},
                           headers=trade["m_auth"]).json()
    did = delivery["delivery_id"]
    prepared = client.post(f"/deliveries/{did}/products", json={
        "product_id": trade["product_id"], "quantity": 200},
        headers=trade["m_auth"]).json()
    assert prepared["status"] == "Prepared"
    assert client.post(f"/deliveries/{did}/ship", json={},
                       headers=trade["m_auth"]).json()["status"] == "Shipped"
    wrong_actor = client.post(f"/deliveries/{did}/receive", json={},
                              headers=trade["m_auth"])
    assert wrong_actor.status_code == 403
    assert wrong_actor.json()["code"] == "WrongActor"
    assert client.post(f"/deliveries/{did}/receive", json={},
                       headers=trade["d_auth"]).json()["status"] == "Received"
    result = client.post("/inventory/inbound", json={"delivery_id": did},
                         headers=trade["d_auth"]).json()
    assert result["delivery"]["status"] == "Completed"
    inventory = client.get("/inventory", headers=trade["d_auth"]).json()
    assert inventory["inventory"] == [{"product_id": trade["product_id"],
                                       "quantity": 200}]
    mine = client.get("/deliveries", headers=trade["d_auth"]).json()["deliveries"]
    assert [d["delivery_id"] for d in mine] == [did]


def test_trace_over_http(trade, client):
    delivery = client.post("/deliveries", json={"address_to": "d@api.ex"},
                           headers=trade["m_auth"]).json()
    did = delivery["delivery_id"]
    client.post(f"/deliveries/{did}/products",
                json={"product_id": trade["product_id"], "quantity": 10},
                headers=trade["m_auth"])
    client.post(f"/deliveries/{did}/ship", json={}, headers=trade["m_auth"])
    params = {"name": "CoviVax", "production_date": "2021-01-05",
              "batch_number": "B-100"}
    report = client.get("/trace", params=params, headers=trade["m_auth"]).json()
    assert report["verified"] is True
    assert [h["delivery_id"] for h in report["hops"]] == [did]
    missing = client.get("/trace", params={**params, "name": "Nope"},
                         headers=trade["m_auth"])
    assert missing.status_code == 404
    assert missing.json()["code"] == "ItemNotFound"


def test_chain_explorer_counts_chains(client):
    for i, identity in enumerate(["Manufacturer", "Distributor", "Warehouse",
                                  "Supplier"]):
        register(client, f"x{i}@api.ex", identity)
    chains = client.get("/chains").json()["chains"]
    # GHA + 4 actives = 5 local chains, plus the global chain.
    assert len(chains) == 6
    layers = [c["chain_id"]["layer"] for c in chains]
    assert layers.count("Global") == 1 and layers.count("Local") == 5
    key = next(c["key"] for c in chains if c["chain_id"]["layer"] == "Local")
    blocks = client.get(f"/chains/{key}/blocks").json()["blocks"]
    assert blocks and blocks[0]["height"] == 0
    anchors = client.get(f"/chains/{key}/anchors").json()["anchors"]
    assert len(anchors) == len(blocks)


def test_idempotency_key_replays_original_result(trade, client, engine):
    headers = {**trade["m_auth"], "Idempotency-Key": "create-1"}
    first = client.post("/deliveries", json={"address_to": "d@api.ex"},
                        headers=headers)
    second = client.post("/deliveries", json={"address_to": "d@api.ex"},
                         headers=headers)
    assert first.content == second.content
    assert len(engine.supply.deliveries) == 1
    third = client.post("/deliveries", json={"address_to": "d@api.ex"},
                        headers={**trade["m_auth"], "Idempotency-Key": "create-2"})
    assert third.json()["delivery_id"] != first.json()["delivery_id"]


def test_certificates_over_http(trade, client):
    register(client, "pat@api.ex", "Patient")
    gha_auth = login(client, "gha@medledger.local", "gha-bootstrap-secret")
    cert = client.post("/certificates", json={
        "patient": "pat@api.ex", "product_id": trade["product_id"],
        "dose_info": {"dose": 1}}, headers=gha_auth).json()
    verdict = client.get(f"/certificates/{cert['cert_id']}/verify").json()
    assert verdict == {"valid": True, "reason": None}
    forbidden = client.post("/certificates", json={
        "patient": "pat@api.ex", "product_id": trade["product_id"],
        "dose_info": {"dose": 1}}, headers=trade["m_auth"])
    assert forbidden.status_code == 403
    assert forbidden.json()["code"] == "NotGHA"


def test_acl_endpoints(trade, client):
    gha_auth = login(client, "gha@medledger.local", "gha-bootstrap-secret")
    register(client, "pat2@api.ex", "Patient")
    grant = client.post("/acl/grants", json={
        "grantee": "pat2@api.ex", "chain_key": "global",
        "data_class": "ShipmentTracking", "permission": "Read"},
        headers=gha_auth).json()
    assert grant["status"] == "Granted"
    listed = client.get("/acl/grants", headers=gha_auth).json()["grants"]
    assert any(g["entry_id"] == grant["entry_id"] for g in listed)
    revoked = client.post(f"/acl/grants/{grant['entry_id']}/revoke",
                          headers=gha_auth).json()
    assert revoked["status"] == "Revoked"
    again = client.post(f"/acl/grants/{grant['entry_id']}/revoke", headers=gha_auth)
    assert again.status_code == 409
    assert again.json()["code"] == "AlreadyRevoked"
    agreements = client.get("/acl/agreements", headers=trade["m_auth"]).json()
    assert len(agreements["agreements"]) == 1


def test_api_decisions_match_direct_engine_calls(trade, client, engine):
    """Differential check: the HTTP layer performs no authorization of its own."""
    register(client, "w@api.ex", "Warehouse")
    w_auth = login(client, "w@api.ex")
    w_id = engine.registry.by_email("w@api.ex").entity_id

    http_response = client.post("/deliveries", json={"address_to": "d@api.ex"},
                                headers=w_auth)
    try:
        engine.create_delivery(w_id, trade["d"]["entity_id"])
        engine_outcome = None
    except MedLedgerError as exc:
        engine_outcome = exc
    assert isinstance(engine_outcome, AccessDenied)
    assert http_response.status_code == engine_outcome.http_status
    assert http_response.json()["code"] == engine_outcome.code

    params = {"name": "CoviVax", "production_date": "2021-01-05",
              "batch_number": "B-100"}
    http_trace = client.get("/trace", params=params, headers=w_auth)
    try:
        engine.trace(w_id, "CoviVax", "2021-01-05", "B-100", strict=False)
        trace_outcome = None
    except MedLedgerError as exc:
        trace_outcome = exc
    assert trace_outcome is not None
    assert http_trace.status_code == trace_outcome.http_status
    assert http_trace.json()["code"] == trace_outcome.code


def test_validation_endpoint(trade, client, engine):
    header = engine.header_of(trade["m"]["entity_id"], 0).to_wire()
    result = client.post("/validate", json={
        "target_chain": "global", "claimed_header": header},
        headers=trade["d_auth"]).json()
    assert result["ok"] is True
    header["block_hash"] = "00" * 32
    result = client.post("/validate", json={
        "target_chain": "global", "claimed_header": header},
        headers=trade["d_auth"]).json()
    assert result == {"ok": False, "reason": "HeaderMismatch", "token": None}


def test_admin_consistency(trade, client):
    report = client.get("/admin/consistency", headers=trade["m_auth"]).json()
    assert report["store"]["ok"] is True
    assert all(chain["ok"] for chain in report["chains"].values())
