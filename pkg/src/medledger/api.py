"""HTTP/JSON facade over the engine.

The API layer adds no authorization decisions of its own: it resolves the
bearer session to an entity and passes that identity into the engine, so
every Allow/Deny outcome is identical to a direct engine call. Mutating
endpoints honor a client-supplied ``Idempotency-Key`` header; a replay
returns the originally produced response bytes.

JSON fields are snake_case and timestamps are integer milliseconds. The
endpoint and error-code tables live in docs/API.md.
"""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .engine import SupplyChainEngine
from .errors import AuthRequired, MedLedgerError, UnknownEntity
from .registry import EntityRecord


class RegisterRequest(BaseModel):
    name: str
    email: str
    identity: str
    password: str


class LoginRequest(BaseModel):
    email: str
    password: str


class DeliveryRequest(BaseModel):
    address_to: str


class AddProductRequest(BaseModel):
    product_id: str
    quantity: int
    producer: Optional[str] = None


class ShipRequest(BaseModel):
    at: Optional[int] = None


class InboundRequest(BaseModel):
    delivery_id: str


class MintRequest(BaseModel):
    name: str
    production_date: str
    batch_number: str
    quantity: int


class AgreementRequest(BaseModel):
    parties: list[str]
    scopes: list[dict]


class GrantRequest(BaseModel):
    grantee: str
    chain_key: str
    data_class: str
    permission: str


class CertificateRequest(BaseModel):
    patient: str
    product_id: str
    dose_info: dict


class ValidateRequest(BaseModel):
    target_chain: str
    claimed_header: dict
    data_class: str = "All"
    permission: str = "Read"


def _entity_ref(engine: SupplyChainEngine, ref: str) -> str:
    """Accept either an entity id or a registered email."""
    if "@" in ref:
        record = engine.registry.by_email(ref)
        if record is None:
            raise UnknownEntity(f"no entity registered as {ref}")
        return record.entity_id
    return ref


def create_app(engine: SupplyChainEngine) -> FastAPI:
    app = FastAPI(title="medledger", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.idempotency: dict[tuple, tuple] = {}

    from starlette.middleware.cors import CORSMiddleware
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(MedLedgerError)
    async def handle_engine_error(request: Request, exc: MedLedgerError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_wire())

    @app.middleware("http")
    async def idempotency_replay(request: Request, call_next):
        key = request.headers.get("idempotency-key")
        if key is None or request.method not in ("POST", "PUT", "DELETE"):
            return await call_next(request)
        cache_key = (request.method, request.url.path, key)
        cached = app.state.idempotency.get(cache_key)
        if cached is not None:
            status, body, media_type = cached
            return Response(content=body, status_code=status, media_type=media_type)
        response = await call_next(request)
        body = b""
        async for chunk in response.body_iterator:
            body += chunk
        app.state.idempotency[cache_key] = (response.status_code, body, response.media_type)
        return Response(content=body, status_code=response.status_code,
                        media_type=response.media_type)

    def current_entity(request: Request) -> EntityRecord:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            raise AuthRequired("missing bearer token")
        token = auth[7:].strip()
        record = engine.resolve_session(token)
        request.state.token = token
        return record

    # -- sessions -----------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok", "global_head": engine.head_hash()}

    @app.post("/register")
    def register(body: RegisterRequest):
        return engine.register_account(body.name, body.email, body.identity, body.password)

    @app.post("/login")
    def login(body: LoginRequest):
        return engine.authenticate(body.email, body.password)

    @app.post("/logout")
    def logout(request: Request, entity: EntityRecord = Depends(current_entity)):
        engine.logout(request.state.token)
        return {"ok": True}

    @app.get("/me")
    def me(entity: EntityRecord = Depends(current_entity)):
        wire = entity.to_wire()
        wire.update(engine.classify(entity.entity_id))
        return wire

    # -- deliveries ----------------------------------------------------------

    @app.post("/deliveries")
    def create_delivery(body: DeliveryRequest,
                        entity: EntityRecord = Depends(current_entity)):
        receiver = _entity_ref(engine, body.address_to)
        return engine.create_delivery(entity.entity_id, receiver)

    @app.post("/deliveries/{delivery_id}/products")
    def add_product(delivery_id: str, body: AddProductRequest,
                    entity: EntityRecord = Depends(current_entity)):
        return engine.add_product(entity.entity_id, delivery_id, body.product_id,
                                  body.quantity, body.producer)

    @app.post("/deliveries/{delivery_id}/ship")
    def ship(delivery_id: str, body: ShipRequest = None,
             entity: EntityRecord = Depends(current_entity)):
        at = body.at if body is not None else None
        return engine.ship_delivery(entity.entity_id, delivery_id, at)

    @app.post("/deliveries/{delivery_id}/receive")
    def receive(delivery_id: str, body: ShipRequest = None,
                entity: EntityRecord = Depends(current_entity)):
        at = body.at if body is not None else None
        return engine.receive_delivery(entity.entity_id, delivery_id, at)

    @app.get("/deliveries")
    def list_deliveries(entity: EntityRecord = Depends(current_entity)):
        mine = [d.to_wire() for d in engine.supply.deliveries.values()
                if entity.entity_id in (d.address_from, d.address_to)]
        return {"deliveries": mine}

    @app.get("/deliveries/{delivery_id}")
    def get_delivery(delivery_id: str, entity: EntityRecord = Depends(current_entity)):
        return engine.get_delivery(entity.entity_id, delivery_id)

    # -- inventory ------------------------------------------------------------

    @app.post("/inventory/inbound")
    def inbound(body: InboundRequest, entity: EntityRecord = Depends(current_entity)):
        return engine.post_inbound_inventory(entity.entity_id, body.delivery_id)

    @app.post("/inventory/mint")
    def mint(body: MintRequest, entity: EntityRecord = Depends(current_entity)):
        return engine.mint_stock(entity.entity_id, body.name, body.production_date,
                                 body.batch_number, body.quantity)

    @app.get("/inventory")
    def inventory(entity: EntityRecord = Depends(current_entity)):
        stock = engine.supply.stock_of(entity.entity_id)
        return {"owner": entity.entity_id,
                "inventory": [{"product_id": pid, "quantity": qty}
                              for pid, qty in sorted(stock.items())]}

    @app.get("/products/{product_id}")
    def product(product_id: str, entity: EntityRecord = Depends(current_entity)):
        from .errors import UnknownProduct
        record = engine.supply.products.get(product_id)
        if record is None:
            raise UnknownProduct(f"unknown product: {product_id}")
        wire = record.to_wire()
        wire["stock"] = engine.supply.stock_of(entity.entity_id, product_id)
        wire["minted"] = engine.supply.minted.get(product_id, 0)
        return wire

    @app.get("/batches")
    def batches(entity: EntityRecord = Depends(current_entity)):
        return {"batches": [b.to_wire() for b in engine.supply.batches.values()]}

    # -- trace -------------------------------------------------------------------

    @app.get("/trace")
    def trace(name: str, production_date: str, batch_number: str,
              strict: bool = False, entity: EntityRecord = Depends(current_entity)):
        return engine.trace(entity.entity_id, name, production_date, batch_number,
                            strict=strict)

    # -- access control -------------------------------------------------------

    @app.post("/acl/agreements")
    def propose_agreement(body: AgreementRequest,
                          entity: EntityRecord = Depends(current_entity)):
        parties = [_entity_ref(engine, p) for p in body.parties]
        return engine.propose_agreement(entity.entity_id, parties, body.scopes)

    @app.post("/acl/agreements/{agreement_id}/sign")
    def sign_agreement(agreement_id: str,
                       entity: EntityRecord = Depends(current_entity)):
        return engine.sign_agreement(agreement_id, entity.entity_id)

    @app.get("/acl/agreements")
    def list_agreements(entity: EntityRecord = Depends(current_entity)):
        visible = [a.to_wire() for a in engine.access.agreements()
                   if entity.entity_id in a.parties
                   or entity.entity_id == engine.registry.gha_id]
        return {"agreements": visible}

    @app.post("/acl/grants")
    def grant(body: GrantRequest, entity: EntityRecord = Depends(current_entity)):
        grantee = _entity_ref(engine, body.grantee)
        chain_key = body.chain_key
        if "@" in chain_key:  # local chains are keyed by their owner's id
            chain_key = _entity_ref(engine, chain_key)
        return engine.grant_access(entity.entity_id, grantee, chain_key,
                                   body.data_class, body.permission)

    @app.post("/acl/grants/{entry_id}/revoke")
    def revoke(entry_id: str, entity: EntityRecord = Depends(current_entity)):
        return engine.revoke_access(entity.entity_id, entry_id)

    @app.get("/acl/grants")
    def list_grants(entity: EntityRecord = Depends(current_entity)):
        is_gha = entity.entity_id == engine.registry.gha_id
        visible = [e.to_wire() for e in engine.access.entries()
                   if is_gha or entity.entity_id in (e.grantee, e.granted_by)]
        return {"grants": visible}

    # -- certificates ---------------------------------------------------------

    @app.post("/certificates")
    def issue_certificate(body: CertificateRequest,
                          entity: EntityRecord = Depends(current_entity)):
        patient = _entity_ref(engine, body.patient)
        return engine.issue_certificate(entity.entity_id, patient, body.product_id,
                                        body.dose_info)

    @app.get("/certificates/{cert_id}")
    def get_certificate(cert_id: str, entity: EntityRecord = Depends(current_entity)):
        from .errors import NotFound
        certificate = engine.supply.certificates.get(cert_id)
        if certificate is None:
            raise NotFound(f"unknown certificate: {cert_id}")
        return certificate.to_wire()

    @app.get("/certificates/{cert_id}/verify")
    def verify_certificate(cert_id: str):
        return engine.verify_certificate(cert_id)

    # -- chain explorer (public reads) ---------------------------------------

    @app.get("/chains")
    def chains():
        return {"chains": engine.chains_wire()}

    @app.get("/chains/{chain_key}/blocks")
    def chain_blocks(chain_key: str):
        return {"blocks": engine.blocks_wire(chain_key)}

    @app.get("/chains/{chain_key}/anchors")
    def chain_anchors(chain_key: str):
        return {"anchors": engine.anchors_wire(chain_key)}

    @app.post("/validate")
    def validate(body: ValidateRequest, entity: EntityRecord = Depends(current_entity)):
        return engine.validate_request(entity.entity_id, body.target_chain,
                                       body.claimed_header, body.data_class,
                                       body.permission)

    # -- admin -----------------------------------------------------------------

    @app.get("/admin/consistency")
    def consistency(scope: str = "All", entity: EntityRecord = Depends(current_entity)):
        report = engine.verify_consistency(scope if scope != "All" else None)
        chain_reports = {key: rep.to_wire()
                         for key, rep in engine.verify_all_chains().items()}
        return {"store": report, "chains": chain_reports}

    return app
