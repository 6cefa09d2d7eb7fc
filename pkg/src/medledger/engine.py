"""The deployment facade: wires ledgers, registry, ACLs, topology, and goods.

One engine instance is one in-process deployment: a single global chain, one
local chain per active member, the off-chain store, and the relay channels
between parties. Every committed action seals exactly one transaction per
touched chain, synchronously anchors local headers to the global chain, and
journals the full payload off-chain keyed to the sealed transaction.

Mutating operations serialize through the engine write lock (a degenerate
but valid form of per-chain serial queues); reads are lock-free snapshots.
"""

from __future__ import annotations

import json
import os
import random
import threading
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from . import canonical
from .access import (
    AccessControl,
    AgreementScope,
    DataClass,
    Permission,
    ResourceScope,
)
from .clock import make_clock
from .crypto import Keyring
from .errors import (
    AccessDenied,
    AccountAlreadyExists,
    NotActiveMember,
    NotFound,
    NotGHA,
    UnknownChain,
    UnknownPatient,
    UnknownProduct,
    WrongActor,
)
from .ledger import (
    Block,
    BlockHeader,
    ChainId,
    ChainStore,
    Layer,
    Transaction,
    TxKind,
    VerificationReport,
    build_transaction,
)
from .registry import (
    ACTIVE_IDENTITIES,
    EntityRecord,
    Identity,
    Registry,
    RoleClass,
    entity_id_for,
)
from .store import OffchainStore, OnchainRef, RecordKind
from .supply import Certificate, SupplyDomain
from .topology import Topology, relay_signing_bytes
from .trace import TraceEngine

SEQUENCER_ID = "consortium"


@dataclass
class EngineConfig:
    global_chain_label: str = "global"
    gha_name: str = "Government Health Authority"
    gha_email: str = "gha@medledger.local"
    gha_password: str = "gha-bootstrap-secret"
    signer_scheme: str = "ed25519"
    clock: str = "wall"
    seed: Optional[int] = None
    data_dir: Optional[str] = None
    session_ttl_ms: int = 3_600_000
    pbkdf2_iterations: int = 10_000
    read_p95_ms: float = 20.0
    entities: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "EngineConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in raw.items() if k in known})

    @classmethod
    def from_file(cls, path: str) -> "EngineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


class SupplyChainEngine:
    def __init__(self, config: EngineConfig | None = None, bootstrap: bool = True):
        self.config = config or EngineConfig()
        self.clock = make_clock(self.config.clock)
        self._rng = random.Random(self.config.seed) if self.config.seed is not None else None
        self.keyring = Keyring(self.config.signer_scheme)
        self.chains = ChainStore(self.config.data_dir)
        self.registry = Registry(
            pbkdf2_iterations=self.config.pbkdf2_iterations,
            session_ttl_ms=self.config.session_ttl_ms,
            rand_bytes=self._rand_bytes,
        )
        self.store = OffchainStore(self.config.data_dir)
        self.supply = SupplyDomain()
        self.access = AccessControl(self.registry)
        self.global_chain_id = ChainId(Layer.Global, SEQUENCER_ID,
                                       self.config.global_chain_label)
        self.topology = Topology(self.registry, self.global_chain_id)
        self.tracer = TraceEngine(self)
        self.audit: list[dict] = []
        self._write_lock = threading.RLock()
        self._inv_seq = 0
        if bootstrap:
            self.chains.create(self.global_chain_id)
            self._create_key(SEQUENCER_ID)
            self.register_account(self.config.gha_name, self.config.gha_email,
                                  Identity.GHA.value, self.config.gha_password)
            for entity in self.config.entities:
                self.register_account(entity["name"], entity["email"],
                                      entity["identity"], entity["password"])

    # ------------------------------------------------------------------
    # primitives
    # ------------------------------------------------------------------

    def _rand_bytes(self, n: int) -> bytes:
        if self._rng is not None:
            return self._rng.getrandbits(8 * n).to_bytes(n, "big")
        return os.urandom(n)

    def _create_key(self, holder_id: str):
        seed = None
        if self.config.seed is not None:
            seed = f"{self.config.seed}|key|{holder_id}".encode("utf-8")
        pair = self.keyring.create(holder_id, seed)
        self._persist_keys()
        return pair

    def _persist_keys(self) -> None:
        if self.config.data_dir is None:
            return
        path = os.path.join(self.config.data_dir, "keys.json")
        payload = {
            holder: {"scheme": pair.scheme, "secret": pair.secret_hex()}
            for holder, pair in self.keyring.items()
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)

    def _resolve_key(self, holder_id: str) -> str | None:
        pair = self.keyring.get(holder_id)
        if pair is not None:
            return pair.public_key
        return self.registry.public_key_of(holder_id)

    def _classify_kinds(self, author: str) -> set | None:
        if author == SEQUENCER_ID:
            return {TxKind.Query, TxKind.Access, TxKind.Send}
        record = self.registry.maybe_get(author)
        if record is None:
            return None
        return self.registry.classify(author).permitted_tx_kinds

    def tx_lookup(self, ref: OnchainRef) -> Transaction | None:
        try:
            chain = self.chains.get(ref.chain_key)
        except UnknownChain:
            return None
        return chain.find_tx(ref.height, ref.tx_id)

    def _commit(self, *, kind: TxKind, author: str, payload: dict,
                cosigners: Iterable[str] = (), chain_ids: list[ChainId],
                records: Iterable[tuple[RecordKind, str, tuple]] = (),
                relay_to: str | None = None) -> tuple[Transaction, OnchainRef]:
        """Seal one signed transaction on every listed chain and journal it."""
        payload_bytes = canonical.encode(payload)
        signer_ids = [author, *cosigners]
        tx = build_transaction(kind, payload_bytes, author, signer_ids,
                               self.clock.now_ms(), self.keyring.sign)
        if relay_to is not None:
            self._relay_signed(author, relay_to, payload_bytes, tx.tx_id.hex())
        primary_ref: OnchainRef | None = None
        for chain_id in chain_ids:
            chain = self.chains.get(chain_id.key)
            block = chain.seal([tx], self.clock.now_ms(), self._resolve_key,
                               self._classify_kinds)
            if primary_ref is None:
                primary_ref = OnchainRef(chain_id.key, block.height, tx.tx_id)
            if chain_id.layer == Layer.Local:
                self._anchor(chain, block)
        assert primary_ref is not None
        for record_kind, record_id, secondary in records:
            self.store.put(record_id, record_kind, payload_bytes, primary_ref,
                           self.tx_lookup, secondary)
        self.audit.append({"type": payload.get("event", "tx"),
                           "at": tx.timestamp, "tx_id": tx.tx_id.hex(),
                           "chains": [c.key for c in chain_ids]})
        return tx, primary_ref

    def _anchor(self, chain, block: Block) -> None:
        """Publish the freshly sealed local header to the global chain (multisig)."""
        header = block.header()
        self.topology.check_anchor(chain.chain_id, header)
        payload = {"event": "header.anchored", "header": header.to_wire()}
        payload_bytes = canonical.encode(payload)
        tx = build_transaction(TxKind.Send, payload_bytes, chain.chain_id.owner,
                               [chain.chain_id.owner, SEQUENCER_ID],
                               self.clock.now_ms(), self.keyring.sign)
        global_chain = self.chains.get(self.global_chain_id.key)
        global_chain.seal([tx], self.clock.now_ms(), self._resolve_key,
                          self._classify_kinds)
        self.topology.record_anchor(chain.chain_id, header, tx.tx_id, tx.timestamp)

    def _relay_signed(self, sender: str, recipient: str, payload: bytes, nonce: str) -> None:
        signature = self.keyring.sign(
            sender, relay_signing_bytes(sender, recipient, nonce, payload))
        receipt = self.topology.relay(sender, recipient, payload, nonce, signature,
                                      self.clock.now_ms())
        self.audit.append({"type": "relay.receipt", **receipt.to_wire()})

    # ------------------------------------------------------------------
    # identity-registry operations
    # ------------------------------------------------------------------

    def register_account(self, name: str, email: str, identity: str, password: str) -> dict:
        with self._write_lock:
            # Validate everything before provisioning a chain or keys.
            parsed = Registry.validate_new(name, email, identity, password)
            if self.registry.by_email(email) is not None:
                raise AccountAlreadyExists(f"account already exists for {email}")

            entity_id = entity_id_for(email)
            chain_address = None
            if parsed in ACTIVE_IDENTITIES:
                chain_address = ChainId(Layer.Local, entity_id, entity_id)
                self.chains.create(chain_address)
            pair = self._create_key(entity_id)
            now = self.clock.now_ms()
            record = self.registry.create_record(
                name, email, identity, password, pair.public_key, chain_address, now)
            registrar = self.registry.gha_id or entity_id
            payload = {
                "event": "entity.registered",
                "at": now,
                "registrar": registrar,
                "record": record.to_wire(include_credential=True),
            }
            if chain_address is not None:
                # Provisioning event: the owner seals its chain's genesis entry.
                self._commit(
                    kind=TxKind.Access, author=entity_id,
                    payload={"event": "chain.provisioned", "at": now,
                             "record": record.to_wire()},
                    chain_ids=[chain_address],
                )
            self._commit(
                kind=TxKind.Access, author=registrar, payload=payload,
                chain_ids=[self.global_chain_id],
                records=[(RecordKind.Entity, f"entity:{entity_id}", (("email", email),))],
            )
            return {
                "entity_id": entity_id,
                "chain_address": chain_address.to_wire() if chain_address else None,
                "confirmation": True,
            }

    def authenticate(self, email: str, password: str) -> dict:
        token = self._rand_bytes(16).hex()
        session = self.registry.authenticate(email, password, self.clock.now_ms(), token)
        record = self.registry.get(session.entity_id)
        classification = self.registry.classify(session.entity_id)
        return {
            "token": session.token,
            "entity_id": session.entity_id,
            "identity": record.identity.value,
            **classification.to_wire(),
        }

    def logout(self, token: str) -> None:
        self.registry.logout(token)

    def resolve_session(self, token: str) -> EntityRecord:
        return self.registry.resolve_session(token, self.clock.now_ms())

    def classify(self, entity_id: str) -> dict:
        return self.registry.classify(entity_id).to_wire()

    # ------------------------------------------------------------------
    # access-control operations
    # ------------------------------------------------------------------

    def propose_agreement(self, proposer: str, parties: list[str],
                          scopes: list[dict]) -> dict:
        with self._write_lock:
            parsed = [AgreementScope(DataClass(s["data_class"]), Permission(s["permission"]))
                      for s in scopes]
            agreement = self.access.propose_agreement(proposer, parties, parsed,
                                                      self.clock.now_ms())
            return agreement.to_wire()

    def sign_agreement(self, agreement_id: str, party: str) -> dict:
        with self._write_lock:
            agreement = self.access.sign_agreement(agreement_id, party, self.clock.now_ms())
            if not agreement.active and set(agreement.signatures) == set(agreement.parties):
                now = self.clock.now_ms()
                entries = self.access.activate_agreement(agreement, now)
                others = [p for p in agreement.parties if p != agreement.proposed_by]
                self._commit(
                    kind=TxKind.Send, author=agreement.proposed_by, cosigners=others,
                    payload={
                        "event": "acl.agreement_activated",
                        "at": now,
                        "agreement": agreement.to_wire(),
                        "entries": [e.to_wire() for e in entries],
                    },
                    chain_ids=[self.global_chain_id],
                    records=[(RecordKind.Acl, f"acl:agreement:{agreement.agreement_id}",
                              (("agreement", agreement.agreement_id),))],
                )
            return agreement.to_wire()

    def grant_access(self, granter: str, grantee: str, chain_key: str,
                     data_class: str, permission: str) -> dict:
        with self._write_lock:
            chain = self.chains.get(chain_key)
            resource = ResourceScope(chain.chain_id, DataClass(data_class))
            entry = self.access.grant(granter, grantee, resource,
                                      Permission(permission), self.clock.now_ms())
            self._record_acl_mutation(granter, "acl.granted", entry)
            return entry.to_wire()

    def revoke_access(self, revoker: str, entry_id: str) -> dict:
        with self._write_lock:
            entry = self.access.revoke(revoker, entry_id, self.clock.now_ms())
            self._record_acl_mutation(revoker, "acl.revoked", entry)
            return entry.to_wire()

    def _record_acl_mutation(self, actor: str, event: str, entry) -> None:
        actor_record = self.registry.get(actor)
        chain_ids = [actor_record.chain_address] if actor_record.chain_address else [
            self.global_chain_id]
        suffix = event.rsplit(".", 1)[1]
        self._commit(
            kind=TxKind.Access, author=actor,
            payload={"event": event, "at": self.clock.now_ms(), "entry": entry.to_wire()},
            chain_ids=chain_ids,
            records=[(RecordKind.Acl, f"acl:entry:{entry.entry_id}:{suffix}",
                      (("acl_entry", entry.entry_id),))],
        )

    def evaluate_access(self, requester: str, chain_key: str, data_class: str,
                        permission: str, at: int | None = None) -> dict:
        chain = self.chains.get(chain_key)
        decision = self.access.evaluate(
            requester, ResourceScope(chain.chain_id, DataClass(data_class)),
            Permission(permission), at if at is not None else self.clock.now_ms())
        return decision.to_wire()

    # ------------------------------------------------------------------
    # supply-domain operations
    # ------------------------------------------------------------------

    def mint_stock(self, producer: str, name: str, production_date: str,
                   batch_number: str, quantity: int) -> dict:
        with self._write_lock:
            record = self.registry.get(producer)
            product, batch, stock_after = self.supply.mint(
                record, name, production_date, batch_number, quantity)
            now = self.clock.now_ms()
            payload = {
                "event": "stock.minted",
                "at": now,
                "product": product.to_wire(),
                "batch_key": batch.batch_key,
                "quantity": quantity,
                "stock_after": stock_after,
                "minted_total": self.supply.minted[product.product_id],
            }
            self._inv_seq += 1
            self._commit(
                kind=TxKind.Access, author=producer, payload=payload,
                chain_ids=[record.chain_address],
                records=[
                    (RecordKind.Batch, f"batch:{batch.batch_key}:{self._inv_seq}",
                     (("batch", batch.batch_key),)),
                    (RecordKind.Inventory, f"inventory:{self._inv_seq:06d}",
                     (("inventory", f"{producer}:{product.product_id}"),)),
                ],
            )
            return {"product": product.to_wire(), "stock": stock_after}

    def _delivery_parties(self, delivery) -> tuple[EntityRecord, EntityRecord]:
        return (self.registry.get(delivery.address_from),
                self.registry.get(delivery.address_to))

    def _delivery_chains(self, sender: EntityRecord, receiver: EntityRecord) -> list[ChainId]:
        chain_ids = [sender.chain_address]
        if receiver.chain_address is not None:
            chain_ids.append(receiver.chain_address)
        return chain_ids

    def _delivery_signers(self, actor: EntityRecord, counterparty: EntityRecord
                          ) -> tuple[str, list[str]]:
        """Author must be an Active party; the counterparty co-signs."""
        if actor.role_class == RoleClass.Active:
            return actor.entity_id, [counterparty.entity_id]
        return counterparty.entity_id, [actor.entity_id]

    def create_delivery(self, sender_id: str, receiver_id: str) -> dict:
        with self._write_lock:
            sender = self.registry.get(sender_id)
            receiver = self.registry.get(receiver_id)
            if sender.role_class != RoleClass.Active:
                raise NotActiveMember("only active members dispatch deliveries")
            now = self.clock.now_ms()
            if receiver.chain_address is not None:
                decision = self.access.evaluate(
                    sender_id,
                    ResourceScope(receiver.chain_address, DataClass.ShipmentTracking),
                    Permission.Write, now)
                if not decision.allow:
                    raise AccessDenied(
                        f"no shipment-tracking write access to {receiver.email}",
                        reason=decision.reason)
            else:
                # Last-mile to a passive care-site: the GHA must have set the
                # receiver's ACL for the sender's shipment-tracking data.
                decision = self.access.evaluate(
                    receiver_id,
                    ResourceScope(sender.chain_address, DataClass.ShipmentTracking),
                    Permission.Read, now)
                if not decision.allow:
                    raise AccessDenied(
                        f"no ACL links {receiver.email} to {sender.email}",
                        reason=decision.reason)
            delivery = self.supply.create_delivery(sender, receiver, now)
            payload = {"event": "delivery.created", "at": now,
                       "delivery": delivery.to_wire()}
            self._commit(
                kind=TxKind.Send, author=sender_id, cosigners=[receiver_id],
                payload=payload,
                chain_ids=self._delivery_chains(sender, receiver),
                records=[(RecordKind.Delivery,
                          f"delivery:{delivery.delivery_id}:created",
                          (("delivery", delivery.delivery_id),))],
                relay_to=receiver_id if receiver.chain_address is not None else None,
            )
            return delivery.to_wire()

    def add_product(self, actor: str, delivery_id: str, product_id: str,
                    quantity: int, producer: str | None = None) -> dict:
        with self._write_lock:
            delivery = self.supply.get_delivery(delivery_id)
            if actor != delivery.address_from:
                raise WrongActor("only the sender prepares a delivery")
            product = self.supply.products.get(product_id)
            if product is None:
                raise UnknownProduct(f"unknown product: {product_id}")
            now = self.clock.now_ms()
            delivery = self.supply.add_product(
                delivery_id, product_id, quantity, producer or product.producer, now)
            sender, receiver = self._delivery_parties(delivery)
            payload = {
                "event": "delivery.prepared",
                "at": now,
                "delivery": delivery.to_wire(),
                "producer": product.producer,
                "batch_key": product.batch_key,
                "sender_stock": {
                    "owner": sender.entity_id,
                    "product_id": product_id,
                    "quantity": self.supply.stock_of(sender.entity_id, product_id),
                },
                "in_transit": dict(self.supply.escrow.get(delivery_id, {})),
            }
            self._inv_seq += 1
            self._commit(
                kind=TxKind.Send, author=sender.entity_id,
                cosigners=[receiver.entity_id], payload=payload,
                chain_ids=self._delivery_chains(sender, receiver),
                records=[
                    (RecordKind.Delivery, f"delivery:{delivery_id}:prepared",
                     (("delivery", delivery_id),)),
                    (RecordKind.Inventory, f"inventory:{self._inv_seq:06d}",
                     (("inventory", f"{sender.entity_id}:{product_id}"),)),
                ],
                relay_to=receiver.entity_id if receiver.chain_address else None,
            )
            return delivery.to_wire()

    def ship_delivery(self, actor: str, delivery_id: str, at: int | None = None) -> dict:
        with self._write_lock:
            ship_at = at if at is not None else self.clock.now_ms()
            delivery = self.supply.ship(delivery_id, actor, ship_at)
            sender, receiver = self._delivery_parties(delivery)
            payload = {"event": "delivery.shipped", "at": ship_at,
                       "delivery_id": delivery_id, "status": delivery.status.value,
                       "shipped_at": delivery.shipped_at}
            author, cosigners = sender.entity_id, [receiver.entity_id]
            self._commit(
                kind=TxKind.Send, author=author, cosigners=cosigners, payload=payload,
                chain_ids=self._delivery_chains(sender, receiver),
                records=[(RecordKind.Delivery, f"delivery:{delivery_id}:shipped",
                          (("delivery", delivery_id),))],
                relay_to=receiver.entity_id if receiver.chain_address else None,
            )
            return delivery.to_wire()

    def receive_delivery(self, actor: str, delivery_id: str, at: int | None = None) -> dict:
        with self._write_lock:
            receive_at = at if at is not None else self.clock.now_ms()
            delivery = self.supply.receive(delivery_id, actor, receive_at)
            sender, receiver = self._delivery_parties(delivery)
            payload = {"event": "delivery.received", "at": receive_at,
                       "delivery_id": delivery_id, "status": delivery.status.value,
                       "received_at": delivery.received_at}
            author, cosigners = self._delivery_signers(receiver, sender)
            self._commit(
                kind=TxKind.Send, author=author, cosigners=cosigners, payload=payload,
                chain_ids=self._delivery_chains(sender, receiver),
                records=[(RecordKind.Delivery, f"delivery:{delivery_id}:received",
                          (("delivery", delivery_id),))],
                relay_to=sender.entity_id if receiver.chain_address else None,
            )
            return delivery.to_wire()

    def post_inbound_inventory(self, actor: str, delivery_id: str) -> dict:
        with self._write_lock:
            now = self.clock.now_ms()
            delivery, inventory = self.supply.post_inbound(delivery_id, actor, now)
            sender, receiver = self._delivery_parties(delivery)
            payload = {
                "event": "delivery.completed",
                "at": now,
                "delivery_id": delivery_id,
                "status": delivery.status.value,
                "completed_at": delivery.completed_at,
                "receiver_stock": [inv.to_wire() for inv in inventory],
            }
            author, cosigners = self._delivery_signers(receiver, sender)
            records: list = [(RecordKind.Delivery, f"delivery:{delivery_id}:completed",
                              (("delivery", delivery_id),))]
            for inv in inventory:
                self._inv_seq += 1
                records.append((RecordKind.Inventory, f"inventory:{self._inv_seq:06d}",
                                (("inventory", f"{inv.owner}:{inv.product_id}"),)))
            self._commit(
                kind=TxKind.Send, author=author, cosigners=cosigners, payload=payload,
                chain_ids=self._delivery_chains(sender, receiver),
                records=records,
                relay_to=sender.entity_id if receiver.chain_address else None,
            )
            return {"delivery": delivery.to_wire(),
                    "inventory": [inv.to_wire() for inv in inventory]}

    def get_delivery(self, requester: str, delivery_id: str) -> dict:
        """Read one delivery: parties always may; others need tracking access."""
        delivery = self.supply.get_delivery(delivery_id)
        if requester not in (delivery.address_from, delivery.address_to):
            sender = self.registry.get(delivery.address_from)
            decision = self.access.evaluate(
                requester,
                ResourceScope(sender.chain_address, DataClass.ShipmentTracking),
                Permission.Read, self.clock.now_ms())
            if not decision.allow:
                raise AccessDenied("no shipment-tracking read access to this delivery",
                                   reason=decision.reason)
        return delivery.to_wire()

    # ------------------------------------------------------------------
    # certificates
    # ------------------------------------------------------------------

    def issue_certificate(self, issuer: str, patient: str, product_id: str,
                          dose_info: dict) -> dict:
        with self._write_lock:
            issuer_record = self.registry.get(issuer)
            if issuer_record.identity != Identity.GHA:
                raise NotGHA("only the GHA issues certificates")
            patient_record = self.registry.maybe_get(patient)
            if patient_record is None or patient_record.role_class != RoleClass.Passive:
                raise UnknownPatient(f"no passive member registered as {patient}")
            product = self.supply.products.get(product_id)
            if product is None:
                raise UnknownProduct(f"unknown product: {product_id}")
            now = self.clock.now_ms()
            certificate = Certificate(
                cert_id=self.supply.next_certificate_id(),
                patient=patient,
                product_id=product_id,
                batch_key=product.batch_key,
                dose_info=dose_info,
                issued_by=issuer,
                issued_at=now,
                signature=b"",
            )
            certificate.signature = self.keyring.sign(
                issuer, canonical.digest(certificate.signing_payload()))
            self.supply.add_certificate(certificate)
            self._commit(
                kind=TxKind.Access, author=issuer,
                payload={"event": "certificate.issued", "at": now,
                         "certificate": certificate.to_wire()},
                chain_ids=[self.global_chain_id],
                records=[(RecordKind.Certificate, f"certificate:{certificate.cert_id}",
                          (("certificate", certificate.cert_id),
                           ("patient_certificate", patient)))],
            )
            return certificate.to_wire()

    def verify_certificate(self, certificate: str | dict) -> dict:
        from .crypto import verify_signature
        if isinstance(certificate, str):
            stored = self.supply.certificates.get(certificate)
            if stored is None:
                raise NotFound(f"unknown certificate: {certificate}")
            cert = stored
        else:
            cert = Certificate.from_wire(certificate)
        issuer_key = self._resolve_key(cert.issued_by)
        message = canonical.digest(cert.signing_payload())
        if issuer_key is None or not verify_signature(issuer_key, cert.signature, message):
            return {"valid": False, "reason": "SignatureMismatch"}
        try:
            record = self.store.get(f"certificate:{cert.cert_id}")
        except Exception:
            return {"valid": False, "reason": "NotAnchored"}
        tx = self.tx_lookup(record.ref)
        if tx is None or canonical.digest_bytes(record.payload) != tx.payload_digest:
            return {"valid": False, "reason": "NotAnchored"}
        anchored_wire = record.payload_value()["certificate"]
        if Certificate.from_wire(anchored_wire).signing_payload() != cert.signing_payload():
            return {"valid": False, "reason": "SignatureMismatch"}
        return {"valid": True, "reason": None}

    # ------------------------------------------------------------------
    # topology operations
    # ------------------------------------------------------------------

    def validate_request(self, requester: str, target_chain_key: str,
                         claimed_header: dict | BlockHeader,
                         data_class: str = DataClass.All.value,
                         permission: str = Permission.Read.value) -> dict:
        header = (claimed_header if isinstance(claimed_header, BlockHeader)
                  else BlockHeader.from_wire(claimed_header))
        target = self.chains.get(target_chain_key).chain_id
        result = self.topology.validate_request(
            requester, target, header, self.access, self.clock.now_ms(),
            DataClass(data_class), Permission(permission))
        return result.to_wire()

    def relay_message(self, sender: str, recipient: str, payload: Any, nonce: str) -> dict:
        payload_bytes = canonical.encode(payload)
        signature = self.keyring.sign(
            sender, relay_signing_bytes(sender, recipient, nonce, payload_bytes))
        receipt = self.topology.relay(sender, recipient, payload_bytes, nonce,
                                      signature, self.clock.now_ms())
        return receipt.to_wire()

    # ------------------------------------------------------------------
    # trace
    # ------------------------------------------------------------------

    def trace(self, requester: str, name: str, production_date: str,
              batch_number: str, strict: bool = True) -> dict:
        return self.tracer.trace(requester, name, production_date, batch_number,
                                 strict=strict).to_wire()

    # ------------------------------------------------------------------
    # verification and explorer reads
    # ------------------------------------------------------------------

    def verify_chain(self, chain_key: str) -> VerificationReport:
        return self.chains.get(chain_key).verify(self._resolve_key, self._classify_kinds)

    def verify_all_chains(self) -> dict[str, VerificationReport]:
        return {chain.chain_id.key: chain.verify(self._resolve_key, self._classify_kinds)
                for chain in self.chains.all()}

    def verify_consistency(self, scope: str | None = None) -> dict:
        kind = RecordKind(scope) if scope and scope != "All" else None
        return self.store.verify_consistency(self.tx_lookup, kind).to_wire()

    def chains_wire(self) -> list[dict]:
        return [
            {
                "chain_id": chain.chain_id.to_wire(),
                "key": chain.chain_id.key,
                "height": chain.height,
                "head_hash": chain.head_hash.hex(),
            }
            for chain in self.chains.all()
        ]

    def blocks_wire(self, chain_key: str) -> list[dict]:
        return [block.to_wire() for block in self.chains.get(chain_key).blocks()]

    def anchors_wire(self, chain_key: str) -> list[dict]:
        self.chains.get(chain_key)
        return [anchor.to_wire() for anchor in self.topology.anchors_of(chain_key)]

    def header_of(self, chain_key: str, height: int) -> BlockHeader:
        """Header recomputed from current chain storage (tamper shows up here)."""
        return self.chains.get(chain_key).header_at(height, self._resolve_key,
                                                    self._classify_kinds)

    def head_hash(self, chain_key: str | None = None) -> str:
        chain = self.chains.get(chain_key or self.global_chain_id.key)
        return chain.head_hash.hex()

    def export_audit_jsonl(self) -> str:
        events = [*self.audit, *self.access.audit_log]
        events.sort(key=lambda e: e.get("at", 0))
        return "\n".join(json.dumps(e, sort_keys=True, default=str) for e in events)

    # ------------------------------------------------------------------
    # persistence
    # ------------------------------------------------------------------

    @classmethod
    def load(cls, config: EngineConfig) -> "SupplyChainEngine":
        """Rebuild a deployment from its data directory."""
        if config.data_dir is None:
            raise ValueError("load requires config.data_dir")
        engine = cls(config, bootstrap=False)
        engine.chains.load_dir(config.data_dir)
        keys_path = os.path.join(config.data_dir, "keys.json")
        if os.path.exists(keys_path):
            with open(keys_path, encoding="utf-8") as fh:
                for holder, entry in json.load(fh).items():
                    engine.keyring.restore(holder, entry["scheme"],
                                           bytes.fromhex(entry["secret"]))
        store_dir = os.path.join(config.data_dir, "store")
        if os.path.isdir(store_dir):
            engine.store.import_dir(store_dir)
        engine._fold_store()
        engine._rebuild_anchors()
        if config.clock == "logical":
            last = 0
            for chain in engine.chains.all():
                for block in chain.blocks():
                    last = max(last, block.sealed_at,
                               *(tx.timestamp for tx in block.transactions))
            engine.clock = make_clock("logical", start=last)
        return engine

    def _fold_store(self) -> None:
        from .access import AclEntry, ConsortiumAgreement
        for record in self.store.records():
            payload = record.payload_value()
            event = payload.get("event", "")
            if record.kind == RecordKind.Entity:
                self.registry.restore_record(EntityRecord.from_wire(payload["record"]))
            elif record.kind == RecordKind.Acl:
                if event == "acl.agreement_activated":
                    wire = payload["agreement"]
                    agreement = ConsortiumAgreement(
                        agreement_id=wire["agreement_id"],
                        parties=tuple(wire["parties"]),
                        scopes=tuple(AgreementScope.from_wire(s) for s in wire["scopes"]),
                        proposed_by=wire["proposed_by"],
                        proposed_at=wire["proposed_at"],
                        signatures=dict(wire["signatures"]),
                        effective_at=wire["effective_at"],
                    )
                    self.access.restore_agreement(agreement)
                    for entry_wire in payload["entries"]:
                        self.access.restore_entry(AclEntry.from_wire(entry_wire))
                else:
                    self.access.restore_entry(AclEntry.from_wire(payload["entry"]))
            elif record.kind == RecordKind.Batch:
                self.supply.restore_mint(payload)
            elif record.kind == RecordKind.Delivery:
                self.supply.restore_delivery_event(payload)
            elif record.kind == RecordKind.Certificate:
                self.supply.restore_certificate(payload)
            if record.record_id.startswith("inventory:"):
                seq = int(record.record_id.split(":")[1])
                self._inv_seq = max(self._inv_seq, seq)

    def _rebuild_anchors(self) -> None:
        """Recover the anchor index by matching global transactions to local headers."""
        global_chain = self.chains.get(self.global_chain_id.key)
        by_digest: dict[bytes, Transaction] = {}
        for block in global_chain.blocks():
            for tx in block.transactions:
                by_digest[tx.payload_digest] = tx
        for chain in self.chains.all():
            if chain.chain_id.layer != Layer.Local:
                continue
            for height in range(chain.height + 1):
                header = chain.header_at(height, self._resolve_key, self._classify_kinds)
                expected = canonical.digest(
                    {"event": "header.anchored", "header": header.to_wire()})
                tx = by_digest.get(expected)
                if tx is None:
                    continue
                self.topology.record_anchor(chain.chain_id, header, tx.tx_id, tx.timestamp)
