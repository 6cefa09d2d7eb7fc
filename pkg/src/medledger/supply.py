"""Products, batches, inventory, certificates, and the delivery state machine.

Deliveries advance strictly Created -> Prepared -> Shipped -> Received ->
Completed. Outbound stock moves into a per-delivery escrow the moment the
products are attached, and the final Completed state is entered
automatically when the receiver posts inbound inventory; there is no manual
completion operation. Stock is conserved: minted quantity always equals the
sum of held inventory plus in-transit escrow.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .errors import (
    InsufficientInventory,
    InvalidQuantity,
    InvalidTimestamp,
    NotManufacturer,
    SelfDelivery,
    UnknownDelivery,
    UnknownProduct,
    WrongActor,
    WrongState,
)
from .registry import EntityRecord, Identity

BATCH_KEY_SEP = "|"


def batch_key_of(name: str, production_date: str, batch_number: str) -> str:
    return BATCH_KEY_SEP.join((name, production_date, batch_number))


def product_id_of(name: str, production_date: str, batch_number: str, producer: str) -> str:
    seed = f"{name}{BATCH_KEY_SEP}{production_date}{BATCH_KEY_SEP}{batch_number}{BATCH_KEY_SEP}{producer}"
    return "p-" + hashlib.sha256(seed.encode("utf-8")).hexdigest()[:12]


class DeliveryStatus(str, Enum):
    Created = "Created"
    Prepared = "Prepared"
    Shipped = "Shipped"
    Received = "Received"
    Completed = "Completed"


@dataclass
class Product:
    product_id: str
    name: str
    production_date: str
    batch_number: str
    producer: str

    @property
    def batch_key(self) -> str:
        return batch_key_of(self.name, self.production_date, self.batch_number)

    def to_wire(self) -> dict:
        return {
            "product_id": self.product_id,
            "name": self.name,
            "production_date": self.production_date,
            "batch_number": self.batch_number,
            "producer": self.producer,
            "batch_key": self.batch_key,
        }


@dataclass
class Batch:
    batch_key: str
    producer: str
    delivery_ids: list[str] = field(default_factory=list)

    def to_wire(self) -> dict:
        return {
            "batch_key": self.batch_key,
            "producer": self.producer,
            "delivery_ids": list(self.delivery_ids),
        }


@dataclass
class Delivery:
    delivery_id: str
    address_from: str
    address_to: str
    items: list[tuple[str, int]] = field(default_factory=list)
    status: DeliveryStatus = DeliveryStatus.Created
    created_at: Optional[int] = None
    prepared_at: Optional[int] = None
    shipped_at: Optional[int] = None
    received_at: Optional[int] = None
    completed_at: Optional[int] = None

    def to_wire(self) -> dict:
        return {
            "delivery_id": self.delivery_id,
            "address_from": self.address_from,
            "address_to": self.address_to,
            "items": [{"product_id": p, "quantity": q} for p, q in self.items],
            "status": self.status.value,
            "created_at": self.created_at,
            "prepared_at": self.prepared_at,
            "shipped_at": self.shipped_at,
            "received_at": self.received_at,
            "completed_at": self.completed_at,
        }


@dataclass
class InventoryRecord:
    owner: str
    product_id: str
    quantity: int

    def to_wire(self) -> dict:
        return {"owner": self.owner, "product_id": self.product_id, "quantity": self.quantity}


@dataclass
class Certificate:
    cert_id: str
    patient: str
    product_id: str
    batch_key: str
    dose_info: dict
    issued_by: str
    issued_at: int
    signature: bytes

    def signing_payload(self) -> dict:
        return {
            "cert_id": self.cert_id,
            "patient": self.patient,
            "product_id": self.product_id,
            "batch_key": self.batch_key,
            "dose_info": self.dose_info,
            "issued_by": self.issued_by,
            "issued_at": self.issued_at,
        }

    def to_wire(self) -> dict:
        wire = self.signing_payload()
        wire["signature"] = self.signature.hex()
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "Certificate":
        return cls(
            cert_id=wire["cert_id"],
            patient=wire["patient"],
            product_id=wire["product_id"],
            batch_key=wire["batch_key"],
            dose_info=dict(wire["dose_info"]),
            issued_by=wire["issued_by"],
            issued_at=wire["issued_at"],
            signature=bytes.fromhex(wire["signature"]),
        )


class SupplyDomain:
    """In-memory authoritative state for goods; the engine journals every change."""

    def __init__(self):
        self.products: dict[str, Product] = {}
        self.batches: dict[str, Batch] = {}
        self.deliveries: dict[str, Delivery] = {}
        self.stock: dict[tuple[str, str], int] = {}
        self.escrow: dict[str, dict[str, int]] = {}
        self.minted: dict[str, int] = {}
        self.certificates: dict[str, Certificate] = {}
        self._delivery_seq = 0
        self._cert_seq = 0
        self._lock = threading.RLock()

    # -- production -----------------------------------------------------------

    def mint(self, producer: EntityRecord, name: str, production_date: str,
             batch_number: str, quantity: int) -> tuple[Product, Batch, int]:
        if producer.identity != Identity.Manufacturer:
            raise NotManufacturer("only manufacturers can mint stock")
        if quantity <= 0:
            raise InvalidQuantity("minted quantity must be a positive integer")
        with self._lock:
            product_id = product_id_of(name, production_date, batch_number, producer.entity_id)
            product = self.products.get(product_id)
            if product is None:
                product = Product(product_id, name, production_date, batch_number,
                                  producer.entity_id)
                self.products[product_id] = product
            batch = self.batches.get(product.batch_key)
            if batch is None:
                batch = Batch(product.batch_key, producer.entity_id)
                self.batches[product.batch_key] = batch
            key = (producer.entity_id, product_id)
            self.stock[key] = self.stock.get(key, 0) + quantity
            self.minted[product_id] = self.minted.get(product_id, 0) + quantity
            return product, batch, self.stock[key]

    # -- delivery lifecycle -----------------------------------------------------

    def create_delivery(self, sender: EntityRecord, receiver: EntityRecord,
                        now: int) -> Delivery:
        if sender.entity_id == receiver.entity_id:
            raise SelfDelivery("a delivery needs two distinct parties")
        with self._lock:
            self._delivery_seq += 1
            delivery = Delivery(
                delivery_id=f"d-{self._delivery_seq:06d}",
                address_from=sender.entity_id,
                address_to=receiver.entity_id,
                created_at=now,
            )
            self.deliveries[delivery.delivery_id] = delivery
            return delivery

    def get_delivery(self, delivery_id: str) -> Delivery:
        delivery = self.deliveries.get(delivery_id)
        if delivery is None:
            raise UnknownDelivery(f"unknown delivery: {delivery_id}")
        return delivery

    def add_product(self, delivery_id: str, product_id: str, quantity: int,
                    producer: str, now: int) -> Delivery:
        delivery = self.get_delivery(delivery_id)
        if quantity <= 0:
            raise InvalidQuantity("product quantity must be a positive integer")
        product = self.products.get(product_id)
        if product is None:
            raise UnknownProduct(f"unknown product: {product_id}")
        if product.producer != producer:
            raise WrongActor(f"{producer} is not the producer of {product_id}")
        with self._lock:
            if delivery.status != DeliveryStatus.Created:
                raise WrongState(
                    f"add_product requires status Created, found {delivery.status.value}")
            key = (delivery.address_from, product_id)
            held = self.stock.get(key, 0)
            if held < quantity:
                raise InsufficientInventory(
                    f"{delivery.address_from} holds {held} of {product_id}, needs {quantity}")
            self.stock[key] = held - quantity
            self.escrow.setdefault(delivery_id, {})
            self.escrow[delivery_id][product_id] = (
                self.escrow[delivery_id].get(product_id, 0) + quantity)
            delivery.items.append((product_id, quantity))
            delivery.status = DeliveryStatus.Prepared
            delivery.prepared_at = now
            batch = self.batches[product.batch_key]
            if delivery_id not in batch.delivery_ids:
                batch.delivery_ids.append(delivery_id)
            return delivery

    def ship(self, delivery_id: str, actor: str, at: int) -> Delivery:
        delivery = self.get_delivery(delivery_id)
        with self._lock:
            if actor != delivery.address_from:
                raise WrongActor("only the sender may ship a delivery")
            if delivery.status != DeliveryStatus.Prepared:
                raise WrongState(
                    f"ship requires status Prepared, found {delivery.status.value}")
            if delivery.prepared_at is not None and at < delivery.prepared_at:
                raise InvalidTimestamp("shipping time precedes preparation time")
            delivery.status = DeliveryStatus.Shipped
            delivery.shipped_at = at
            return delivery

    def receive(self, delivery_id: str, actor: str, at: int) -> Delivery:
        delivery = self.get_delivery(delivery_id)
        with self._lock:
            if actor != delivery.address_to:
                raise WrongActor("only the receiver may confirm receipt")
            if delivery.status != DeliveryStatus.Shipped:
                raise WrongState(
                    f"receive requires status Shipped, found {delivery.status.value}")
            if delivery.shipped_at is not None and at < delivery.shipped_at:
                raise InvalidTimestamp("receiving time precedes shipping time")
            delivery.status = DeliveryStatus.Received
            delivery.received_at = at
            return delivery

    def post_inbound(self, delivery_id: str, actor: str, now: int
                     ) -> tuple[Delivery, list[InventoryRecord]]:
        """Book inbound stock; completion is automatic, there is no separate call."""
        delivery = self.get_delivery(delivery_id)
        with self._lock:
            if actor != delivery.address_to:
                raise WrongActor("only the receiver may post inbound inventory")
            if delivery.status != DeliveryStatus.Received:
                raise WrongState(
                    f"inbound inventory requires status Received, found {delivery.status.value}")
            updated = []
            in_transit = self.escrow.pop(delivery_id, {})
            for product_id, quantity in in_transit.items():
                key = (delivery.address_to, product_id)
                self.stock[key] = self.stock.get(key, 0) + quantity
                updated.append(InventoryRecord(delivery.address_to, product_id, self.stock[key]))
            delivery.status = DeliveryStatus.Completed
            delivery.completed_at = now
            return delivery, updated

    # -- certificates ---------------------------------------------------------

    def next_certificate_id(self) -> str:
        with self._lock:
            self._cert_seq += 1
            return f"cert-{self._cert_seq:06d}"

    def add_certificate(self, certificate: Certificate) -> None:
        with self._lock:
            self.certificates[certificate.cert_id] = certificate

    # -- read access -------------------------------------------------------------

    def stock_of(self, owner: str, product_id: str | None = None):
        if product_id is not None:
            return self.stock.get((owner, product_id), 0)
        return {pid: qty for (own, pid), qty in self.stock.items() if own == owner and qty}

    def in_transit_of(self, product_id: str) -> int:
        return sum(items.get(product_id, 0) for items in self.escrow.values())

    def total_held(self, product_id: str) -> int:
        return sum(qty for (_, pid), qty in self.stock.items() if pid == product_id)

    def batch_by_triple(self, name: str, production_date: str, batch_number: str) -> Batch | None:
        return self.batches.get(batch_key_of(name, production_date, batch_number))

    # -- state restoration (replay from the off-chain journal) ---------------------

    def restore_mint(self, payload: dict) -> None:
        product_wire = payload["product"]
        product = Product(
            product_id=product_wire["product_id"],
            name=product_wire["name"],
            production_date=product_wire["production_date"],
            batch_number=product_wire["batch_number"],
            producer=product_wire["producer"],
        )
        self.products[product.product_id] = product
        if product.batch_key not in self.batches:
            self.batches[product.batch_key] = Batch(product.batch_key, product.producer)
        self.stock[(product.producer, product.product_id)] = payload["stock_after"]
        self.minted[product.product_id] = payload["minted_total"]

    def restore_delivery_event(self, payload: dict) -> None:
        event = payload["event"]
        if event in ("delivery.created", "delivery.prepared"):
            wire = payload["delivery"]
            delivery = Delivery(
                delivery_id=wire["delivery_id"],
                address_from=wire["address_from"],
                address_to=wire["address_to"],
                items=[(i["product_id"], i["quantity"]) for i in wire["items"]],
                status=DeliveryStatus(wire["status"]),
                created_at=wire["created_at"],
                prepared_at=wire["prepared_at"],
                shipped_at=wire["shipped_at"],
                received_at=wire["received_at"],
                completed_at=wire["completed_at"],
            )
            self.deliveries[delivery.delivery_id] = delivery
            seq = int(delivery.delivery_id.rsplit("-", 1)[1])
            self._delivery_seq = max(self._delivery_seq, seq)
            if event == "delivery.prepared":
                self.escrow[delivery.delivery_id] = dict(payload.get("in_transit", {}))
                snapshot = payload.get("sender_stock")
                if snapshot:
                    self.stock[(snapshot["owner"], snapshot["product_id"])] = snapshot["quantity"]
                for product_id, _ in delivery.items:
                    product = self.products.get(product_id)
                    if product is not None:
                        batch = self.batches[product.batch_key]
                        if delivery.delivery_id not in batch.delivery_ids:
                            batch.delivery_ids.append(delivery.delivery_id)
            return
        delivery = self.deliveries[payload["delivery_id"]]
        delivery.status = DeliveryStatus(payload["status"])
        if event == "delivery.shipped":
            delivery.shipped_at = payload["shipped_at"]
        elif event == "delivery.received":
            delivery.received_at = payload["received_at"]
        elif event == "delivery.completed":
            delivery.completed_at = payload["completed_at"]
            self.escrow.pop(delivery.delivery_id, None)
            for snapshot in payload.get("receiver_stock", []):
                self.stock[(snapshot["owner"], snapshot["product_id"])] = snapshot["quantity"]

    def restore_certificate(self, payload: dict) -> None:
        certificate = Certificate.from_wire(payload["certificate"])
        self.certificates[certificate.cert_id] = certificate
        seq = int(certificate.cert_id.rsplit("-", 1)[1])
        self._cert_seq = max(self._cert_seq, seq)
