"""Batch traceability with on-chain verification of every returned record.

A trace looks up the batch by its exact (name, production date, batch
number) triple and returns every delivery recorded under it, oldest shipment
first. Each hop is cross-checked: the stored event payloads must hash to the
digests carried by their sealed transactions, and the recomputed block hash
must match the header anchored on the global chain. In strict mode a failing
hop aborts the trace; otherwise the hop is returned flagged unverified so a
viewer can render it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from . import canonical
from .access import DataClass, Permission, ResourceScope
from .errors import AccessDenied, ItemNotFound, NotFound, VerificationFailed
from .supply import Delivery, DeliveryStatus

if TYPE_CHECKING:
    from .engine import SupplyChainEngine

_EVENTS_BY_STATUS = {
    DeliveryStatus.Created: ("created",),
    DeliveryStatus.Prepared: ("created", "prepared"),
    DeliveryStatus.Shipped: ("created", "prepared", "shipped"),
    DeliveryStatus.Received: ("created", "prepared", "shipped", "received"),
    DeliveryStatus.Completed: ("created", "prepared", "shipped", "received", "completed"),
}


@dataclass
class TraceHop:
    delivery_id: str
    address_from: str
    address_to: str
    shipped_at: Optional[int]
    received_at: Optional[int]
    status: str
    verified: bool
    failure: Optional[str] = None
    proof: list = field(default_factory=list)

    def to_wire(self) -> dict:
        return {
            "delivery_id": self.delivery_id,
            "address_from": self.address_from,
            "address_to": self.address_to,
            "shipped_at": self.shipped_at,
            "received_at": self.received_at,
            "status": self.status,
            "verified": self.verified,
            "failure": self.failure,
            "proof": list(self.proof),
        }


@dataclass
class TraceReport:
    batch_key: str
    hops: list[TraceHop]
    verified: bool

    def to_wire(self) -> dict:
        return {
            "batch_key": self.batch_key,
            "hops": [hop.to_wire() for hop in self.hops],
            "verified": self.verified,
            "confirmation": True,
        }


def hop_sort_key(delivery: Delivery) -> tuple:
    return (delivery.shipped_at is None, delivery.shipped_at or 0, delivery.delivery_id)


class TraceEngine:
    """Read-only: traces never mutate a chain or the store."""

    def __init__(self, engine: "SupplyChainEngine"):
        self._engine = engine

    def _check_access(self, requester: str, producer_chain, now: int) -> None:
        engine = self._engine
        if engine.registry.maybe_get(requester) is None:
            raise AccessDenied(f"requester {requester} is not a registered member")
        allowed = engine.access.evaluate(
            requester, ResourceScope(producer_chain, DataClass.ShipmentTracking),
            Permission.Read, now).allow
        if not allowed:
            allowed = engine.access.evaluate(
                requester,
                ResourceScope(engine.global_chain_id, DataClass.ShipmentTracking),
                Permission.Read, now).allow
        if not allowed:
            raise AccessDenied("no shipment-tracking read access for this batch")

    def _validate_requester(self, requester: str, producer_chain) -> None:
        engine = self._engine
        chain = engine.chains.get(producer_chain.key)
        if chain.height < 0:
            return
        claimed = engine.header_of(producer_chain.key, chain.height)
        result = engine.topology.validate_request(
            requester, engine.global_chain_id, claimed, engine.access,
            engine.clock.now_ms())
        if result.ok:
            return
        if result.reason == "HeaderMismatch":
            raise VerificationFailed(
                f"chain {producer_chain.key} head does not match its anchored header")
        raise AccessDenied(f"request validation failed: {result.reason}")

    def trace(self, requester: str, name: str, production_date: str,
              batch_number: str, strict: bool = True) -> TraceReport:
        engine = self._engine
        batch = engine.supply.batch_by_triple(name, production_date, batch_number)
        if batch is None:
            raise ItemNotFound(
                f"no batch matches ({name!r}, {production_date!r}, {batch_number!r})")
        producer = engine.registry.get(batch.producer)
        now = engine.clock.now_ms()
        self._check_access(requester, producer.chain_address, now)
        self._validate_requester(requester, producer.chain_address)

        deliveries = [engine.supply.get_delivery(d) for d in batch.delivery_ids]
        deliveries.sort(key=hop_sort_key)
        hops = [self._verify_hop(delivery) for delivery in deliveries]
        if strict:
            for hop in hops:
                if not hop.verified:
                    raise VerificationFailed(
                        f"hop {hop.delivery_id} contradicts the chain: {hop.failure}",
                        delivery_id=hop.delivery_id)
        return TraceReport(batch_key=batch.batch_key, hops=hops,
                           verified=all(h.verified for h in hops))

    def _verify_hop(self, delivery: Delivery) -> TraceHop:
        engine = self._engine
        hop = TraceHop(
            delivery_id=delivery.delivery_id,
            address_from=delivery.address_from,
            address_to=delivery.address_to,
            shipped_at=delivery.shipped_at,
            received_at=delivery.received_at,
            status=delivery.status.value,
            verified=True,
        )
        for event in _EVENTS_BY_STATUS[delivery.status]:
            record_id = f"delivery:{delivery.delivery_id}:{event}"
            try:
                record = engine.store.get(record_id)
            except NotFound:
                hop.verified = False
                hop.failure = f"missing off-chain record {record_id}"
                return hop
            tx = engine.tx_lookup(record.ref)
            if tx is None:
                hop.verified = False
                hop.failure = f"transaction missing for {record_id}"
                return hop
            if canonical.digest_bytes(record.payload) != tx.payload_digest:
                hop.verified = False
                hop.failure = f"off-chain payload digest mismatch for {record_id}"
                return hop
            header = engine.header_of(record.ref.chain_key, record.ref.height)
            anchored = engine.topology.anchor_at(record.ref.chain_key, record.ref.height)
            if anchored is None or anchored.header.block_hash != header.block_hash:
                hop.verified = False
                hop.failure = f"block {record.ref.chain_key}:{record.ref.height} does not match anchor"
                return hop
            hop.proof.append({
                "record_id": record_id,
                "block": record.ref.to_wire(),
                "header": anchored.header.to_wire(),
            })
        return hop
