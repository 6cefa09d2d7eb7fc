"""Three-layer wiring: header anchoring, request validation, relay channels.

Every sealed local block publishes its header to the global chain, forming a
gap-free anchored sequence per local chain. Third parties verify local data
against those anchors instead of reading the local chains directly. Relay
channels are the authenticated, in-order message paths between parties.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Optional

from . import canonical
from .access import AccessControl, DataClass, Permission, ResourceScope
from .crypto import verify_signature
from .errors import BadSignature, HeightGap, OwnerMismatch, UnknownEndpoint
from .ledger import BlockHeader, ChainId, Layer, TxKind
from .registry import Registry


@dataclass(frozen=True)
class AnchorRecord:
    header: BlockHeader
    anchored_at: int
    anchor_tx: bytes

    def to_wire(self) -> dict:
        return {
            "header": self.header.to_wire(),
            "anchored_at": self.anchored_at,
            "anchor_tx": self.anchor_tx.hex(),
        }


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reason: Optional[str] = None  # UnknownRequester | HeaderMismatch | AccessDenied
    token: Optional[dict] = None

    def to_wire(self) -> dict:
        return {"ok": self.ok, "reason": self.reason, "token": self.token}


@dataclass(frozen=True)
class DeliveryReceipt:
    channel: tuple[str, str]
    nonce: str
    payload_digest: bytes
    seq: int
    delivered_at: int

    def to_wire(self) -> dict:
        return {
            "channel": list(self.channel),
            "nonce": self.nonce,
            "payload_digest": self.payload_digest.hex(),
            "seq": self.seq,
            "delivered_at": self.delivered_at,
        }


def relay_signing_bytes(sender: str, recipient: str, nonce: str, payload: bytes) -> bytes:
    return canonical.digest({
        "nonce": nonce,
        "payload": payload,
        "recipient": recipient,
        "sender": sender,
    })


class Topology:
    """Anchor index and relay channels over one global chain."""

    def __init__(self, registry: Registry, global_chain_id: ChainId):
        self._registry = registry
        self.global_chain_id = global_chain_id
        self._anchors: dict[str, list[AnchorRecord]] = {}
        self._receipts: dict[tuple[str, str, str], DeliveryReceipt] = {}
        self._channel_seq: dict[tuple[str, str], int] = {}
        self._lock = threading.RLock()
        self.relay_log: list[dict] = []

    # -- anchoring --------------------------------------------------------

    def check_anchor(self, local_chain: ChainId, header: BlockHeader) -> None:
        anchored = self._anchors.get(local_chain.key, [])
        expected = len(anchored)
        if header.height != expected:
            raise HeightGap(
                f"expected header height {expected} for {local_chain.key}, got {header.height}")
        if header.owner != local_chain.owner:
            raise OwnerMismatch(
                f"header owner {header.owner} does not operate chain {local_chain.key}")

    def record_anchor(self, local_chain: ChainId, header: BlockHeader,
                      anchor_tx: bytes, anchored_at: int) -> AnchorRecord:
        record = AnchorRecord(header=header, anchored_at=anchored_at, anchor_tx=anchor_tx)
        with self._lock:
            self._anchors.setdefault(local_chain.key, []).append(record)
        return record

    def anchors_of(self, chain_key: str) -> list[AnchorRecord]:
        return list(self._anchors.get(chain_key, []))

    def anchor_at(self, chain_key: str, height: int) -> AnchorRecord | None:
        anchored = self._anchors.get(chain_key, [])
        if 0 <= height < len(anchored):
            return anchored[height]
        return None

    # -- validation contract (VLC) ------------------------------------------

    def validate_request(self, requester: str, target: ChainId, claimed_header: BlockHeader,
                         access: AccessControl, now: int,
                         data_class: DataClass = DataClass.All,
                         permission: Permission = Permission.Read) -> ValidationResult:
        requester_record = self._registry.maybe_get(requester)
        if requester_record is None:
            return ValidationResult(False, "UnknownRequester")
        if TxKind.Query not in self._registry.classify(requester).permitted_tx_kinds:
            return ValidationResult(False, "UnknownRequester")

        anchored = self.anchor_at(claimed_header.chain_id.key, claimed_header.height)
        if anchored is None:
            return ValidationResult(False, "HeaderMismatch")
        if anchored.header.block_hash != claimed_header.block_hash:
            return ValidationResult(False, "HeaderMismatch")
        owner_record = self._registry.maybe_get(claimed_header.owner)
        if owner_record is None or anchored.header.owner != claimed_header.owner:
            return ValidationResult(False, "HeaderMismatch")
        if (owner_record.chain_address is None
                or owner_record.chain_address.key != claimed_header.chain_id.key):
            return ValidationResult(False, "HeaderMismatch")

        if target.layer == Layer.Local:
            decision = access.evaluate(
                requester, ResourceScope(target, data_class), permission, now)
            if not decision.allow:
                return ValidationResult(False, "AccessDenied")

        token = {
            "requester": requester,
            "header": claimed_header.to_wire(),
            "owner": claimed_header.owner,
            "validated_at": now,
        }
        return ValidationResult(True, None, token)

    # -- relay channels (authenticated stand-ins for the cross-party links) --

    def relay(self, sender: str, recipient: str, payload: bytes, nonce: str,
              signature: bytes, now: int) -> DeliveryReceipt:
        if self._registry.maybe_get(sender) is None or self._registry.maybe_get(recipient) is None:
            raise UnknownEndpoint("both relay endpoints must be registered")
        key = (sender, recipient, nonce)
        with self._lock:
            existing = self._receipts.get(key)
            if existing is not None:
                return existing
            public_key = self._registry.public_key_of(sender)
            message = relay_signing_bytes(sender, recipient, nonce, payload)
            if public_key is None or not verify_signature(public_key, signature, message):
                raise BadSignature("relay payload not signed by sender")
            channel = (sender, recipient)
            seq = self._channel_seq.get(channel, 0) + 1
            self._channel_seq[channel] = seq
            receipt = DeliveryReceipt(
                channel=channel,
                nonce=nonce,
                payload_digest=canonical.digest_bytes(payload),
                seq=seq,
                delivered_at=now,
            )
            self._receipts[key] = receipt
            self.relay_log.append({"type": "relay.delivered", **receipt.to_wire()})
            return receipt
