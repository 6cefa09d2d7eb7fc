"""Off-chain record store bound to the chains by payload digest.

Full payloads live only here; the chains carry their digests. Every record
points at the sealed transaction it originated from, and consistency
verification recomputes each stored payload's digest against that
transaction. Records are append-only events with a store-wide sequence so
an exported directory can be re-imported in commit order.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional

from . import canonical
from .errors import DigestMismatch, NotFound
from .ledger import Transaction


class RecordKind(str, Enum):
    Entity = "Entity"
    Delivery = "Delivery"
    Inventory = "Inventory"
    Acl = "Acl"
    Certificate = "Certificate"
    Batch = "Batch"


@dataclass(frozen=True)
class OnchainRef:
    chain_key: str
    height: int
    tx_id: bytes

    def to_wire(self) -> dict:
        return {"chain_key": self.chain_key, "height": self.height, "tx_id": self.tx_id.hex()}

    @classmethod
    def from_wire(cls, wire: dict) -> "OnchainRef":
        return cls(wire["chain_key"], wire["height"], bytes.fromhex(wire["tx_id"]))


@dataclass(frozen=True)
class OffchainRecord:
    record_id: str
    kind: RecordKind
    payload: bytes
    ref: OnchainRef
    seq: int = 0
    secondary_keys: tuple[tuple[str, str], ...] = ()

    def payload_value(self):
        return canonical.decode(self.payload)

    def to_wire(self) -> dict:
        return {
            "record_id": self.record_id,
            "kind": self.kind.value,
            "payload_hex": self.payload.hex(),
            "ref": self.ref.to_wire(),
            "seq": self.seq,
            "secondary_keys": [list(k) for k in self.secondary_keys],
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "OffchainRecord":
        return cls(
            record_id=wire["record_id"],
            kind=RecordKind(wire["kind"]),
            payload=bytes.fromhex(wire["payload_hex"]),
            ref=OnchainRef.from_wire(wire["ref"]),
            seq=wire.get("seq", 0),
            secondary_keys=tuple((k, v) for k, v in wire.get("secondary_keys", [])),
        )


@dataclass
class ConsistencyReport:
    checked: int
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def to_wire(self) -> dict:
        return {"checked": self.checked, "mismatches": list(self.mismatches), "ok": self.ok}


TxLookup = Callable[[OnchainRef], Optional[Transaction]]


class OffchainStore:
    """Durable record store with primary-id and kind-specific secondary lookup."""

    def __init__(self, data_dir: str | None = None):
        self._records: dict[str, OffchainRecord] = {}
        self._order: list[str] = []
        self._secondary: dict[tuple[str, str], str] = {}
        self._seq = 0
        self._lock = threading.RLock()
        self.data_dir = data_dir
        if data_dir is not None:
            os.makedirs(os.path.join(data_dir, "store"), exist_ok=True)

    def put(self, record_id: str, kind: RecordKind, payload: bytes, ref: OnchainRef,
            tx_lookup: TxLookup, secondary_keys: tuple[tuple[str, str], ...] = ()) -> OffchainRecord:
        tx = tx_lookup(ref)
        if tx is None:
            raise DigestMismatch(f"originating transaction not sealed for {record_id}")
        if canonical.digest_bytes(payload) != tx.payload_digest:
            raise DigestMismatch(f"payload digest does not match transaction for {record_id}")
        with self._lock:
            self._seq += 1
            record = OffchainRecord(
                record_id=record_id,
                kind=kind,
                payload=payload,
                ref=ref,
                seq=self._seq,
                secondary_keys=secondary_keys,
            )
            self._records[record_id] = record
            self._order.append(record_id)
            for key in secondary_keys:
                self._secondary[key] = record_id
            if self.data_dir is not None:
                path = os.path.join(self.data_dir, "store", f"{kind.value.lower()}.jsonl")
                with open(path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_wire(), sort_keys=True) + "\n")
            return record

    def get(self, record_id: str) -> OffchainRecord:
        record = self._records.get(record_id)
        if record is None:
            raise NotFound(f"no off-chain record: {record_id}")
        return record

    def find_by_key(self, key_kind: str, key_value: str) -> OffchainRecord:
        record_id = self._secondary.get((key_kind, key_value))
        if record_id is None:
            raise NotFound(f"no record for {key_kind}={key_value}")
        return self.get(record_id)

    def records(self, kind: RecordKind | None = None) -> Iterator[OffchainRecord]:
        for record_id in self._order:
            record = self._records[record_id]
            if kind is None or record.kind == kind:
                yield record

    def tamper(self, record_id: str, byte_index: int) -> None:
        """Flip one payload byte in place; used by tamper-evidence checks."""
        record = self.get(record_id)
        mutated = bytearray(record.payload)
        mutated[byte_index % len(mutated)] ^= 0x01
        with self._lock:
            self._records[record_id] = OffchainRecord(
                record_id=record.record_id,
                kind=record.kind,
                payload=bytes(mutated),
                ref=record.ref,
                seq=record.seq,
                secondary_keys=record.secondary_keys,
            )

    def verify_consistency(self, tx_lookup: TxLookup,
                           scope: RecordKind | None = None) -> ConsistencyReport:
        checked = 0
        mismatches = []
        for record in self.records(scope):
            checked += 1
            tx = tx_lookup(record.ref)
            if tx is None or canonical.digest_bytes(record.payload) != tx.payload_digest:
                mismatches.append(record.record_id)
        return ConsistencyReport(checked=checked, mismatches=mismatches)

    # -- export / import ----------------------------------------------------

    def export_dir(self, path: str) -> None:
        os.makedirs(path, exist_ok=True)
        by_kind: dict[str, list[OffchainRecord]] = {}
        for record in self.records():
            by_kind.setdefault(record.kind.value.lower(), []).append(record)
        for kind_name, records in by_kind.items():
            with open(os.path.join(path, f"{kind_name}.jsonl"), "w", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record.to_wire(), sort_keys=True) + "\n")

    def import_dir(self, path: str) -> int:
        loaded: list[OffchainRecord] = []
        for name in sorted(os.listdir(path)):
            if not name.endswith(".jsonl"):
                continue
            with open(os.path.join(path, name), encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        loaded.append(OffchainRecord.from_wire(json.loads(line)))
        loaded.sort(key=lambda r: r.seq)
        with self._lock:
            for record in loaded:
                self._records[record.record_id] = record
                self._order.append(record.record_id)
                for key in record.secondary_keys:
                    self._secondary[key] = record.record_id
                self._seq = max(self._seq, record.seq)
        return len(loaded)
