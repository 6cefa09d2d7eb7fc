"""Hash-chained append-only ledgers, signed transactions, and cost metering.

A chain's authoritative storage is the list of length-prefixed canonical
records (`Chain.records`); decoded blocks are views recomputed from those
bytes, so any byte-level tampering surfaces on the next read or verify pass.
"""

from __future__ import annotations

import dataclasses
import os
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Optional

from . import canonical
from .canonical import ZERO_DIGEST
from .crypto import verify_signature
from .errors import EmptyBatch, InvalidSignature, UnknownChain

# Fixed cost-model constants; only orderings between metered operations are
# meaningful, the absolute values are arbitrary.
COST_BASE = {"Query": 100, "Access": 200, "Send": 500}
COST_PER_PAYLOAD_BYTE = 1
COST_PER_EXTRA_SIGNER = 50


class TxKind(str, Enum):
    Query = "Query"
    Access = "Access"
    Send = "Send"


class Layer(str, Enum):
    Local = "Local"
    Global = "Global"


@dataclass(frozen=True)
class ChainId:
    layer: Layer
    owner: str
    label: str

    @property
    def key(self) -> str:
        return self.label

    def to_wire(self) -> dict:
        return {"layer": self.layer.value, "owner": self.owner, "label": self.label}

    @classmethod
    def from_wire(cls, wire: dict) -> "ChainId":
        return cls(Layer(wire["layer"]), wire["owner"], wire["label"])


@dataclass(frozen=True)
class Transaction:
    tx_id: bytes
    kind: TxKind
    payload_digest: bytes
    author: str
    signers: tuple[tuple[str, bytes], ...]
    timestamp: int
    payload_size: int
    cost_units: int

    def to_wire(self) -> dict:
        return {
            "tx_id": self.tx_id.hex(),
            "kind": self.kind.value,
            "payload_digest": self.payload_digest.hex(),
            "author": self.author,
            "signers": [{"signer": s, "signature": sig.hex()} for s, sig in self.signers],
            "timestamp": self.timestamp,
            "payload_size": self.payload_size,
            "cost_units": self.cost_units,
        }

    def to_record(self) -> dict:
        return {
            "tx_id": self.tx_id,
            "kind": self.kind.value,
            "payload_digest": self.payload_digest,
            "author": self.author,
            "signers": [[s, sig] for s, sig in self.signers],
            "timestamp": self.timestamp,
            "payload_size": self.payload_size,
            "cost_units": self.cost_units,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Transaction":
        return cls(
            tx_id=rec["tx_id"],
            kind=TxKind(rec["kind"]),
            payload_digest=rec["payload_digest"],
            author=rec["author"],
            signers=tuple((s, sig) for s, sig in rec["signers"]),
            timestamp=rec["timestamp"],
            payload_size=rec["payload_size"],
            cost_units=rec["cost_units"],
        )


def tx_core_digest(kind: TxKind, payload_digest: bytes, author: str,
                   signer_ids: list[str], timestamp: int) -> bytes:
    """The transaction id: digest over kind, payload digest, author, sorted signer ids, timestamp."""
    return canonical.digest({
        "author": author,
        "kind": kind.value,
        "payload_digest": payload_digest,
        "signer_ids": sorted(signer_ids),
        "timestamp": timestamp,
    })


def meter_cost(tx: Transaction) -> int:
    """Deterministic cost: base(kind) + per-byte rate x payload size + per-extra-signer surcharge."""
    return (
        COST_BASE[tx.kind.value]
        + COST_PER_PAYLOAD_BYTE * tx.payload_size
        + COST_PER_EXTRA_SIGNER * (len(tx.signers) - 1)
    )


def build_transaction(kind: TxKind, payload_bytes: bytes, author: str,
                      signer_ids: list[str], timestamp: int,
                      sign: Callable[[str, bytes], bytes]) -> Transaction:
    """Assemble and sign a transaction; every signer signs the tx id."""
    payload_digest = canonical.digest_bytes(payload_bytes)
    tx_id = tx_core_digest(kind, payload_digest, author, signer_ids, timestamp)
    signers = tuple((sid, sign(sid, tx_id)) for sid in signer_ids)
    tx = Transaction(
        tx_id=tx_id,
        kind=kind,
        payload_digest=payload_digest,
        author=author,
        signers=signers,
        timestamp=timestamp,
        payload_size=len(payload_bytes),
        cost_units=0,
    )
    return dataclasses.replace(tx, cost_units=meter_cost(tx))


KeyResolver = Callable[[str], Optional[str]]
Classifier = Callable[[str], Optional[set]]


def check_transaction(tx: Transaction, resolve_key: KeyResolver,
                      classify: Classifier | None = None) -> str | None:
    """Return a failure reason, or None when the transaction verifies.

    Checks: tx id recomputation, signer-count rules (Send needs >= 2 distinct
    signers, Query/Access exactly one signer who is the author), signature
    validity against the registered keys, author authorisation for the kind,
    and cost recomputation.
    """
    signer_ids = [s for s, _ in tx.signers]
    if tx.tx_id != tx_core_digest(tx.kind, tx.payload_digest, tx.author, signer_ids, tx.timestamp):
        return "tx_id mismatch"
    distinct = set(signer_ids)
    if len(distinct) != len(signer_ids):
        return "duplicate signer"
    if tx.kind == TxKind.Send:
        if len(signer_ids) < 2:
            return "Send requires at least 2 distinct signers"
        if tx.author not in distinct:
            return "author missing from signers"
    else:
        if len(signer_ids) != 1 or signer_ids[0] != tx.author:
            return f"{tx.kind.value} requires exactly one signer (the author)"
    if classify is not None:
        permitted = classify(tx.author)
        if permitted is None:
            return f"unknown author {tx.author}"
        if tx.kind not in permitted:
            return f"author not permitted to write {tx.kind.value} transactions"
    for signer_id, signature in tx.signers:
        public_key = resolve_key(signer_id)
        if public_key is None:
            return f"unknown signer {signer_id}"
        if not verify_signature(public_key, signature, tx.tx_id):
            return f"bad signature from {signer_id}"
    if tx.payload_size < 0 or tx.cost_units != meter_cost(tx):
        return "cost mismatch"
    return None


@dataclass(frozen=True)
class BlockHeader:
    chain_id: ChainId
    height: int
    block_hash: bytes
    owner: str
    timestamp: int

    def to_wire(self) -> dict:
        return {
            "chain_id": self.chain_id.to_wire(),
            "height": self.height,
            "block_hash": self.block_hash.hex(),
            "owner": self.owner,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "BlockHeader":
        return cls(
            chain_id=ChainId.from_wire(wire["chain_id"]),
            height=wire["height"],
            block_hash=bytes.fromhex(wire["block_hash"]),
            owner=wire["owner"],
            timestamp=wire["timestamp"],
        )


@dataclass(frozen=True)
class Block:
    chain_id: ChainId
    height: int
    prev_hash: bytes
    tx_root: bytes
    transactions: tuple[Transaction, ...]
    sealed_at: int
    block_hash: bytes

    def header(self) -> BlockHeader:
        return BlockHeader(
            chain_id=self.chain_id,
            height=self.height,
            block_hash=self.block_hash,
            owner=self.chain_id.owner,
            timestamp=self.sealed_at,
        )

    def to_wire(self) -> dict:
        return {
            "chain_id": self.chain_id.to_wire(),
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "tx_root": self.tx_root.hex(),
            "transactions": [tx.to_wire() for tx in self.transactions],
            "sealed_at": self.sealed_at,
            "block_hash": self.block_hash.hex(),
        }


def _tx_root(tx_ids: list[bytes]) -> bytes:
    return canonical.digest(list(tx_ids))


def block_hash_of(chain_id: ChainId, height: int, prev_hash: bytes,
                  tx_root: bytes, sealed_at: int) -> bytes:
    return canonical.digest({
        "chain_id": chain_id.to_wire(),
        "height": height,
        "prev_hash": prev_hash,
        "sealed_at": sealed_at,
        "tx_root": tx_root,
    })


def _block_record(block: Block) -> dict:
    return {
        "chain_id": block.chain_id.to_wire(),
        "height": block.height,
        "prev_hash": block.prev_hash,
        "tx_root": block.tx_root,
        "transactions": [tx.to_record() for tx in block.transactions],
        "sealed_at": block.sealed_at,
        "block_hash": block.block_hash,
    }


def _block_from_record(rec: dict) -> Block:
    return Block(
        chain_id=ChainId.from_wire(rec["chain_id"]),
        height=rec["height"],
        prev_hash=rec["prev_hash"],
        tx_root=rec["tx_root"],
        transactions=tuple(Transaction.from_record(t) for t in rec["transactions"]),
        sealed_at=rec["sealed_at"],
        block_hash=rec["block_hash"],
    )


@dataclass
class VerificationReport:
    ok: bool
    first_bad_height: int | None = None
    detail: str | None = None

    def to_wire(self) -> dict:
        return {"ok": self.ok, "first_bad_height": self.first_bad_height, "detail": self.detail}


class Chain:
    """A serial append domain: one writer at a time, reads decode from storage."""

    def __init__(self, chain_id: ChainId, file_path: str | None = None):
        self.chain_id = chain_id
        self.records: list[bytes] = []
        self.lock = threading.RLock()
        self._head_hash = ZERO_DIGEST
        self._file_path = file_path

    @property
    def height(self) -> int:
        return len(self.records) - 1

    @property
    def head_hash(self) -> bytes:
        return self._head_hash

    def seal(self, txs: list[Transaction], sealed_at: int,
             resolve_key: KeyResolver, classify: Classifier | None = None) -> Block:
        if not txs:
            raise EmptyBatch("cannot seal an empty transaction batch")
        for tx in txs:
            reason = check_transaction(tx, resolve_key, classify)
            if reason is not None:
                raise InvalidSignature(f"transaction rejected: {reason}",
                                       tx_id=tx.tx_id.hex())
        with self.lock:
            height = len(self.records)
            prev_hash = self._head_hash if height > 0 else ZERO_DIGEST
            tx_root = _tx_root([tx.tx_id for tx in txs])
            block_hash = block_hash_of(self.chain_id, height, prev_hash, tx_root, sealed_at)
            block = Block(
                chain_id=self.chain_id,
                height=height,
                prev_hash=prev_hash,
                tx_root=tx_root,
                transactions=tuple(txs),
                sealed_at=sealed_at,
                block_hash=block_hash,
            )
            record = canonical.encode(_block_record(block))
            self.records.append(record)
            self._head_hash = block_hash
            if self._file_path is not None:
                with open(self._file_path, "ab") as fh:
                    fh.write(len(record).to_bytes(4, "big"))
                    fh.write(record)
            return block

    def block_at(self, height: int) -> Block:
        if height < 0 or height >= len(self.records):
            raise UnknownChain(f"no block at height {height} on {self.chain_id.key}")
        return _block_from_record(canonical.decode(self.records[height]))

    def blocks(self) -> Iterator[Block]:
        for height in range(len(self.records)):
            yield self.block_at(height)

    def header_at(self, height: int, resolve_key: KeyResolver | None = None,
                  classify: Classifier | None = None) -> BlockHeader:
        """Derive the header from current storage, not from seal-time state.

        The header is only meaningful if the stored record passes full
        self-verification; a record that fails any check yields a header
        whose hash is the digest of the raw corrupt bytes, which cannot
        match the anchored header.
        """
        if height < 0 or height >= len(self.records):
            raise UnknownChain(f"no block at height {height} on {self.chain_id.key}")
        record = self.records[height]
        reason, block = self._check_record(height, record, None, resolve_key, classify)
        if reason is None and block is not None:
            return BlockHeader(self.chain_id, height, block.block_hash,
                               self.chain_id.owner, block.sealed_at)
        return BlockHeader(self.chain_id, height, canonical.digest_bytes(record),
                           self.chain_id.owner, 0)

    def find_tx(self, height: int, tx_id: bytes) -> Transaction | None:
        try:
            block = self.block_at(height)
        except (UnknownChain, canonical.EncodingError):
            return None
        for tx in block.transactions:
            if tx.tx_id == tx_id:
                return tx
        return None

    def _check_record(self, height: int, record: bytes, prev_hash: bytes | None,
                      resolve_key: KeyResolver | None,
                      classify: Classifier | None) -> tuple[str | None, Block | None]:
        """Full self-verification of one stored record; prev link checked when given."""
        try:
            block = _block_from_record(canonical.decode(record))
        except (canonical.EncodingError, KeyError, TypeError, ValueError, AttributeError):
            return "record does not decode", None
        if block.height != height:
            return "stored height mismatch", block
        if prev_hash is not None and block.prev_hash != prev_hash:
            return "prev_hash link broken", block
        if block.chain_id != self.chain_id:
            return "chain id mismatch", block
        recomputed = block_hash_of(block.chain_id, block.height, block.prev_hash,
                                   block.tx_root, block.sealed_at)
        if recomputed != block.block_hash:
            return "block hash mismatch", block
        if _tx_root([tx.tx_id for tx in block.transactions]) != block.tx_root:
            return "tx root mismatch", block
        if resolve_key is not None:
            for tx in block.transactions:
                reason = check_transaction(tx, resolve_key, classify)
                if reason is not None:
                    return reason, block
        return None, block

    def verify(self, resolve_key: KeyResolver,
               classify: Classifier | None = None) -> VerificationReport:
        """Recompute every digest and signature from storage; empty chains are vacuously ok."""
        prev_recomputed = ZERO_DIGEST
        for height, record in enumerate(self.records):
            reason, block = self._check_record(height, record, prev_recomputed,
                                               resolve_key, classify)
            if reason is not None:
                return VerificationReport(False, height, reason)
            assert block is not None
            prev_recomputed = block.block_hash
        return VerificationReport(True, None, None)


def _chain_file_name(chain_id: ChainId) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in chain_id.key)
    return f"{safe}.chain"


class ChainStore:
    """All chains of one deployment, optionally mirrored to append-only files."""

    def __init__(self, data_dir: str | None = None):
        self._chains: dict[str, Chain] = {}
        self._lock = threading.Lock()
        self.data_dir = data_dir
        if data_dir is not None:
            os.makedirs(os.path.join(data_dir, "chains"), exist_ok=True)

    def create(self, chain_id: ChainId) -> Chain:
        with self._lock:
            if chain_id.key in self._chains:
                raise ValueError(f"chain {chain_id.key} already exists")
            path = None
            if self.data_dir is not None:
                path = os.path.join(self.data_dir, "chains", _chain_file_name(chain_id))
                open(path, "ab").close()
            chain = Chain(chain_id, file_path=path)
            self._chains[chain_id.key] = chain
            return chain

    def get(self, key: str) -> Chain:
        chain = self._chains.get(key)
        if chain is None:
            raise UnknownChain(f"unknown chain: {key}")
        return chain

    def all(self) -> list[Chain]:
        return list(self._chains.values())

    def load_dir(self, data_dir: str) -> None:
        """Rebuild chains from on-disk append-only files.

        Corrupt records are loaded as-is so verification can pinpoint them;
        a file where no record identifies its chain is unreadable.
        """
        chain_dir = os.path.join(data_dir, "chains")
        if not os.path.isdir(chain_dir):
            return
        for name in sorted(os.listdir(chain_dir)):
            if not name.endswith(".chain"):
                continue
            records = _read_chain_file(os.path.join(chain_dir, name))
            if not records:
                continue
            chain_id = None
            head_hash = ZERO_DIGEST
            for record in records:
                try:
                    block = _block_from_record(canonical.decode(record))
                except (canonical.EncodingError, KeyError, TypeError, ValueError):
                    continue
                if chain_id is None:
                    chain_id = block.chain_id
                head_hash = block.block_hash
            if chain_id is None:
                raise canonical.EncodingError(f"no readable record in {name}")
            chain = Chain(chain_id, file_path=os.path.join(chain_dir, name))
            chain.records = records
            chain._head_hash = head_hash
            with self._lock:
                self._chains[chain_id.key] = chain


def _read_chain_file(path: str) -> list[bytes]:
    records = []
    with open(path, "rb") as fh:
        data = fh.read()
    offset = 0
    while offset < len(data):
        if offset + 4 > len(data):
            raise canonical.EncodingError(f"truncated length prefix in {path}")
        length = int.from_bytes(data[offset:offset + 4], "big")
        offset += 4
        if offset + length > len(data):
            raise canonical.EncodingError(f"truncated record in {path}")
        records.append(data[offset:offset + length])
        offset += length
    return records
