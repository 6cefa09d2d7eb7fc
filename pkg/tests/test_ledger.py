import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medledger import canonical, crypto
from medledger.canonical import ZERO_DIGEST
from medledger.errors import EmptyBatch, InvalidSignature
from medledger.ledger import (
    Chain,
    ChainId,
    ChainStore,
    Layer,
    TxKind,
    build_transaction,
    check_transaction,
    meter_cost,
)

CHAIN = ChainId(Layer.Local, "alice", "alice")


def make_ring():
    ring = crypto.Keyring("hmac")
    for name in ("alice", "bob", "carol"):
        ring.create(name, seed=name.encode())
    return ring


def resolver(ring):
    return lambda holder: (ring.get(holder).public_key if ring.get(holder) else None)


def make_tx(ring, kind=TxKind.Access, author="alice", cosigners=(), payload=None, ts=1):
    payload_bytes = canonical.encode(payload if payload is not None else {"n": 1})
    return build_transaction(kind, payload_bytes, author, [author, *cosigners], ts, ring.sign)


def test_genesis_seal_on_fresh_chain():
    ring = make_ring()
    chain = Chain(CHAIN)
    block = chain.seal([make_tx(ring)], sealed_at=5, resolve_key=resolver(ring))
    assert block.height == 0
    assert block.prev_hash == ZERO_DIGEST


def test_sequential_seals_link_hashes():
    ring = make_ring()
    chain = Chain(CHAIN)
    b0 = chain.seal([make_tx(ring, ts=1)], 1, resolver(ring))
    b1 = chain.seal([make_tx(ring, ts=2)], 2, resolver(ring))
    assert (b0.height, b1.height) == (0, 1)
    assert b1.prev_hash == b0.block_hash


def test_zeroed_signature_rejected():
    ring = make_ring()
    chain = Chain(CHAIN)
    tx = make_tx(ring)
    bad = tx.__class__(**{**tx.__dict__, "signers": (("alice", b"\x00" * 64),)})
    with pytest.raises(InvalidSignature):
        chain.seal([bad], 1, resolver(ring))


def test_empty_batch_rejected():
    chain = Chain(CHAIN)
    with pytest.raises(EmptyBatch):
        chain.seal([], 1, resolver(make_ring()))


def test_verify_honest_ten_block_chain():
    ring = make_ring()
    chain = Chain(CHAIN)
    for i in range(10):
        chain.seal([make_tx(ring, ts=i + 1, payload={"n": i})], i + 1, resolver(ring))
    report = chain.verify(resolver(ring))
    assert report.ok and report.first_bad_height is None


def test_verify_reports_tampered_height():
    ring = make_ring()
    chain = Chain(CHAIN)
    txs = []
    for i in range(10):
        tx = make_tx(ring, ts=i + 1, payload={"n": i})
        txs.append(tx)
        chain.seal([tx], i + 1, resolver(ring))
    # Flip one byte of block 4's stored transaction payload digest.
    record = bytearray(chain.records[4])
    offset = record.index(txs[4].payload_digest)
    record[offset] ^= 0x01
    chain.records[4] = bytes(record)
    report = chain.verify(resolver(ring))
    assert not report.ok
    assert report.first_bad_height == 4


def test_verify_empty_chain_is_vacuously_ok():
    report = Chain(CHAIN).verify(resolver(make_ring()))
    assert report.ok and report.first_bad_height is None


def test_query_with_empty_payload_costs_base_exactly():
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Query, payload={})
    # Canonical encoding of {} is 5 bytes; an empty byte payload is truly empty.
    empty = build_transaction(TxKind.Query, b"", "alice", ["alice"], 1, ring.sign)
    assert meter_cost(empty) == 100
    assert empty.cost_units == 100
    assert meter_cost(tx) == 100 + tx.payload_size


def test_meter_is_pure_function_of_tx():
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Send, cosigners=("bob", "carol"), payload={"x": "y"})
    assert meter_cost(tx) == meter_cost(tx) == tx.cost_units
    assert tx.cost_units == 500 + tx.payload_size + 2 * 50


@given(st.integers(min_value=0, max_value=1 << 40), st.text(max_size=20))
@settings(max_examples=50)
def test_single_signer_send_always_rejected(ts, label):
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Send, payload={"label": label}, ts=ts)
    assert check_transaction(tx, resolver(ring)) is not None
    with pytest.raises(InvalidSignature):
        Chain(CHAIN).seal([tx], 1, resolver(ring))


def test_multi_signer_query_rejected():
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Query, cosigners=("bob",))
    assert check_transaction(tx, resolver(ring)) is not None


def test_send_author_must_be_a_signer():
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Send, author="alice", cosigners=("bob",))
    hijacked = tx.__class__(**{**tx.__dict__, "author": "carol"})
    assert check_transaction(hijacked, resolver(ring)) is not None


def test_classifier_blocks_unpermitted_kinds():
    ring = make_ring()
    tx = make_tx(ring, kind=TxKind.Send, cosigners=("bob",))
    deny_send = lambda author: {TxKind.Query, TxKind.Access}
    assert "not permitted" in check_transaction(tx, resolver(ring), deny_send)
    assert check_transaction(tx, resolver(ring), lambda a: {TxKind.Send}) is None


@given(st.lists(st.dictionaries(st.text(max_size=6),
                                st.integers(min_value=0, max_value=1 << 30),
                                max_size=4),
                min_size=1, max_size=4))
@settings(max_examples=40)
def test_block_round_trip_preserves_hash(payloads):
    ring = make_ring()
    chain = Chain(CHAIN)
    for i, payload in enumerate(payloads):
        chain.seal([make_tx(ring, ts=i + 1, payload=payload)], i + 1, resolver(ring))
    for height in range(len(payloads)):
        decoded = chain.block_at(height)
        re_encoded = canonical.encode(canonical.decode(chain.records[height]))
        assert re_encoded == chain.records[height]
        assert decoded.block_hash == chain.header_at(height, resolver(ring)).block_hash


def test_chain_file_round_trip_and_disk_tamper(tmp_path):
    ring = make_ring()
    store = ChainStore(str(tmp_path))
    chain = store.create(CHAIN)
    txs = []
    for i in range(4):
        tx = make_tx(ring, ts=i + 1, payload={"n": i})
        txs.append(tx)
        chain.seal([tx], i + 1, resolver(ring))

    reloaded = ChainStore()
    reloaded.load_dir(str(tmp_path))
    copy = reloaded.get(CHAIN.key)
    assert copy.records == chain.records
    assert copy.head_hash == chain.head_hash
    assert copy.verify(resolver(ring)).ok

    # Flip one content byte (block 2's stored payload digest) on disk.
    path = tmp_path / "chains" / f"{CHAIN.key}.chain"
    pristine = path.read_bytes()
    raw = bytearray(pristine)
    raw[raw.index(txs[2].payload_digest)] ^= 0x01
    path.write_bytes(bytes(raw))
    tampered = ChainStore()
    tampered.load_dir(str(tmp_path))
    report = tampered.get(CHAIN.key).verify(resolver(ring))
    assert not report.ok and report.first_bad_height == 2

    # A structural flip still loads; verification reports the broken record.
    raw = bytearray(pristine)
    raw[8] ^= 0x01
    path.write_bytes(bytes(raw))
    mangled = ChainStore()
    mangled.load_dir(str(tmp_path))
    report = mangled.get(CHAIN.key).verify(resolver(ring))
    assert not report.ok and report.first_bad_height == 0
