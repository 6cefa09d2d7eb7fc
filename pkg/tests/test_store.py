import pytest

from helpers import run_delivery
from medledger import canonical
from medledger.errors import DigestMismatch, NotFound
from medledger.store import OffchainStore, OnchainRef, RecordKind


def test_put_get_round_trip(pair):
    engine = pair["engine"]
    record = engine.store.find_by_key("email", "acme@pair.ex")
    assert engine.store.get(record.record_id).payload == record.payload
    assert record.payload_value()["record"]["email"] == "acme@pair.ex"


def test_put_with_wrong_digest_rejected(pair):
    engine = pair["engine"]
    existing = engine.store.find_by_key("email", "acme@pair.ex")
    with pytest.raises(DigestMismatch):
        engine.store.put("bogus:1", RecordKind.Entity, b"other-bytes", existing.ref,
                         engine.tx_lookup)


def test_put_requires_sealed_transaction(pair):
    engine = pair["engine"]
    payload = canonical.encode({"x": 1})
    dangling = OnchainRef("global", 999, b"\x00" * 32)
    with pytest.raises(DigestMismatch):
        engine.store.put("bogus:2", RecordKind.Entity, payload, dangling,
                         engine.tx_lookup)


def test_secondary_key_returns_same_record_as_primary(pair):
    engine = pair["engine"]
    batch_key = "|".join(pair["batch"])
    by_key = engine.store.find_by_key("batch", batch_key)
    assert engine.store.get(by_key.record_id) is by_key
    delivery = run_delivery(engine, pair["m"], pair["d"], pair["product_id"], 10,
                            stage="prepared")
    latest = engine.store.find_by_key("delivery", delivery["delivery_id"])
    assert latest.record_id == f"delivery:{delivery['delivery_id']}:prepared"


def test_clean_store_verifies(pair):
    engine = pair["engine"]
    report = engine.store.verify_consistency(engine.tx_lookup)
    assert report.ok and report.mismatches == []
    assert report.checked == sum(1 for _ in engine.store.records())


def test_single_byte_flip_names_exactly_that_record(pair):
    engine = pair["engine"]
    run_delivery(engine, pair["m"], pair["d"], pair["product_id"], 10)
    victims = [r.record_id for r in engine.store.records(RecordKind.Delivery)]
    target = victims[2]
    engine.store.tamper(target, byte_index=7)
    report = engine.store.verify_consistency(engine.tx_lookup)
    assert report.mismatches == [target]
    engine.store.tamper(target, byte_index=7)  # flip back
    assert engine.store.verify_consistency(engine.tx_lookup).ok


def test_dangling_onchain_ref_reported(pair):
    engine = pair["engine"]
    record = engine.store.find_by_key("email", "distro@pair.ex")
    broken = OnchainRef("no-such-chain", 0, record.ref.tx_id)
    object.__setattr__(record, "ref", broken)
    report = engine.store.verify_consistency(engine.tx_lookup)
    assert record.record_id in report.mismatches


def test_scoped_verification(pair):
    engine = pair["engine"]
    report = engine.store.verify_consistency(engine.tx_lookup, RecordKind.Entity)
    kinds = {r.kind for r in engine.store.records(RecordKind.Entity)}
    assert kinds == {RecordKind.Entity}
    assert report.checked == sum(1 for _ in engine.store.records(RecordKind.Entity))


def test_get_unknown_record(pair):
    with pytest.raises(NotFound):
        pair["engine"].store.get("nothing:here")
    with pytest.raises(NotFound):
        pair["engine"].store.find_by_key("email", "ghost@nowhere.ex")


def test_export_import_round_trip(tmp_path, pair):
    engine = pair["engine"]
    run_delivery(engine, pair["m"], pair["d"], pair["product_id"], 10)
    export_dir = tmp_path / "dump"
    engine.store.export_dir(str(export_dir))
    clone = OffchainStore()
    count = clone.import_dir(str(export_dir))
    assert count == sum(1 for _ in engine.store.records())
    for record in engine.store.records():
        copied = clone.get(record.record_id)
        assert copied.payload == record.payload
        assert copied.ref == record.ref
        assert copied.seq == record.seq
    # Imported store verifies against the original chains.
    assert clone.verify_consistency(engine.tx_lookup).ok
