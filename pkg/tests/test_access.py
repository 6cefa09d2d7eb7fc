import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fast_engine, make_agreement, register
from medledger.access import DataClass, Permission, ResourceScope
from medledger.errors import (
    AlreadyRevoked,
    AlreadySigned,
    EntryNotFound,
    NotActiveMember,
    Unauthorized,
    UnknownAgreement,
)


@pytest.fixture
def members(engine):
    return {
        "engine": engine,
        "gha": engine.registry.gha_id,
        "m": register(engine, "M", "m@acl.ex", "Manufacturer"),
        "d": register(engine, "D", "d@acl.ex", "Distributor"),
        "p": register(engine, "P", "p@acl.ex", "Patient"),
    }


def scope(engine, owner, data_class=DataClass.ShipmentTracking):
    chain = engine.chains.get(owner if owner == "global" else owner)
    return ResourceScope(chain.chain_id, data_class)


def test_two_party_agreement_materializes_reciprocal_grants(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    agreement = engine.propose_agreement(
        m, [m, d], [{"data_class": "ShipmentTracking", "permission": "Write"}])
    assert agreement["status"] == "pending"
    engine.sign_agreement(agreement["agreement_id"], m)
    final = engine.sign_agreement(agreement["agreement_id"], d)
    assert final["status"] == "active"
    entries = engine.access.entries()
    assert len(entries) == 2
    pairs = {(e.grantee, e.resource.chain_id.owner) for e in entries}
    assert pairs == {(m, d), (d, m)}
    assert all(e.resource.data_class == DataClass.ShipmentTracking for e in entries)


def test_partially_signed_agreement_grants_nothing(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    agreement = engine.propose_agreement(
        m, [m, d], [{"data_class": "ShipmentTracking", "permission": "Write"}])
    engine.sign_agreement(agreement["agreement_id"], m)
    decision = engine.access.evaluate(
        m, scope(engine, d), Permission.Write, engine.clock.now_ms())
    assert not decision.allow
    assert decision.reason == "NoGrant"
    assert engine.access.entries() == []


def test_patient_cannot_be_agreement_party(members):
    engine, m, p = members["engine"], members["m"], members["p"]
    with pytest.raises(NotActiveMember):
        engine.propose_agreement(
            m, [m, p], [{"data_class": "ShipmentTracking", "permission": "Write"}])


def test_agreement_signing_errors(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    agreement = engine.propose_agreement(
        m, [m, d], [{"data_class": "Inventory", "permission": "Read"}])
    agreement_id = agreement["agreement_id"]
    engine.sign_agreement(agreement_id, m)
    with pytest.raises(AlreadySigned):
        engine.sign_agreement(agreement_id, m)
    with pytest.raises(UnknownAgreement):
        engine.sign_agreement("agr-999999", m)
    with pytest.raises(Unauthorized):
        engine.propose_agreement(m, [members["d"]], [
            {"data_class": "Inventory", "permission": "Read"}])


def test_gha_grants_passive_member_certificates_read(members):
    engine, gha, p = members["engine"], members["gha"], members["p"]
    entry = engine.grant_access(gha, p, "global", "Certificates", "Read")
    assert entry["status"] == "Granted"
    decision = engine.access.evaluate(
        p, scope(engine, "global", DataClass.Certificates), Permission.Read,
        engine.clock.now_ms())
    assert decision.allow


def test_grant_revoke_round_trip(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    entry = engine.grant_access(m, d, m, "Inventory", "Read")
    at = engine.clock.now_ms()
    assert engine.access.evaluate(d, scope(engine, m, DataClass.Inventory),
                                  Permission.Read, at).allow
    revoked = engine.revoke_access(m, entry["entry_id"])
    assert revoked["status"] == "Revoked"
    decision = engine.access.evaluate(d, scope(engine, m, DataClass.Inventory),
                                      Permission.Read, engine.clock.now_ms())
    assert not decision.allow and decision.reason == "Revoked"
    with pytest.raises(AlreadyRevoked):
        engine.revoke_access(m, entry["entry_id"])
    with pytest.raises(EntryNotFound):
        engine.revoke_access(m, "acl-424242")


def test_regrant_after_revoke_creates_new_entry(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    first = engine.grant_access(m, d, m, "Inventory", "Read")
    engine.revoke_access(m, first["entry_id"])
    second = engine.grant_access(m, d, m, "Inventory", "Read")
    assert second["entry_id"] != first["entry_id"]
    assert engine.access.get_entry(first["entry_id"]).status.value == "Revoked"
    now = engine.clock.now_ms()
    assert engine.access.evaluate(d, scope(engine, m, DataClass.Inventory),
                                  Permission.Read, now).allow


def test_cannot_grant_on_another_members_chain(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    with pytest.raises(Unauthorized):
        engine.grant_access(d, d, m, "ShipmentTracking", "Write")
    # GHA may only bypass ownership for passive grantees.
    with pytest.raises(Unauthorized):
        engine.grant_access(members["gha"], d, m, "ShipmentTracking", "Write")


def test_historical_evaluation_between_grant_and_revoke(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    entry = engine.grant_access(m, d, m, "Inventory", "Read")
    mid = engine.clock.now_ms()
    engine.revoke_access(m, entry["entry_id"])
    after = engine.clock.now_ms()
    resource = scope(engine, m, DataClass.Inventory)
    assert engine.access.evaluate(d, resource, Permission.Read, mid).allow
    assert not engine.access.evaluate(d, resource, Permission.Read, after).allow
    before = engine.access.get_entry(entry["entry_id"]).granted_at - 1
    assert not engine.access.evaluate(d, resource, Permission.Read, before).allow


def test_all_data_class_covers_everything(members):
    engine, m, d = members["engine"], members["m"], members["d"]
    engine.grant_access(m, d, m, "All", "Read")
    now = engine.clock.now_ms()
    for data_class in DataClass:
        assert engine.access.evaluate(d, scope(engine, m, data_class),
                                      Permission.Read, now).allow
    # Permission match is exact: Read grant does not imply Write.
    assert not engine.access.evaluate(d, scope(engine, m, DataClass.Inventory),
                                      Permission.Write, now).allow


def test_owner_is_implicitly_allowed(members):
    engine, m = members["engine"], members["m"]
    assert engine.access.evaluate(m, scope(engine, m), Permission.Write,
                                  engine.clock.now_ms()).allow


@given(st.integers(min_value=0, max_value=1 << 31), st.sampled_from(list(DataClass)),
       st.sampled_from(list(Permission)))
@settings(max_examples=60, deadline=None)
def test_default_deny_on_empty_acl(seed, data_class, permission):
    engine = fast_engine(seed=seed % 97)
    m = register(engine, "M", "m@dd.ex", "Manufacturer")
    d = register(engine, "D", "d@dd.ex", "Distributor")
    rng = random.Random(seed)
    requester, owner = rng.sample([m, d, engine.registry.gha_id], 2)
    decision = engine.access.evaluate(
        requester, scope(engine, owner, data_class), permission, engine.clock.now_ms())
    assert not decision.allow
    assert decision.reason == "NoGrant"


def test_decision_log_replays_identically(members):
    engine, gha, m, d, p = (members["engine"], members["gha"], members["m"],
                            members["d"], members["p"])
    make_agreement(engine, [m, d])
    entry = engine.grant_access(gha, p, "global", "Certificates", "Read")
    engine.grant_access(m, d, m, "Inventory", "Read")
    engine.revoke_access(gha, entry["entry_id"])
    rng = random.Random(5)
    subjects = [m, d, p, gha]
    owners = [m, d, "global"]
    for _ in range(50):
        engine.access.evaluate(
            rng.choice(subjects),
            scope(engine, rng.choice(owners), rng.choice(list(DataClass))),
            rng.choice(list(Permission)),
            engine.clock.now_ms())

    # Rebuild ACL state from the mutation log alone, then re-run every decision.
    from medledger.access import AccessControl, AclEntry

    replayed = AccessControl(engine.registry)
    for event in engine.access.audit_log:
        if event["type"] in ("acl.grant", "acl.activate", "acl.revoke"):
            wires = [event["entry"]] if "entry" in event else event["entries"]
            for wire in wires:
                if event["type"] == "acl.revoke":
                    stored = replayed.get_entry(wire["entry_id"])
                    stored.status = AclEntry.from_wire(wire).status
                    stored.revoked_at = wire["revoked_at"]
                else:
                    restored = AclEntry.from_wire(wire)
                    replayed.restore_entry(restored)
    for event in engine.access.audit_log:
        if event["type"] != "acl.decision":
            continue
        resource = ResourceScope.from_wire(event["resource"])
        decision = replayed.evaluate(event["requester"], resource,
                                     Permission(event["permission"]), event["at"],
                                     log=False)
        assert decision.allow == event["allow"], event
