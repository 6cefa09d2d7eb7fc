"""Collaboratively managed access control: agreements, grants, revocations.

Evaluation is default-deny and purely temporal: an entry covers an instant
iff it was granted at or before that instant and not yet revoked then, so
historical decisions stay reproducible after later revocations. A chain's
owner is implicitly allowed on its own resources; everyone else needs a
granted entry. Re-grants after a revocation create new entries, entries
themselves only ever move Granted -> Revoked.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .errors import (
    AlreadyRevoked,
    AlreadySigned,
    EntryNotFound,
    NotActiveMember,
    Unauthorized,
    UnknownAgreement,
)
from .ledger import ChainId
from .registry import Registry, RoleClass


class DataClass(str, Enum):
    ShipmentTracking = "ShipmentTracking"
    OrderPlacement = "OrderPlacement"
    Inventory = "Inventory"
    Certificates = "Certificates"
    All = "All"


class Permission(str, Enum):
    Read = "Read"
    Write = "Write"


class GrantStatus(str, Enum):
    Granted = "Granted"
    Revoked = "Revoked"


@dataclass(frozen=True)
class ResourceScope:
    chain_id: ChainId
    data_class: DataClass

    def to_wire(self) -> dict:
        return {"chain_id": self.chain_id.to_wire(), "data_class": self.data_class.value}

    @classmethod
    def from_wire(cls, wire: dict) -> "ResourceScope":
        return cls(ChainId.from_wire(wire["chain_id"]), DataClass(wire["data_class"]))


@dataclass
class AclEntry:
    entry_id: str
    grantee: str
    resource: ResourceScope
    permission: Permission
    granted_by: str
    agreement_id: Optional[str]
    status: GrantStatus
    granted_at: int
    revoked_at: Optional[int] = None

    def covers(self, requester: str, resource: ResourceScope, permission: Permission,
               at: int) -> bool:
        if self.grantee != requester:
            return False
        if self.resource.chain_id != resource.chain_id:
            return False
        if self.resource.data_class not in (resource.data_class, DataClass.All):
            return False
        if self.permission != permission:
            return False
        if at < self.granted_at:
            return False
        if self.revoked_at is not None and at >= self.revoked_at:
            return False
        return True

    def to_wire(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "grantee": self.grantee,
            "resource": self.resource.to_wire(),
            "permission": self.permission.value,
            "granted_by": self.granted_by,
            "agreement_id": self.agreement_id,
            "status": self.status.value,
            "granted_at": self.granted_at,
            "revoked_at": self.revoked_at,
        }

    @classmethod
    def from_wire(cls, wire: dict) -> "AclEntry":
        return cls(
            entry_id=wire["entry_id"],
            grantee=wire["grantee"],
            resource=ResourceScope.from_wire(wire["resource"]),
            permission=Permission(wire["permission"]),
            granted_by=wire["granted_by"],
            agreement_id=wire.get("agreement_id"),
            status=GrantStatus(wire["status"]),
            granted_at=wire["granted_at"],
            revoked_at=wire.get("revoked_at"),
        )


@dataclass(frozen=True)
class AgreementScope:
    data_class: DataClass
    permission: Permission

    def to_wire(self) -> dict:
        return {"data_class": self.data_class.value, "permission": self.permission.value}

    @classmethod
    def from_wire(cls, wire: dict) -> "AgreementScope":
        return cls(DataClass(wire["data_class"]), Permission(wire["permission"]))


@dataclass
class ConsortiumAgreement:
    agreement_id: str
    parties: tuple[str, ...]
    scopes: tuple[AgreementScope, ...]
    proposed_by: str
    proposed_at: int
    signatures: dict[str, int]  # party -> signed_at
    effective_at: Optional[int] = None

    @property
    def active(self) -> bool:
        return self.effective_at is not None

    @property
    def status(self) -> str:
        return "active" if self.active else "pending"

    def to_wire(self) -> dict:
        return {
            "agreement_id": self.agreement_id,
            "parties": list(self.parties),
            "scopes": [s.to_wire() for s in self.scopes],
            "proposed_by": self.proposed_by,
            "proposed_at": self.proposed_at,
            "signatures": dict(self.signatures),
            "effective_at": self.effective_at,
            "status": self.status,
        }


@dataclass
class Decision:
    allow: bool
    reason: Optional[str] = None  # NoGrant | Revoked, absent on Allow

    def to_wire(self) -> dict:
        return {"allow": self.allow, "reason": self.reason}


class AccessControl:
    """ACL table plus agreement registry; all mutations land in one serialized log."""

    def __init__(self, registry: Registry):
        self._registry = registry
        self._entries: list[AclEntry] = []
        self._by_id: dict[str, AclEntry] = {}
        self._agreements: dict[str, ConsortiumAgreement] = {}
        self._lock = threading.RLock()
        self._entry_seq = 0
        self._agreement_seq = 0
        self.audit_log: list[dict] = []

    # -- consortium agreements (CTC) -----------------------------------

    def propose_agreement(self, proposer: str, parties: Iterable[str],
                          scopes: Iterable[AgreementScope], now: int) -> ConsortiumAgreement:
        party_ids = tuple(dict.fromkeys(parties))
        if proposer not in party_ids:
            raise Unauthorized("proposer must be one of the agreement parties")
        if len(party_ids) < 2:
            raise Unauthorized("an agreement needs at least two parties")
        for party in party_ids:
            record = self._registry.get(party)
            if record.role_class != RoleClass.Active:
                raise NotActiveMember(f"{record.email} is not an active member")
        scope_list = tuple(scopes)
        if not scope_list:
            raise Unauthorized("an agreement needs at least one scope")
        with self._lock:
            self._agreement_seq += 1
            agreement = ConsortiumAgreement(
                agreement_id=f"agr-{self._agreement_seq:06d}",
                parties=party_ids,
                scopes=scope_list,
                proposed_by=proposer,
                proposed_at=now,
                signatures={},
            )
            self._agreements[agreement.agreement_id] = agreement
            self._log({"type": "acl.propose", "at": now, "agreement": agreement.to_wire()})
            return agreement

    def sign_agreement(self, agreement_id: str, party: str, now: int) -> ConsortiumAgreement:
        with self._lock:
            agreement = self._agreements.get(agreement_id)
            if agreement is None:
                raise UnknownAgreement(f"unknown agreement: {agreement_id}")
            if party not in agreement.parties:
                raise Unauthorized("only listed parties may sign")
            if party in agreement.signatures:
                raise AlreadySigned(f"{party} already signed {agreement_id}")
            agreement.signatures[party] = now
            self._log({"type": "acl.sign", "at": now,
                       "agreement_id": agreement_id, "party": party})
            return agreement

    def activate_agreement(self, agreement: ConsortiumAgreement, now: int) -> list[AclEntry]:
        """Materialize reciprocal entries once every party has signed."""
        with self._lock:
            agreement.effective_at = now
            entries = []
            for granter in agreement.parties:
                granter_record = self._registry.get(granter)
                if granter_record.chain_address is None:
                    continue
                for grantee in agreement.parties:
                    if grantee == granter:
                        continue
                    for scope in agreement.scopes:
                        entries.append(self._add_entry(
                            grantee=grantee,
                            resource=ResourceScope(granter_record.chain_address, scope.data_class),
                            permission=scope.permission,
                            granted_by=granter,
                            agreement_id=agreement.agreement_id,
                            now=now,
                        ))
            self._log({"type": "acl.activate", "at": now, "agreement": agreement.to_wire(),
                       "entries": [e.to_wire() for e in entries]})
            return entries

    def get_agreement(self, agreement_id: str) -> ConsortiumAgreement:
        agreement = self._agreements.get(agreement_id)
        if agreement is None:
            raise UnknownAgreement(f"unknown agreement: {agreement_id}")
        return agreement

    def agreements(self) -> list[ConsortiumAgreement]:
        return list(self._agreements.values())

    # -- grants and revocations (ACC / REC) ------------------------------

    def _authorize_mutation(self, actor: str, grantee: str, resource: ResourceScope) -> None:
        if resource.chain_id.owner == actor:
            return
        grantee_record = self._registry.maybe_get(grantee)
        if (actor == self._registry.gha_id and grantee_record is not None
                and grantee_record.role_class == RoleClass.Passive):
            return
        raise Unauthorized(
            "granter must own the resource chain, or be the GHA granting to a passive member")

    def grant(self, granter: str, grantee: str, resource: ResourceScope,
              permission: Permission, now: int) -> AclEntry:
        self._registry.get(granter)
        self._registry.get(grantee)
        self._authorize_mutation(granter, grantee, resource)
        with self._lock:
            entry = self._add_entry(grantee, resource, permission, granter, None, now)
            self._log({"type": "acl.grant", "at": now, "entry": entry.to_wire()})
            return entry

    def revoke(self, revoker: str, entry_id: str, now: int) -> AclEntry:
        with self._lock:
            entry = self._by_id.get(entry_id)
            if entry is None:
                raise EntryNotFound(f"unknown ACL entry: {entry_id}")
            if entry.status == GrantStatus.Revoked:
                raise AlreadyRevoked(f"{entry_id} was already revoked")
            self._authorize_mutation(revoker, entry.grantee, entry.resource)
            entry.status = GrantStatus.Revoked
            entry.revoked_at = now
            self._log({"type": "acl.revoke", "at": now, "entry": entry.to_wire(),
                       "revoked_by": revoker})
            return entry

    def _add_entry(self, grantee: str, resource: ResourceScope, permission: Permission,
                   granted_by: str, agreement_id: str | None, now: int) -> AclEntry:
        self._entry_seq += 1
        entry = AclEntry(
            entry_id=f"acl-{self._entry_seq:06d}",
            grantee=grantee,
            resource=resource,
            permission=permission,
            granted_by=granted_by,
            agreement_id=agreement_id,
            status=GrantStatus.Granted,
            granted_at=now,
        )
        self._entries.append(entry)
        self._by_id[entry.entry_id] = entry
        return entry

    def get_entry(self, entry_id: str) -> AclEntry:
        entry = self._by_id.get(entry_id)
        if entry is None:
            raise EntryNotFound(f"unknown ACL entry: {entry_id}")
        return entry

    def entries(self) -> list[AclEntry]:
        return list(self._entries)

    # -- evaluation ------------------------------------------------------

    def evaluate(self, requester: str, resource: ResourceScope, permission: Permission,
                 at: int, log: bool = True) -> Decision:
        if resource.chain_id.owner == requester:
            decision = Decision(True)
        else:
            decision = self._scan(requester, resource, permission, at)
        if log:
            with self._lock:
                self._log({
                    "type": "acl.decision", "at": at, "requester": requester,
                    "resource": resource.to_wire(), "permission": permission.value,
                    "allow": decision.allow, "reason": decision.reason,
                })
        return decision

    def _scan(self, requester: str, resource: ResourceScope, permission: Permission,
              at: int) -> Decision:
        saw_revoked = False
        for entry in self._entries:
            if entry.covers(requester, resource, permission, at):
                return Decision(True)
            if (entry.grantee == requester
                    and entry.resource.chain_id == resource.chain_id
                    and entry.resource.data_class in (resource.data_class, DataClass.All)
                    and entry.permission == permission
                    and entry.revoked_at is not None and at >= entry.revoked_at):
                saw_revoked = True
        return Decision(False, "Revoked" if saw_revoked else "NoGrant")

    # -- audit log ---------------------------------------------------------

    def _log(self, event: dict) -> None:
        self.audit_log.append(event)

    def export_audit_jsonl(self) -> str:
        return "\n".join(json.dumps(event, sort_keys=True) for event in self.audit_log)

    def restore_entry(self, entry: AclEntry) -> None:
        with self._lock:
            existing = self._by_id.get(entry.entry_id)
            if existing is not None:
                existing.status = entry.status
                existing.revoked_at = entry.revoked_at
                return
            self._entries.append(entry)
            self._by_id[entry.entry_id] = entry
            seq = int(entry.entry_id.rsplit("-", 1)[1])
            self._entry_seq = max(self._entry_seq, seq)

    def restore_agreement(self, agreement: ConsortiumAgreement) -> None:
        with self._lock:
            self._agreements[agreement.agreement_id] = agreement
            seq = int(agreement.agreement_id.rsplit("-", 1)[1])
            self._agreement_seq = max(self._agreement_seq, seq)
