"""Entity registration, role classification, and login sessions.

Stakeholders are classified Active (supplier, manufacturer, warehouse,
distributor, health authority) or Passive (hospital, clinic, patient).
Active entities operate their own local chain and may author Send
transactions; Passive entities are limited to Query and Access.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import crypto
from .errors import (
    AccountAlreadyExists,
    InvalidCredentials,
    InvalidIdentity,
    InvalidSession,
    UnknownEntity,
    WeakCredential,
)
from .ledger import ChainId, TxKind


class Identity(str, Enum):
    Supplier = "Supplier"
    Manufacturer = "Manufacturer"
    Warehouse = "Warehouse"
    Distributor = "Distributor"
    GHA = "GHA"
    Hospital = "Hospital"
    Clinic = "Clinic"
    Patient = "Patient"


class RoleClass(str, Enum):
    Active = "Active"
    Passive = "Passive"


ACTIVE_IDENTITIES = frozenset(
    {Identity.Supplier, Identity.Manufacturer, Identity.Warehouse,
     Identity.Distributor, Identity.GHA}
)

MIN_PASSWORD_LENGTH = 8


def role_class_of(identity: Identity) -> RoleClass:
    return RoleClass.Active if identity in ACTIVE_IDENTITIES else RoleClass.Passive


def permitted_tx_kinds(role_class: RoleClass) -> set[TxKind]:
    if role_class == RoleClass.Active:
        return {TxKind.Query, TxKind.Access, TxKind.Send}
    return {TxKind.Query, TxKind.Access}


def entity_id_for(email: str) -> str:
    return "e-" + hashlib.sha256(email.encode("utf-8")).hexdigest()[:12]


@dataclass
class EntityRecord:
    entity_id: str
    name: str
    email: str
    identity: Identity
    role_class: RoleClass
    credential: dict
    public_key: str
    chain_address: Optional[ChainId]
    created_at: int

    def to_wire(self, include_credential: bool = False) -> dict:
        wire = {
            "entity_id": self.entity_id,
            "name": self.name,
            "email": self.email,
            "identity": self.identity.value,
            "role_class": self.role_class.value,
            "public_key": self.public_key,
            "chain_address": self.chain_address.to_wire() if self.chain_address else None,
            "created_at": self.created_at,
        }
        if include_credential:
            wire["credential"] = dict(self.credential)
        return wire

    @classmethod
    def from_wire(cls, wire: dict) -> "EntityRecord":
        return cls(
            entity_id=wire["entity_id"],
            name=wire["name"],
            email=wire["email"],
            identity=Identity(wire["identity"]),
            role_class=RoleClass(wire["role_class"]),
            credential=dict(wire.get("credential") or {}),
            public_key=wire["public_key"],
            chain_address=ChainId.from_wire(wire["chain_address"]) if wire.get("chain_address") else None,
            created_at=wire["created_at"],
        )


@dataclass
class Session:
    token: str
    entity_id: str
    role_class: RoleClass
    issued_at: int
    expires_at: int


@dataclass
class Classification:
    role_class: RoleClass
    permitted_tx_kinds: set[TxKind] = field(default_factory=set)

    def to_wire(self) -> dict:
        return {
            "role_class": self.role_class.value,
            "permitted_tx_kinds": sorted(k.value for k in self.permitted_tx_kinds),
        }


class Registry:
    """Entity records keyed by id, with the email map kept injective."""

    def __init__(self, pbkdf2_iterations: int = crypto.DEFAULT_PBKDF2_ITERATIONS,
                 session_ttl_ms: int = 3_600_000, rand_bytes=None):
        self._by_id: dict[str, EntityRecord] = {}
        self._by_email: dict[str, str] = {}
        self._sessions: dict[str, Session] = {}
        self._lock = threading.RLock()
        self.pbkdf2_iterations = pbkdf2_iterations
        self.session_ttl_ms = session_ttl_ms
        self._rand_bytes = rand_bytes or os.urandom
        self.gha_id: str | None = None

    # -- records ------------------------------------------------------

    @staticmethod
    def validate_new(name: str, email: str, identity: str, password: str) -> Identity:
        if not name or not email or not identity or not password:
            raise WeakCredential("all registration fields are required")
        if len(password) < MIN_PASSWORD_LENGTH:
            raise WeakCredential(f"password must be at least {MIN_PASSWORD_LENGTH} characters")
        try:
            return Identity(identity)
        except ValueError:
            raise InvalidIdentity(f"unknown identity: {identity!r}") from None

    def create_record(self, name: str, email: str, identity: str, password: str,
                      public_key: str, chain_address: ChainId | None,
                      now: int) -> EntityRecord:
        parsed = self.validate_new(name, email, identity, password)
        with self._lock:
            if email in self._by_email:
                raise AccountAlreadyExists(f"account already exists for {email}")
            record = EntityRecord(
                entity_id=entity_id_for(email),
                name=name,
                email=email,
                identity=parsed,
                role_class=role_class_of(parsed),
                credential=crypto.hash_password(password, self.pbkdf2_iterations,
                                                salt=self._rand_bytes(16)),
                public_key=public_key,
                chain_address=chain_address,
                created_at=now,
            )
            self._by_id[record.entity_id] = record
            self._by_email[email] = record.entity_id
            if parsed == Identity.GHA and self.gha_id is None:
                self.gha_id = record.entity_id
            return record

    def restore_record(self, record: EntityRecord) -> None:
        with self._lock:
            self._by_id[record.entity_id] = record
            self._by_email[record.email] = record.entity_id
            if record.identity == Identity.GHA and self.gha_id is None:
                self.gha_id = record.entity_id

    def get(self, entity_id: str) -> EntityRecord:
        record = self._by_id.get(entity_id)
        if record is None:
            raise UnknownEntity(f"unknown entity: {entity_id}")
        return record

    def maybe_get(self, entity_id: str) -> EntityRecord | None:
        return self._by_id.get(entity_id)

    def by_email(self, email: str) -> EntityRecord | None:
        entity_id = self._by_email.get(email)
        return self._by_id.get(entity_id) if entity_id else None

    def all_records(self) -> list[EntityRecord]:
        return list(self._by_id.values())

    def public_key_of(self, entity_id: str) -> str | None:
        record = self._by_id.get(entity_id)
        return record.public_key if record else None

    # -- classification (CC) -------------------------------------------

    def classify(self, entity_id: str) -> Classification:
        record = self.get(entity_id)
        return Classification(record.role_class, permitted_tx_kinds(record.role_class))

    # -- sessions -------------------------------------------------------

    def authenticate(self, email: str, password: str, now: int, token: str) -> Session:
        record = self.by_email(email)
        # Wrong email and wrong password must be indistinguishable.
        if record is None or not crypto.verify_password(password, record.credential):
            raise InvalidCredentials("invalid email or password")
        session = Session(
            token=token,
            entity_id=record.entity_id,
            role_class=record.role_class,
            issued_at=now,
            expires_at=now + self.session_ttl_ms,
        )
        with self._lock:
            self._sessions[token] = session
        return session

    def resolve_session(self, token: str, now: int) -> EntityRecord:
        session = self._sessions.get(token)
        if session is None or now >= session.expires_at:
            raise InvalidSession("session is not valid")
        return self.get(session.entity_id)

    def logout(self, token: str) -> None:
        with self._lock:
            self._sessions.pop(token, None)
