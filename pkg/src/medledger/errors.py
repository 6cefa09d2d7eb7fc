"""Engine error hierarchy.

Every error carries a stable machine code (the class-level ``code``) and an
HTTP status class used by the API layer. The set of codes is closed and
documented in docs/API.md; module errors map onto it 1:1.
"""

from __future__ import annotations

from typing import Any


class MedLedgerError(Exception):
    code = "InternalError"
    http_status = 500

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_wire(self) -> dict[str, Any]:
        wire = {"code": self.code, "message": self.message}
        wire.update(self.details)
        return wire


# --- ledger-core ---

class InvalidSignature(MedLedgerError):
    code = "InvalidSignature"
    http_status = 422


class EmptyBatch(MedLedgerError):
    code = "EmptyBatch"
    http_status = 422


class UnknownChain(MedLedgerError):
    code = "UnknownChain"
    http_status = 404


# --- identity-registry ---

class AccountAlreadyExists(MedLedgerError):
    code = "AccountAlreadyExists"
    http_status = 409

    def __init__(self, message: str = "", **details: Any):
        details.setdefault("confirmation", False)
        super().__init__(message, **details)
        self.confirmation = False


class InvalidIdentity(MedLedgerError):
    code = "InvalidIdentity"
    http_status = 422


class WeakCredential(MedLedgerError):
    code = "WeakCredential"
    http_status = 422


class InvalidCredentials(MedLedgerError):
    code = "InvalidCredentials"
    http_status = 401


class InvalidSession(MedLedgerError):
    code = "InvalidSession"
    http_status = 401


class AuthRequired(MedLedgerError):
    code = "AuthRequired"
    http_status = 401


class UnknownEntity(MedLedgerError):
    code = "UnknownEntity"
    http_status = 404


# --- access-control ---

class NotActiveMember(MedLedgerError):
    code = "NotActiveMember"
    http_status = 403


class UnknownAgreement(MedLedgerError):
    code = "UnknownAgreement"
    http_status = 404


class AlreadySigned(MedLedgerError):
    code = "AlreadySigned"
    http_status = 409


class Unauthorized(MedLedgerError):
    code = "Unauthorized"
    http_status = 403


class EntryNotFound(MedLedgerError):
    code = "EntryNotFound"
    http_status = 404


class AlreadyRevoked(MedLedgerError):
    code = "AlreadyRevoked"
    http_status = 409


class AccessDenied(MedLedgerError):
    code = "AccessDenied"
    http_status = 403


# --- chain-topology ---

class HeightGap(MedLedgerError):
    code = "HeightGap"
    http_status = 409


class OwnerMismatch(MedLedgerError):
    code = "OwnerMismatch"
    http_status = 409


class UnknownEndpoint(MedLedgerError):
    code = "UnknownEndpoint"
    http_status = 404


class BadSignature(MedLedgerError):
    code = "BadSignature"
    http_status = 422


# --- supply-domain ---

class SelfDelivery(MedLedgerError):
    code = "SelfDelivery"
    http_status = 422


class InsufficientInventory(MedLedgerError):
    code = "InsufficientInventory"
    http_status = 409


class WrongState(MedLedgerError):
    code = "WrongState"
    http_status = 409


class WrongActor(MedLedgerError):
    code = "WrongActor"
    http_status = 403


class NotGHA(MedLedgerError):
    code = "NotGHA"
    http_status = 403


class NotManufacturer(MedLedgerError):
    code = "NotManufacturer"
    http_status = 403


class UnknownPatient(MedLedgerError):
    code = "UnknownPatient"
    http_status = 404


class UnknownProduct(MedLedgerError):
    code = "UnknownProduct"
    http_status = 404


class UnknownDelivery(MedLedgerError):
    code = "UnknownDelivery"
    http_status = 404


class InvalidQuantity(MedLedgerError):
    code = "InvalidQuantity"
    http_status = 422


class InvalidTimestamp(MedLedgerError):
    code = "InvalidTimestamp"
    http_status = 422


# --- trace-engine ---

class ItemNotFound(MedLedgerError):
    code = "ItemNotFound"
    http_status = 404

    def __init__(self, message: str = "", **details: Any):
        details.setdefault("confirmation", False)
        super().__init__(message, **details)
        self.confirmation = False


class VerificationFailed(MedLedgerError):
    code = "VerificationFailed"
    http_status = 409


# --- offchain-store ---

class DigestMismatch(MedLedgerError):
    code = "DigestMismatch"
    http_status = 409


class NotFound(MedLedgerError):
    code = "NotFound"
    http_status = 404


# --- cli / scenario ---

class StepMismatch(MedLedgerError):
    code = "StepMismatch"
    http_status = 409


class ServiceUnavailable(MedLedgerError):
    code = "ServiceUnavailable"
    http_status = 503
