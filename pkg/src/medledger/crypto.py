"""Signing keys and credential digests.

Two interchangeable signature schemes sit behind one interface:

* ``ed25519`` — deterministic public-key signatures (the default).
* ``hmac`` — a keyed-MAC stub for simulation/benchmark runs. The "public key"
  is the MAC key itself, so it authenticates only inside a single trusted
  process; never use it across real trust boundaries.

Public keys travel as strings ``"<scheme>:<hex>"`` so verification can
dispatch without out-of-band context.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import threading

from cryptography.exceptions import InvalidSignature as _CryptoBadSig
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

SCHEMES = ("ed25519", "hmac")

# Fixed per deployment; sized for the interactive-login latency profile of a
# desk-scale simulation, raise it in config for anything internet-facing.
DEFAULT_PBKDF2_ITERATIONS = 10_000


class KeyPair:
    """A private signing key plus its wire-format public key."""

    def __init__(self, scheme: str, secret: bytes):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown signature scheme: {scheme}")
        self.scheme = scheme
        self._secret = secret
        if scheme == "ed25519":
            self._sk = Ed25519PrivateKey.from_private_bytes(secret)
            from cryptography.hazmat.primitives.serialization import (
                Encoding,
                PublicFormat,
            )
            pub = self._sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        else:
            pub = secret
        self.public_key = f"{scheme}:{pub.hex()}"

    @classmethod
    def generate(cls, scheme: str, seed: bytes | None = None) -> "KeyPair":
        secret = hashlib.sha256(b"keyseed|" + seed).digest() if seed is not None else os.urandom(32)
        return cls(scheme, secret)

    def sign(self, message: bytes) -> bytes:
        if self.scheme == "ed25519":
            return self._sk.sign(message)
        return hmac.new(self._secret, message, hashlib.sha256).digest()

    def secret_hex(self) -> str:
        return self._secret.hex()


def verify_signature(public_key: str, signature: bytes, message: bytes) -> bool:
    """Check a signature against a wire-format public key. Never raises."""
    try:
        scheme, _, hexpub = public_key.partition(":")
        raw = bytes.fromhex(hexpub)
    except ValueError:
        return False
    if scheme == "ed25519":
        try:
            Ed25519PublicKey.from_public_bytes(raw).verify(signature, message)
            return True
        except (_CryptoBadSig, ValueError):
            return False
    if scheme == "hmac":
        expected = hmac.new(raw, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)
    return False


class Keyring:
    """Holds the in-process private keys of all simulated parties."""

    def __init__(self, scheme: str = "ed25519"):
        self.scheme = scheme
        self._keys: dict[str, KeyPair] = {}
        self._lock = threading.Lock()

    def create(self, holder_id: str, seed: bytes | None = None) -> KeyPair:
        pair = KeyPair.generate(self.scheme, seed)
        with self._lock:
            self._keys[holder_id] = pair
        return pair

    def restore(self, holder_id: str, scheme: str, secret: bytes) -> KeyPair:
        pair = KeyPair(scheme, secret)
        with self._lock:
            self._keys[holder_id] = pair
        return pair

    def get(self, holder_id: str) -> KeyPair | None:
        return self._keys.get(holder_id)

    def sign(self, holder_id: str, message: bytes) -> bytes:
        pair = self._keys.get(holder_id)
        if pair is None:
            raise KeyError(f"no key for {holder_id}")
        return pair.sign(message)

    def items(self) -> list[tuple[str, KeyPair]]:
        return list(self._keys.items())


def hash_password(password: str, iterations: int = DEFAULT_PBKDF2_ITERATIONS,
                  salt: bytes | None = None) -> dict:
    """Salted slow digest of a password (PBKDF2-HMAC-SHA256)."""
    salt = salt if salt is not None else os.urandom(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return {
        "algorithm": "pbkdf2-sha256",
        "iterations": iterations,
        "salt": salt.hex(),
        "digest": digest.hex(),
    }


def verify_password(password: str, credential: dict) -> bool:
    if credential.get("algorithm") != "pbkdf2-sha256":
        return False
    digest = hashlib.pbkdf2_hmac(
        "sha256",
        password.encode("utf-8"),
        bytes.fromhex(credential["salt"]),
        int(credential["iterations"]),
    )
    return hmac.compare_digest(digest.hex(), credential["digest"])
