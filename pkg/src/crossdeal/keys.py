"""Ed25519 signing keys, verification, and address derivation.

Public keys and signatures travel as hex strings everywhere above this
module. Account addresses are the 32-byte hash of the raw public key,
also hex-encoded.
"""

from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


class KeyPair:
    """A signing identity. Signatures are deterministic (Ed25519)."""

    def __init__(self, private: Ed25519PrivateKey):
        self._private = private
        raw_pub = private.public_key().public_bytes_raw()
        self.public_hex: str = raw_pub.hex()
        self.address: str = hashlib.sha256(raw_pub).hexdigest()

    @classmethod
    def generate(cls) -> "KeyPair":
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        return cls(Ed25519PrivateKey.from_private_bytes(seed))

    @classmethod
    def dev(cls, name: str) -> "KeyPair":
        """Deterministic keypair for demos and tests. Not for production use."""
        return cls.from_seed(hashlib.sha256(b"dev-key:" + name.encode()).digest())

    def sign(self, message: bytes) -> str:
        return self._private.sign(message).hex()


def verify(public_hex: str, message: bytes, signature_hex: str) -> bool:
    """True iff signature_hex is a valid signature on message under public_hex."""
    try:
        pub = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_hex))
        pub.verify(bytes.fromhex(signature_hex), message)
        return True
    except (InvalidSignature, ValueError):
        return False


def address_of(public_hex: str) -> str:
    """Account address for a public key: hash of the raw key bytes."""
    return hashlib.sha256(bytes.fromhex(public_hex)).hexdigest()
