"""Signing keys, JSON Web Keys and detached compact JWS.

Two suites are supported: RS256 over a 4096-bit modulus (the default) and
ES256 on P-256.  The JWS payload is always the SHA3-512 digest of the
canonical bytes of the unsigned record; it is detached, so the stored
signature has the form ``header..signature``.
"""
from __future__ import annotations

import base64
import hashlib
import json

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec, padding, rsa
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)

from ..errors import SigningFailure, UnsupportedAlgorithm

ALGORITHMS = ("RS256", "ES256")


def b64url(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")


def b64url_decode(text: str) -> bytes:
    return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))


def _int_b64(n: int, size: int | None = None) -> str:
    size = size or (n.bit_length() + 7) // 8
    return b64url(n.to_bytes(size, "big"))


class SigningKey:
    """A private key able to produce detached JWS signatures."""

    def __init__(self, private_key, alg: str):
        if alg not in ALGORITHMS:
            raise UnsupportedAlgorithm(alg)
        self._key = private_key
        self.alg = alg

    @classmethod
    def generate(cls, alg: str = "RS256", bits: int = 4096) -> "SigningKey":
        if alg == "RS256":
            if bits < 2048:
                raise UnsupportedAlgorithm("RS256 keys must be at least 2048 bits")
            return cls(rsa.generate_private_key(public_exponent=65537, key_size=bits), alg)
        if alg == "ES256":
            return cls(ec.generate_private_key(ec.SECP256R1()), alg)
        raise UnsupportedAlgorithm(alg)

    @classmethod
    def from_pem(cls, pem: bytes) -> "SigningKey":
        key = serialization.load_pem_private_key(pem, password=None)
        if isinstance(key, rsa.RSAPrivateKey):
            return cls(key, "RS256")
        if isinstance(key, ec.EllipticCurvePrivateKey) and isinstance(key.curve, ec.SECP256R1):
            return cls(key, "ES256")
        raise UnsupportedAlgorithm(f"unsupported key type {type(key).__name__}")

    def to_pem(self) -> bytes:
        return self._key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )

    @property
    def key_size(self) -> int:
        return self._key.key_size

    def public_jwk(self) -> dict:
        pub = self._key.public_key().public_numbers()
        if self.alg == "RS256":
            return {"kty": "RSA", "alg": "RS256", "n": _int_b64(pub.n), "e": _int_b64(pub.e)}
        return {
            "kty": "EC",
            "alg": "ES256",
            "crv": "P-256",
            "x": _int_b64(pub.x, 32),
            "y": _int_b64(pub.y, 32),
        }

    def sign_detached(self, payload: bytes) -> bytes:
        """Detached compact JWS over ``payload`` (returned as ASCII bytes)."""
        header = b64url(json.dumps({"alg": self.alg}, separators=(",", ":")).encode())
        signing_input = f"{header}.{b64url(payload)}".encode("ascii")
        try:
            if self.alg == "RS256":
                sig = self._key.sign(signing_input, padding.PKCS1v15(), hashes.SHA256())
            else:
                der = self._key.sign(signing_input, ec.ECDSA(hashes.SHA256()))
                r, s = decode_dss_signature(der)
                sig = r.to_bytes(32, "big") + s.to_bytes(32, "big")
        except Exception as exc:
            raise SigningFailure(str(exc)) from exc
        return f"{header}..{b64url(sig)}".encode("ascii")


def public_key_from_jwk(jwk: dict):
    kty = jwk.get("kty")
    if kty == "RSA":
        n = int.from_bytes(b64url_decode(jwk["n"]), "big")
        e = int.from_bytes(b64url_decode(jwk["e"]), "big")
        return rsa.RSAPublicNumbers(e, n).public_key()
    if kty == "EC" and jwk.get("crv") == "P-256":
        x = int.from_bytes(b64url_decode(jwk["x"]), "big")
        y = int.from_bytes(b64url_decode(jwk["y"]), "big")
        return ec.EllipticCurvePublicNumbers(x, y, ec.SECP256R1()).public_key()
    raise UnsupportedAlgorithm(f"unsupported JWK kty={kty!r}")


def verify_detached(jwk: dict, payload: bytes, jws: bytes) -> bool:
    """Check a detached JWS against ``payload``; never raises on bad input."""
    try:
        text = jws.decode("ascii")
        header_b64, middle, sig_b64 = text.split(".")
        if middle:
            return False
        header = json.loads(b64url_decode(header_b64))
        alg = header.get("alg")
        if alg != jwk.get("alg"):
            return False
        key = public_key_from_jwk(jwk)
        signing_input = f"{header_b64}.{b64url(payload)}".encode("ascii")
        sig = b64url_decode(sig_b64)
        if alg == "RS256":
            key.verify(sig, signing_input, padding.PKCS1v15(), hashes.SHA256())
        elif alg == "ES256":
            if len(sig) != 64:
                return False
            der = encode_dss_signature(int.from_bytes(sig[:32], "big"), int.from_bytes(sig[32:], "big"))
            key.verify(der, signing_input, ec.ECDSA(hashes.SHA256()))
        else:
            return False
        return True
    except (InvalidSignature, ValueError, KeyError, TypeError, UnsupportedAlgorithm, UnicodeDecodeError):
        return False


def signing_digest(unsigned_bytes: bytes) -> bytes:
    return hashlib.sha3_512(unsigned_bytes).digest()
