"""Single-key Paillier for the result-delivery leg.

A fresh key pair is minted per requester-facing aggregation request; the
private key travels to the requester sealed under attribute-based
encryption. The scheme is the textbook one: n = p·q, g = n+1 by default,
Enc(m; r) = g^m · r^n mod n², Dec(c) = L(c^λ mod n²)·μ mod n, with ciphertext
products adding plaintexts and c^(n−1) negating them mod n.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import gmpy2

from . import arith
from .arith import powmod
from .errors import KeyMismatch, ParameterError, PlaintextOutOfRange

SCHEME_TAG = 0x02


@dataclass(frozen=True)
class PaillierPublicKey:
    key_id: int
    n: int
    n_sq: int
    g: int


@dataclass(frozen=True)
class PaillierPrivateKey:
    key_id: int
    lam: int
    mu: int


@dataclass(slots=True)
class PaillierCiphertext:
    public: PaillierPublicKey
    value: int

    @property
    def key_id(self) -> int:
        return self.public.key_id


def keygen(
    bits: int,
    rng: random.Random,
    key_id: int = 0,
    min_n: int | None = None,
) -> tuple[PaillierPublicKey, PaillierPrivateKey]:
    """Fresh key pair with an exactly `bits`-bit modulus.

    min_n, when given, retries until n > min_n (used to mint request keys
    strictly wider than the aggregation modulus so re-encrypted sums never
    wrap).
    """
    if bits < 64:
        raise ParameterError("modulus must be at least 64 bits")
    if min_n is not None and min_n.bit_length() > bits:
        raise ParameterError("min_n cannot exceed the requested width")
    while True:
        p = arith.random_prime(bits // 2, rng)
        q = arith.random_prime(bits - bits // 2, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() != bits:
            continue
        if min_n is not None and n <= min_n:
            continue
        if math.gcd(n, (p - 1) * (q - 1)) != 1:
            continue
        break
    n_sq = n * n
    g = n + 1
    lam = arith.lcm(p - 1, q - 1)
    mu = int(gmpy2.invert(arith.l_function(powmod(g, lam, n_sq), n), n))
    return (
        PaillierPublicKey(key_id=key_id, n=n, n_sq=n_sq, g=g),
        PaillierPrivateKey(key_id=key_id, lam=lam, mu=mu),
    )


def encrypt(
    ppk: PaillierPublicKey, m: int, rng: random.Random, r: int | None = None
) -> PaillierCiphertext:
    """g^m · r^n mod n² with r a fresh unit mod n (2 ModExp + 1 ModMul)."""
    if not 0 <= m < ppk.n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n), got {m}")
    if r is None:
        while True:
            r = rng.randrange(1, ppk.n)
            if math.gcd(r, ppk.n) == 1:
                break
    value = arith.mod_mul(
        arith.mod_exp(ppk.g, m, ppk.n_sq),
        arith.mod_exp(r, ppk.n, ppk.n_sq),
        ppk.n_sq,
    )
    return PaillierCiphertext(public=ppk, value=value)


def decrypt(psk: PaillierPrivateKey, ppk: PaillierPublicKey, c: PaillierCiphertext) -> int:
    """L(c^λ mod n²)·μ mod n (1 ModExp + 1 ModMul)."""
    if psk.key_id != ppk.key_id:
        raise KeyMismatch("private key does not match public key")
    num = arith.l_function(arith.mod_exp(c.value, psk.lam, ppk.n_sq), ppk.n)
    return arith.mod_mul(num, psk.mu, ppk.n)


def hom_add(c1: PaillierCiphertext, c2: PaillierCiphertext) -> PaillierCiphertext:
    """Ciphertext product = plaintext sum mod n (1 ModMul)."""
    if c1.key_id != c2.key_id:
        raise KeyMismatch("homomorphic addition requires a single key")
    return PaillierCiphertext(
        public=c1.public,
        value=arith.mod_mul(c1.value, c2.value, c1.public.n_sq),
    )


def hom_neg(c: PaillierCiphertext) -> PaillierCiphertext:
    """c^(n−1) mod n²: decrypts to (n − m) mod n (1 ModExp)."""
    return PaillierCiphertext(
        public=c.public,
        value=arith.mod_exp(c.value, c.public.n - 1, c.public.n_sq),
    )


# ---------------------------------------------------------------------------
# Serialization: scheme tag 0x02, 8-byte key id, shared integer framing.

def serialize_ciphertext(c: PaillierCiphertext) -> bytes:
    width = arith.residue_width_bytes(c.public.n.bit_length())
    return (
        bytes([SCHEME_TAG])
        + c.key_id.to_bytes(8, "big")
        + arith.encode_residue(c.value, width)
    )


def deserialize_ciphertext(buf: bytes, ppk: PaillierPublicKey) -> PaillierCiphertext:
    if not buf or buf[0] != SCHEME_TAG:
        raise ParameterError("not a Paillier ciphertext frame")
    key_id = int.from_bytes(buf[1:9], "big")
    if key_id != ppk.key_id:
        raise KeyMismatch("ciphertext frame belongs to a different key")
    width = arith.residue_width_bytes(ppk.n.bit_length())
    value, _ = arith.decode_residue(buf, 9, width)
    return PaillierCiphertext(public=ppk, value=value)


def serialize_public_key(ppk: PaillierPublicKey) -> bytes:
    return (
        bytes([SCHEME_TAG])
        + ppk.key_id.to_bytes(8, "big")
        + arith.encode_int(ppk.n)
        + arith.encode_int(ppk.g)
    )


def deserialize_public_key(buf: bytes) -> PaillierPublicKey:
    if not buf or buf[0] != SCHEME_TAG:
        raise ParameterError("not a Paillier key frame")
    key_id = int.from_bytes(buf[1:9], "big")
    n, off = arith.decode_int(buf, 9)
    g, _ = arith.decode_int(buf, off)
    return PaillierPublicKey(key_id=key_id, n=n, n_sq=n * n, g=g)


def serialize_private_key(psk: PaillierPrivateKey) -> bytes:
    return (
        bytes([SCHEME_TAG])
        + psk.key_id.to_bytes(8, "big")
        + arith.encode_int(psk.lam)
        + arith.encode_int(psk.mu)
    )


def deserialize_private_key(buf: bytes) -> PaillierPrivateKey:
    if not buf or buf[0] != SCHEME_TAG:
        raise ParameterError("not a Paillier key frame")
    key_id = int.from_bytes(buf[1:9], "big")
    lam, off = arith.decode_int(buf, 9)
    mu, _ = arith.decode_int(buf, off)
    return PaillierPrivateKey(key_id=key_id, lam=lam, mu=mu)
