"""Multi-key variant Paillier: one modulus, one strong trapdoor, per-user weak keys.

System setup builds n = p·q from two structured primes sharing one small odd
prime pool (u, v_1..v_k): p = 2·u·v_1···v_k·v_p + 1 and likewise q. The strong
key λ = lcm(p−1, q−1) decrypts every user's ciphertexts; each user's weak key
is a distinct product t of pool factors (t | λ), able to decrypt only
ciphertexts under that user's own public key (n, g, h) where h = g^{nλ/t}.

Encryption of m with randomness r is g^m·h^r mod n²; weak decryption computes
L(c^t)·L(g^t)⁻¹ mod n and strong decryption L(c^λ)·L(g^λ)⁻¹ mod n, with the
denominators precomputable since they do not depend on the ciphertext.
Multiplying ciphertexts under one key adds their plaintexts mod n.

The public generator is sampled as g = (1+n)^a · y^{nλ/t} with a a unit mod n
and y random mod n², rejecting until the second factor has order exactly t.
This satisfies both validity conditions (g^{utn} ≡ 1 mod n² and
gcd(L(g^λ mod n²), n) = 1) and keeps h nontrivial so re-encryption of the
same plaintext with fresh randomness changes the ciphertext.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from itertools import combinations

import gmpy2

from . import arith
from .arith import OddPrimePool, StructuredPrime, powmod
from .errors import (
    KeyMismatch,
    ParameterError,
    PlaintextOutOfRange,
    PoolExhausted,
    SearchExhausted,
)

SECURITY_BITS = (512, 1024, 2048, 3072, 4096)

SCHEME_TAG = 0x01


class SubsetAllocator:
    """Hands out distinct factor subsets: singletons first, then larger
    subsets in lexicographic order. Single-writer: callers serialize access."""

    def __init__(self, factors: tuple[int, ...]):
        self._factors = factors
        self._subsets = (
            subset
            for size in range(1, len(factors) + 1)
            for subset in combinations(factors, size)
        )
        self.assigned: dict[int, tuple[int, ...]] = {}

    def allocate(self, user_id: int) -> tuple[int, ...]:
        if user_id in self.assigned:
            raise ParameterError(f"user {user_id} already holds a weak key")
        try:
            subset = next(self._subsets)
        except StopIteration:
            raise PoolExhausted(
                f"all {2 ** len(self._factors) - 1} factor subsets allocated"
            ) from None
        self.assigned[user_id] = subset
        return subset


@dataclass(eq=False)
class VpheSystemParams:
    """System modulus and the structured primes behind it.

    p, q and phi_n are key-authority material; everything user-facing travels
    in UserPublicKey. The allocator is the single mutable field.
    """

    n: int
    n_sq: int
    pool: OddPrimePool
    p: StructuredPrime
    q: StructuredPrime
    phi_n: int
    allocations: SubsetAllocator = field(repr=False)


@dataclass(frozen=True)
class StrongKey:
    lam: int


@dataclass(frozen=True)
class UserPublicKey:
    user_id: int
    n: int
    n_sq: int
    g: int
    h: int


@dataclass(frozen=True)
class UserWeakKey:
    """Weak trapdoor t plus the precomputed denominator L(g^t)⁻¹ mod n."""

    user_id: int
    t: int
    mu: int


@dataclass(slots=True)
class VpheCiphertext:
    public: UserPublicKey
    value: int

    @property
    def key_id(self) -> int:
        return self.public.user_id


def _structured_lambda(p: StructuredPrime, q: StructuredPrime) -> int:
    return arith.lcm(p.p - 1, q.p - 1)


def _build_params(pool: OddPrimePool, p: StructuredPrime, q: StructuredPrime):
    n = p.p * q.p
    params = VpheSystemParams(
        n=n,
        n_sq=n * n,
        pool=pool,
        p=p,
        q=q,
        phi_n=(p.p - 1) * (q.p - 1),
        allocations=SubsetAllocator(pool.factors),
    )
    lam = _structured_lambda(p, q)
    if lam % 2 != 0:
        raise ParameterError("lambda must be even")
    return params, StrongKey(lam=lam)


def system_setup(
    security_bits: int,
    k: int,
    rng: random.Random,
    bit_budget: int = 16,
) -> tuple[VpheSystemParams, StrongKey]:
    """Generate a fresh system: pool of k+1 small odd primes, then p and q.

    q is regenerated until n = p·q has exactly security_bits bits and
    gcd(n, φ(n)) = 1.
    """
    if security_bits not in SECURITY_BITS:
        raise ParameterError(f"security_bits must be one of {SECURITY_BITS}")
    if k < 2:
        raise ParameterError("pool size k must be at least 2")
    prime_bits = security_bits // 2
    if (k + 1) * bit_budget + 1 + 32 > prime_bits:
        raise ParameterError(
            f"pool of {k} factors at {bit_budget} bits leaves no cofactor headroom"
        )
    taken: set[int] = set()
    u = arith.random_prime(bit_budget, rng, exclude=taken)
    taken.add(u)
    factors = []
    for _ in range(k):
        v = arith.random_prime(bit_budget, rng, exclude=taken)
        taken.add(v)
        factors.append(v)
    pool = OddPrimePool(u=u, factors=tuple(factors), bit_budget=bit_budget)

    p = arith.gen_structured_prime(pool, prime_bits, rng)
    for _ in range(128):
        q = arith.gen_structured_prime(pool, prime_bits, rng)
        n = p.p * q.p
        if q.p == p.p or q.cofactor == p.cofactor:
            continue
        if n.bit_length() != security_bits:
            continue
        if math.gcd(n, (p.p - 1) * (q.p - 1)) != 1:
            continue
        return _build_params(pool, p, q)
    raise SearchExhausted("could not pair structured primes to an exact-width modulus")


def system_from_primes(
    pool: OddPrimePool, p: StructuredPrime, q: StructuredPrime
) -> tuple[VpheSystemParams, StrongKey]:
    """Build a system from externally chosen structured primes (toy fixtures).

    Both primes are re-verified against the pool before acceptance.
    """
    if p.p == q.p:
        raise ParameterError("p and q must differ")
    if not p.verify(pool) or not q.verify(pool):
        raise ParameterError("primes do not match the structured form over this pool")
    if math.gcd(p.p * q.p, (p.p - 1) * (q.p - 1)) != 1:
        raise ParameterError("gcd(n, phi(n)) must be 1")
    return _build_params(pool, p, q)


def _sample_generator(
    params: VpheSystemParams, lam: int, t: int, t_primes: tuple[int, ...], rng: random.Random
) -> tuple[int, int]:
    """Sample (g, h) for weak key t; rejection keeps the order structure exact."""
    n, n_sq = params.n, params.n_sq
    u = params.pool.u
    shift = n * (lam // t)
    for _ in range(10_000):
        a = rng.randrange(1, n)
        if math.gcd(a, n) != 1:
            continue
        y = rng.randrange(1, n_sq)
        if math.gcd(y, n) != 1:
            continue
        z = powmod(y, shift, n_sq)
        if z == 1:
            continue
        if any(powmod(z, t // v, n_sq) == 1 for v in t_primes):
            continue
        g = powmod(1 + n, a, n_sq) * z % n_sq
        # Validity conditions on g; both hold by construction but are cheap
        # to assert against and guard the rejection logic above.
        if powmod(g, u * t * n, n_sq) != 1:
            continue
        g_lam = powmod(g, lam, n_sq)
        if g_lam % n != 1 or math.gcd((g_lam - 1) // n, n) != 1:
            continue
        h = powmod(g, shift, n_sq)
        if h == 1:
            continue
        return g, h
    raise SearchExhausted("generator sampling failed")


def user_keygen(
    params: VpheSystemParams,
    strong: StrongKey,
    user_id: int,
    rng: random.Random,
) -> tuple[UserPublicKey, UserWeakKey]:
    """Allocate a fresh factor subset and derive the user's (vpk, wsk).

    Raises:
      PoolExhausted: every subset of the pool factors is already assigned.
    """
    subset = params.allocations.allocate(user_id)
    t = math.prod(subset)
    if strong.lam % t != 0:
        raise ParameterError("weak key does not divide lambda")
    g, h = _sample_generator(params, strong.lam, t, subset, rng)
    den = arith.l_function(powmod(g, t, params.n_sq), params.n)
    mu = int(gmpy2.invert(den, params.n))
    vpk = UserPublicKey(user_id=user_id, n=params.n, n_sq=params.n_sq, g=g, h=h)
    wsk = UserWeakKey(user_id=user_id, t=t, mu=mu)
    return vpk, wsk


def encrypt(
    vpk: UserPublicKey, m: int, rng: random.Random, r: int | None = None
) -> VpheCiphertext:
    """g^m · h^r mod n² with fresh r uniform in Z_n (2 ModExp + 1 ModMul).

    r is a test hook; production callers leave it None.
    """
    if not 0 <= m < vpk.n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n), got {m}")
    if r is None:
        r = rng.randrange(vpk.n)
    value = arith.mod_mul(
        arith.mod_exp(vpk.g, m, vpk.n_sq),
        arith.mod_exp(vpk.h, r, vpk.n_sq),
        vpk.n_sq,
    )
    return VpheCiphertext(public=vpk, value=value)


def weak_decrypt(
    wsk: UserWeakKey,
    vpk: UserPublicKey,
    c: VpheCiphertext,
    check_identity: bool = True,
) -> int:
    """L(c^t mod n²) · L(g^t mod n²)⁻¹ mod n (1 ModExp + 1 ModMul).

    Only ciphertexts under the matching public key decrypt; the identity
    check can be disabled to observe cross-key failure behaviour.
    """
    if check_identity and not (wsk.user_id == vpk.user_id == c.key_id):
        raise KeyMismatch(
            f"weak key {wsk.user_id} cannot open ciphertext of {c.key_id}"
        )
    num = arith.l_function(arith.mod_exp(c.value, wsk.t, vpk.n_sq), vpk.n)
    return arith.mod_mul(num, wsk.mu, vpk.n)


def precompute_strong_mu(ssk: StrongKey, vpk: UserPublicKey) -> int:
    """Ciphertext-independent denominator L(g^λ)⁻¹ mod n for one user."""
    den = arith.l_function(powmod(vpk.g, ssk.lam, vpk.n_sq), vpk.n)
    return int(gmpy2.invert(den, vpk.n))


def strong_decrypt(
    ssk: StrongKey,
    vpk: UserPublicKey,
    c: VpheCiphertext,
    mu: int | None = None,
) -> int:
    """L(c^λ mod n²) · L(g^λ mod n²)⁻¹ mod n; opens any user's ciphertext.

    With a precomputed mu this costs 1 ModExp + 1 ModMul; otherwise the
    denominator is derived on demand (1 extra ModExp + 1 ModInverse).
    """
    if mu is None:
        den = arith.l_function(arith.mod_exp(vpk.g, ssk.lam, vpk.n_sq), vpk.n)
        mu = arith.mod_inverse(den, vpk.n)
    num = arith.l_function(arith.mod_exp(c.value, ssk.lam, vpk.n_sq), vpk.n)
    return arith.mod_mul(num, mu, vpk.n)


def hom_add(c1: VpheCiphertext, c2: VpheCiphertext) -> VpheCiphertext:
    """Ciphertext product = plaintext sum mod n (1 ModMul)."""
    if c1.key_id != c2.key_id:
        raise KeyMismatch("homomorphic addition requires a single key")
    return VpheCiphertext(
        public=c1.public,
        value=arith.mod_mul(c1.value, c2.value, c1.public.n_sq),
    )


# ---------------------------------------------------------------------------
# Serialization: scheme tag 0x01, 8-byte user id, shared integer framing.

def serialize_ciphertext(c: VpheCiphertext) -> bytes:
    width = arith.residue_width_bytes(c.public.n.bit_length())
    return (
        bytes([SCHEME_TAG])
        + c.key_id.to_bytes(8, "big")
        + arith.encode_residue(c.value, width)
    )


def deserialize_ciphertext(buf: bytes, vpk: UserPublicKey) -> VpheCiphertext:
    if not buf or buf[0] != SCHEME_TAG:
        raise ParameterError("not a VP-HE ciphertext frame")
    user_id = int.from_bytes(buf[1:9], "big")
    if user_id != vpk.user_id:
        raise KeyMismatch("ciphertext frame belongs to a different user")
    width = arith.residue_width_bytes(vpk.n.bit_length())
    value, _ = arith.decode_residue(buf, 9, width)
    return VpheCiphertext(public=vpk, value=value)


def serialize_public_key(vpk: UserPublicKey) -> bytes:
    return (
        bytes([SCHEME_TAG])
        + vpk.user_id.to_bytes(8, "big")
        + arith.encode_int(vpk.n)
        + arith.encode_int(vpk.g)
        + arith.encode_int(vpk.h)
    )


def deserialize_public_key(buf: bytes) -> UserPublicKey:
    if not buf or buf[0] != SCHEME_TAG:
        raise ParameterError("not a VP-HE key frame")
    user_id = int.from_bytes(buf[1:9], "big")
    n, off = arith.decode_int(buf, 9)
    g, off = arith.decode_int(buf, off)
    h, _ = arith.decode_int(buf, off)
    return UserPublicKey(user_id=user_id, n=n, n_sq=n * n, g=g, h=h)
