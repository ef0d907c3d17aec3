"""Arbitrary-precision modular arithmetic and structured-prime generation.

Residue exponentiation and inversion are backed by gmpy2 for speed; every
public operation that the cost model tracks (exponentiation, multiplication,
inversion) reports itself through :mod:`sama.counting` when a counting
context is active. Integers cross module boundaries in a shared framing:
big-endian minimal byte arrays behind a 4-byte big-endian length prefix,
plus fixed-width big-endian residues for ciphertext payloads.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import gmpy2

from .counting import tick_modexp, tick_modinv, tick_modmul
from .errors import DomainError, NotInvertible, ParameterError, SearchExhausted

# Deterministic Miller-Rabin witness set, valid for x < 3.317e24.
_DETERMINISTIC_BOUND = 3_317_044_064_679_887_385_961_981
_DETERMINISTIC_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _sieve(limit: int) -> tuple[int, ...]:
    flags = bytearray([1]) * limit
    flags[0] = flags[1] = 0
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = bytearray(len(range(i * i, limit, i)))
    return tuple(i for i in range(limit) if flags[i])


SMALL_PRIMES = _sieve(2048)


def powmod(base: int, exponent: int, modulus: int) -> int:
    """Uncounted modular exponentiation (internal plumbing, key generation)."""
    return int(gmpy2.powmod(base, exponent, modulus))


def mod_exp(base: int, exponent: int, modulus: int) -> int:
    """base**exponent mod modulus, reported as one ModExp.

    Raises:
      ParameterError: modulus < 2 or negative exponent.
    """
    if modulus < 2:
        raise ParameterError(f"modulus must be >= 2, got {modulus}")
    if exponent < 0:
        raise ParameterError("exponent must be nonnegative")
    tick_modexp()
    return int(gmpy2.powmod(base, exponent, modulus))


def mod_mul(a: int, b: int, modulus: int) -> int:
    """a*b mod modulus, reported as one ModMul."""
    tick_modmul()
    return a * b % modulus


def l_function(x: int, n: int) -> int:
    """The discrete-log extractor L(x) = (x-1)/n on the 1+n subgroup.

    Raises:
      DomainError: x is not ≡ 1 mod n (malformed ciphertext or wrong trapdoor).
    """
    if x % n != 1:
        raise DomainError("L-function input not congruent to 1 mod n")
    return (x - 1) // n


def lcm(a: int, b: int) -> int:
    """Least common multiple of two positive integers."""
    if a < 1 or b < 1:
        raise ParameterError("lcm arguments must be positive")
    return math.lcm(a, b)


def mod_inverse(a: int, m: int) -> int:
    """Inverse of a mod m, reported as one ModInverse.

    Raises:
      NotInvertible: gcd(a, m) != 1.
    """
    tick_modinv()
    try:
        return int(gmpy2.invert(a, m))
    except ZeroDivisionError:
        raise NotInvertible(f"no inverse: gcd != 1 for {a % m} mod {m}") from None


def is_probable_prime(x: int, rounds: int = 64) -> bool:
    """Miller-Rabin verdict on x.

    Deterministic below 3.317e24 via the 12-witness set; above that, `rounds`
    bases drawn from the fixed small-prime list keep verdicts reproducible
    (candidates here come from the harness RNG, not an adversary).
    """
    if x < 2:
        return False
    for p in SMALL_PRIMES:
        if x == p:
            return True
        if x % p == 0:
            return False
    d = x - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    if x < _DETERMINISTIC_BOUND:
        bases = _DETERMINISTIC_WITNESSES
    else:
        bases = SMALL_PRIMES[: max(1, rounds)]
    for a in bases:
        y = int(gmpy2.powmod(a, d, x))
        if y == 1 or y == x - 1:
            continue
        for _ in range(s - 1):
            y = y * y % x
            if y == x - 1:
                break
        else:
            return False
    return True


def _quick_composite(x: int) -> bool:
    """Cheap trial-division filter for candidate streams."""
    for p in SMALL_PRIMES:
        if x % p == 0:
            return x != p
    return False


def random_prime(bits: int, rng: random.Random, exclude: frozenset[int] | set[int] = frozenset()) -> int:
    """Random probable prime of exactly `bits` bits, outside `exclude`."""
    if bits < 3:
        raise ParameterError("prime size must be at least 3 bits")
    while True:
        x = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if x in exclude or _quick_composite(x):
            continue
        if is_probable_prime(x):
            return x


@dataclass(frozen=True)
class OddPrimePool:
    """The shared small-prime pool (u, v_1..v_k) both system primes are built over."""

    u: int
    factors: tuple[int, ...]
    bit_budget: int = 16

    def __post_init__(self):
        elements = (self.u, *self.factors)
        if len(self.factors) == 0:
            raise ParameterError("pool needs at least one factor")
        if len(set(elements)) != len(elements):
            raise ParameterError("pool elements must be pairwise distinct")
        for e in elements:
            if e % 2 == 0 or not is_probable_prime(e):
                raise ParameterError(f"pool element {e} is not an odd prime")

    @property
    def base(self) -> int:
        """2·u·v_1···v_k, the fixed part of every generated prime minus one."""
        return 2 * self.u * math.prod(self.factors)


@dataclass(frozen=True)
class StructuredPrime:
    """A prime p = pool.base · cofactor + 1 with prime cofactor."""

    p: int
    cofactor: int

    def verify(self, pool: OddPrimePool, rounds: int = 64) -> bool:
        return (
            self.p == pool.base * self.cofactor + 1
            and is_probable_prime(self.p, rounds)
            and is_probable_prime(self.cofactor, rounds)
        )


def gen_structured_prime(
    pool: OddPrimePool,
    target_bits: int,
    rng: random.Random,
    max_attempts: int = 10**6,
) -> StructuredPrime:
    """Search for a prime of ~target_bits bits of the form pool.base·v + 1.

    The cofactor v is itself a probable prime, distinct from the pool
    elements. Candidates are filtered by trial division and a 2-round
    Miller-Rabin pass before the full 64-round verdict.

    Raises:
      ParameterError: target_bits leaves under 32 bits of cofactor headroom.
      SearchExhausted: no hit within max_attempts candidates.
    """
    base = pool.base
    if target_bits < base.bit_length() + 32:
        raise ParameterError(
            f"target_bits={target_bits} too small for pool base of {base.bit_length()} bits"
        )
    # Sample v so that base*v + 1 lands in [2^(target-1), 2^target).
    lo = ((1 << (target_bits - 1)) - 1) // base + 1
    hi = ((1 << target_bits) - 1) // base
    pool_elements = {pool.u, *pool.factors}
    for _ in range(max_attempts):
        v = rng.randrange(lo, hi + 1) | 1
        if v in pool_elements or _quick_composite(v):
            continue
        if not is_probable_prime(v, 2):
            continue
        p = base * v + 1
        if _quick_composite(p) or not is_probable_prime(p, 2):
            continue
        if is_probable_prime(v) and is_probable_prime(p):
            return StructuredPrime(p=p, cofactor=v)
    raise SearchExhausted(f"no structured prime of {target_bits} bits in {max_attempts} attempts")


# ---------------------------------------------------------------------------
# Shared integer framing.

def encode_int(x: int) -> bytes:
    """Big-endian minimal bytes behind a 4-byte big-endian length prefix."""
    if x < 0:
        raise ParameterError("framing covers nonnegative integers only")
    body = x.to_bytes((x.bit_length() + 7) // 8, "big") if x else b""
    return len(body).to_bytes(4, "big") + body


def decode_int(buf: bytes, offset: int = 0) -> tuple[int, int]:
    """Inverse of encode_int; returns (value, next_offset)."""
    if offset + 4 > len(buf):
        raise ParameterError("truncated integer frame")
    size = int.from_bytes(buf[offset : offset + 4], "big")
    end = offset + 4 + size
    if end > len(buf):
        raise ParameterError("truncated integer frame body")
    return int.from_bytes(buf[offset + 4 : end], "big"), end


def residue_width_bytes(modulus_bits: int) -> int:
    """Serialized width of one residue mod n², given L(n) = modulus_bits."""
    return (2 * modulus_bits + 7) // 8


def encode_residue(x: int, width_bytes: int) -> bytes:
    """Fixed-width big-endian residue (ciphertext payload unit)."""
    return x.to_bytes(width_bytes, "big")


def decode_residue(buf: bytes, offset: int, width_bytes: int) -> tuple[int, int]:
    end = offset + width_bytes
    if end > len(buf):
        raise ParameterError("truncated residue")
    return int.from_bytes(buf[offset:end], "big"), end
