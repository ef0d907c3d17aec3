import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sama import arith
from sama.counting import OpCounters, counting
from sama.errors import DomainError, NotInvertible, ParameterError, SearchExhausted

# ---------------------------------------------------------------------------
# Independent oracles.

def factorize(x):
    """Trial-division factorization (oracle)."""
    factors = {}
    d = 2
    while d * d <= x:
        while x % d == 0:
            factors[d] = factors.get(d, 0) + 1
            x //= d
        d += 1
    if x > 1:
        factors[x] = factors.get(x, 0) + 1
    return factors


def lcm_oracle(a, b):
    fa, fb = factorize(a), factorize(b)
    out = 1
    for p in set(fa) | set(fb):
        out *= p ** max(fa.get(p, 0), fb.get(p, 0))
    return out


def egcd_inverse(a, m):
    """Extended-Euclid inverse (oracle)."""
    t, new_t, r, new_r = 0, 1, m, a % m
    while new_r:
        q = r // new_r
        t, new_t = new_t, t - q * new_t
        r, new_r = new_r, r - q * new_r
    assert r == 1
    return t % m


def sieve_oracle(limit):
    flags = bytearray([1]) * limit
    flags[0] = flags[1] = 0
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = bytearray(len(range(i * i, limit, i)))
    return flags


# ---------------------------------------------------------------------------
# mod_exp

def test_mod_exp_zero_exponent():
    assert arith.mod_exp(5, 0, 7) == 1


def test_mod_exp_small():
    assert arith.mod_exp(2, 10, 1000) == 24


def test_mod_exp_carmichael_property_toy():
    # g^(n*lambda) = 1 for units mod n^2, on n = 11 * 23.
    p, q = 11, 23
    n = p * q
    lam = lcm_oracle(p - 1, q - 1)
    assert lam == 110
    rng = random.Random(5)
    for _ in range(50):
        g = rng.randrange(2, n * n)
        if math.gcd(g, n) != 1:
            continue
        assert arith.mod_exp(g, n * lam, n * n) == 1


def test_mod_exp_validates():
    with pytest.raises(ParameterError):
        arith.mod_exp(2, 3, 1)
    with pytest.raises(ParameterError):
        arith.mod_exp(2, -1, 5)


def test_mod_exp_counts():
    counters = OpCounters()
    with counting(counters):
        arith.mod_exp(3, 4, 7)
        arith.mod_mul(3, 4, 7)
    assert counters.modexp == 1 and counters.modmul == 1
    # outside any context: free-running
    arith.mod_exp(3, 4, 7)
    assert counters.modexp == 1


# ---------------------------------------------------------------------------
# l_function

def test_l_trivial():
    assert arith.l_function(1, 253) == 0
    assert arith.l_function(254, 253) == 1


def test_l_binomial_oracle():
    # (1+n)^m = 1 + m*n mod n^2, verified by direct multiplication.
    n = 253
    x = 1
    for _ in range(3):
        x = x * (1 + n) % (n * n)
    assert arith.l_function(x, n) == 3


def test_l_domain_error():
    with pytest.raises(DomainError):
        arith.l_function(5, 253)


@settings(max_examples=60)
@given(st.integers(min_value=2, max_value=500), st.data())
def test_l_inverts_binomial_exponent(n, data):
    m = data.draw(st.integers(min_value=0, max_value=n - 1))
    assert arith.l_function(pow(1 + n, m, n * n), n) == m


# ---------------------------------------------------------------------------
# lcm / mod_inverse

def test_lcm_examples():
    assert arith.lcm(4, 6) == 12
    assert arith.lcm(1, 9) == 9
    assert arith.lcm(10, 22) == lcm_oracle(10, 22) == 110


def test_lcm_validates():
    with pytest.raises(ParameterError):
        arith.lcm(0, 3)


def test_mod_inverse_examples():
    assert arith.mod_inverse(1, 97) == 1
    assert arith.mod_inverse(3, 7) == 5


def test_mod_inverse_oracle():
    rng = random.Random(11)
    for _ in range(100):
        m = rng.randrange(3, 10_000)
        a = rng.randrange(1, m)
        if math.gcd(a, m) != 1:
            continue
        assert arith.mod_inverse(a, m) == egcd_inverse(a, m)


def test_mod_inverse_toy_l_term():
    # denominator inverse as used by decryption, on toy Paillier keys
    p, q, n = 11, 23, 253
    lam = 110
    g = n + 1
    term = arith.l_function(pow(g, lam, n * n), n)
    inv = arith.mod_inverse(term, n)
    assert term * inv % n == 1


def test_mod_inverse_not_invertible():
    with pytest.raises(NotInvertible):
        arith.mod_inverse(6, 9)


# ---------------------------------------------------------------------------
# is_probable_prime

def test_primality_trivial():
    assert not arith.is_probable_prime(1)
    assert arith.is_probable_prime(2)


def test_carmichael_561():
    assert factorize(561) == {3: 1, 11: 1, 17: 1}
    assert not arith.is_probable_prime(561)


def test_primality_matches_sieve():
    flags = sieve_oracle(10_000)
    for x in range(10_000):
        assert arith.is_probable_prime(x) == bool(flags[x]), x


def test_primality_large_prime():
    # 2^127 - 1 is a Mersenne prime (beyond the deterministic-witness bound)
    assert arith.is_probable_prime(2**127 - 1)
    assert not arith.is_probable_prime((2**127 - 1) * 3)


# ---------------------------------------------------------------------------
# gen_structured_prime

TOY_POOL = arith.OddPrimePool(u=3, factors=(5, 7), bit_budget=4)


def test_structured_prime_small_exhaustive_oracle():
    # smallest structured primes over base 210, by exhaustive scan: the
    # fixture values (2311, 11) and (2731, 13) must be among them
    base = TOY_POOL.base
    assert base == 210
    flags = sieve_oracle(100_000)
    expected = []
    v = 3
    while len(expected) < 4:
        if flags[v] and flags[base * v + 1] and v not in (3, 5, 7):
            expected.append((base * v + 1, v))
        v += 2
    assert (2311, 11) in expected and (2731, 13) in expected

    rng = random.Random(0)
    sp = arith.gen_structured_prime(TOY_POOL, 40, rng)
    assert sp.p % base == 1
    assert arith.is_probable_prime(sp.cofactor)
    assert arith.is_probable_prime(sp.p)
    assert sp.verify(TOY_POOL)


def test_structured_prime_bit_length():
    rng = random.Random(7)
    sp = arith.gen_structured_prime(TOY_POOL, 64, rng)
    assert 63 <= sp.p.bit_length() <= 65
    assert sp.verify(TOY_POOL)


@pytest.mark.slow
def test_structured_prime_512():
    rng = random.Random(3)
    pool = arith.OddPrimePool(
        u=arith.random_prime(16, rng),
        factors=tuple(sorted({arith.random_prime(16, rng) for _ in range(4)}))[:2],
    )
    sp = arith.gen_structured_prime(pool, 512, rng)
    assert 511 <= sp.p.bit_length() <= 513
    assert arith.is_probable_prime(sp.p)


def test_structured_prime_residue_invariant():
    rng = random.Random(21)
    sp = arith.gen_structured_prime(TOY_POOL, 48, rng)
    for v in (TOY_POOL.u, *TOY_POOL.factors):
        assert sp.p % (2 * TOY_POOL.u * v) == 1


def test_pool_duplicate_rejected():
    with pytest.raises(ParameterError):
        arith.OddPrimePool(u=3, factors=(5, 5))
    with pytest.raises(ParameterError):
        arith.OddPrimePool(u=5, factors=(5, 7))
    with pytest.raises(ParameterError):
        arith.OddPrimePool(u=3, factors=(5, 9))


def test_structured_prime_headroom_check():
    with pytest.raises(ParameterError):
        arith.gen_structured_prime(TOY_POOL, 16 + 8, rng=random.Random(0))


def test_search_exhausted():
    rng = random.Random(0)
    with pytest.raises(SearchExhausted):
        arith.gen_structured_prime(TOY_POOL, 64, rng, max_attempts=1)


# ---------------------------------------------------------------------------
# framing

def test_int_framing_roundtrip():
    rng = random.Random(2)
    for x in [0, 1, 255, 256, rng.getrandbits(2048)]:
        buf = arith.encode_int(x)
        value, off = arith.decode_int(buf)
        assert value == x and off == len(buf)


def test_residue_framing():
    width = arith.residue_width_bytes(1024)
    assert width == 256
    buf = arith.encode_residue(12345, width)
    assert len(buf) == width
    value, _ = arith.decode_residue(buf, 0, width)
    assert value == 12345
