"""Shamir secret sharing over a prime field (the gate layer of the policy trees)."""

from __future__ import annotations

import random

from .errors import ParameterError


def split(
    secret: int, k: int, n_shares: int, prime: int, rng: random.Random
) -> list[tuple[int, int]]:
    """Shares (x, f(x)) at x = 1..n_shares of a random degree k−1 polynomial
    with f(0) = secret. Any k shares reconstruct; k−1 reveal nothing."""
    if not 0 <= secret < prime:
        raise ParameterError("secret outside field")
    if not 1 <= k <= n_shares:
        raise ParameterError(f"threshold {k} outside 1..{n_shares}")
    coeffs = [secret] + [rng.randrange(prime) for _ in range(k - 1)]
    shares = []
    for x in range(1, n_shares + 1):
        y = 0
        for c in reversed(coeffs):
            y = (y * x + c) % prime
        shares.append((x, y))
    return shares


def lagrange_at_zero(points: list[tuple[int, int]], prime: int) -> int:
    """Interpolate f(0) from (x, y) points with distinct x coordinates."""
    xs = [x for x, _ in points]
    if len(set(xs)) != len(xs):
        raise ParameterError("duplicate share indices")
    total = 0
    for i, (xi, yi) in enumerate(points):
        num = 1
        den = 1
        for j, (xj, _) in enumerate(points):
            if i == j:
                continue
            num = num * (-xj) % prime
            den = den * (xi - xj) % prime
        total = (total + yi * num * pow(den, -1, prime)) % prime
    return total
