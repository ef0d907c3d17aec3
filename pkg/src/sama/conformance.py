"""Closed-form conformance checks for operation counts and link bytes.

Every check compares a measured counter or payload-bit total against the
cost model's closed form:

  DO (any flow)      2 ModExp + 1 ModMul per encryption
  DO* (own open)     1 ModExp + 1 ModMul
  SP (own aggregate) (N−1) ModMul
  SP (single)        4 ModExp + (N+3) ModMul
  CP (single)        3 ModExp + 2 ModMul + (γ+1) Exp
  SP (multi)         (2N+2) ModExp + (2N+2) ModMul
  CP (multi)         (N+2) ModExp + (N+1) ModMul + (γ+1) Exp
  DR                 1 ModExp + 1 ModMul + ϑ BiPair

  uploads            2·N·L(n) payload bits on DO→SP
  single round trip  4·L(n) homomorphic bits on SP↔CP (+ (γ+1)·ℒ separately)
  multi round trip   2(N+1)·L(n) homomorphic bits on SP↔CP (+ ABE separately)
  delivery           2·L(n) homomorphic bits on SP→DR (+ ABE separately)

Counters are independent of modulus size, so the computation grid runs on
small systems; the byte grid runs at n_bits = 1024 where the closed forms
are exact.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import arith, cpabe, vphe
from .counting import OpCounters, counting
from .harness import measure_communication
from .messages import Role
from .policy import parse_policy
from .protocol import World

SMALL_POOL = (3, (5, 7, 11, 13, 17, 19, 23))


@dataclass
class Check:
    name: str
    expected: object
    measured: object

    @property
    def ok(self) -> bool:
        return self.expected == self.measured


def _and_policy(width: int) -> tuple[str, list[str]]:
    attrs = [f"attr{i:02d}" for i in range(width)]
    return " AND ".join(attrs) if width > 1 else attrs[0], attrs


def small_multiuser_world(seed: int, universe, subsets_needed: int = 1) -> World:
    """A fast many-user system: 7-factor pool over tiny primes (127 subsets)."""
    u, factors = SMALL_POOL
    if subsets_needed > 2 ** len(factors) - 1:
        raise ValueError("pool too small for the requested user count")
    pool = vphe.OddPrimePool(u=u, factors=factors, bit_budget=5)
    rng = random.Random(seed)
    p = arith.gen_structured_prime(pool, pool.base.bit_length() + 36, rng)
    while True:
        q = arith.gen_structured_prime(pool, pool.base.bit_length() + 36, rng)
        if q.p != p.p and q.cofactor != p.cofactor and math.gcd(
            p.p * q.p, (p.p - 1) * (q.p - 1)
        ) == 1:
            break
    params, strong = vphe.system_from_primes(pool, p, q)
    abe_pk, abe_mk = cpabe.setup(tuple(universe), 256, rng)
    return World(params, strong, abe_pk, abe_mk, seed=rng.randrange(2**63))


def _counters(outcome, label: str) -> OpCounters:
    return outcome.role_costs[label]


def computation_checks(
    counts=(1, 2, 10, 100), gammas=(1, 5, 10), seed: int = 2024
) -> list[Check]:
    """Measured request-scope counters vs the table formulas."""
    checks: list[Check] = []
    policy_text, attrs = _and_policy(2)
    gamma = 2

    # DO-DO and DRs-DO: one owner with N uploads (toy modulus).
    for n in counts:
        world = World.toy(universe=attrs, seed=seed)
        tree = parse_policy(policy_text)
        owner = world.add_data_owner(tree, tree)
        before = owner.counters.snapshot()
        for _ in range(n):
            world.upload(owner, world.rng.randrange(world.params.n))
        delta = owner.counters.delta(before)
        checks.append(Check(f"do-uploads/N={n}/modexp", 2 * n, delta.modexp))
        checks.append(Check(f"do-uploads/N={n}/modmul", n, delta.modmul))

        outcome = world.request_own(owner)
        sp = _counters(outcome, "SP")
        opener = _counters(outcome, f"DO{owner.do_id}")
        checks.append(Check(f"do-do/N={n}/SP", (0, n - 1), (sp.modexp, sp.modmul)))
        checks.append(Check(f"do-do/N={n}/DO*", (1, 1), (opener.modexp, opener.modmul)))

        requester = world.add_requester(attrs)
        outcome = world.request_single(requester, owner)
        sp = _counters(outcome, "SP")
        cp = _counters(outcome, "CP")
        dr = _counters(outcome, f"DR{requester.dr_id}")
        checks.append(Check(
            f"drs-do/N={n}/SP", (4, n + 3), (sp.modexp, sp.modmul)
        ))
        checks.append(Check(
            f"drs-do/N={n}/CP", (3, 2, gamma + 1), (cp.modexp, cp.modmul, cp.exp)
        ))
        checks.append(Check(
            f"drs-do/N={n}/DR", (1, 1, gamma), (dr.modexp, dr.modmul, dr.bipair)
        ))

    # DRs-DOs: N owners, one upload each (small multi-user modulus).
    for n in counts:
        world = small_multiuser_world(seed + n, attrs, subsets_needed=n)
        tree = parse_policy(policy_text)
        for _ in range(n):
            owner = world.add_data_owner(tree, tree)
            world.upload(owner, world.rng.randrange(world.params.n))
        requester = world.add_requester(attrs)
        outcome = world.request_multi(requester)
        sp = _counters(outcome, "SP")
        cp = _counters(outcome, "CP")
        dr = _counters(outcome, f"DR{requester.dr_id}")
        checks.append(Check(
            f"drs-dos/N={n}/SP", (2 * n + 2, 2 * n + 2), (sp.modexp, sp.modmul)
        ))
        checks.append(Check(
            f"drs-dos/N={n}/CP",
            (n + 2, n + 1, gamma + 1),
            (cp.modexp, cp.modmul, cp.exp),
        ))
        checks.append(Check(
            f"drs-dos/N={n}/DR", (1, 1, gamma), (dr.modexp, dr.modmul, dr.bipair)
        ))

    # Policy width sweep: γ leaves drive CP's Exp term and the DR unwraps.
    for gamma in gammas:
        text, gattrs = _and_policy(gamma)
        world = World.toy(universe=gattrs, seed=seed + gamma)
        tree = parse_policy(text)
        owner = world.add_data_owner(tree, tree)
        world.upload(owner, world.rng.randrange(world.params.n))
        world.upload(owner, world.rng.randrange(world.params.n))
        requester = world.add_requester(gattrs)
        outcome = world.request_single(requester, owner)
        cp = _counters(outcome, "CP")
        dr = _counters(outcome, f"DR{requester.dr_id}")
        checks.append(Check(f"drs-do/gamma={gamma}/CP-exp", gamma + 1, cp.exp))
        checks.append(Check(f"drs-do/gamma={gamma}/DR-bipair", gamma, dr.bipair))

    # Access-control module counters.
    attrs10 = [f"u{i}" for i in range(10)]
    rng = random.Random(seed)
    ctr = OpCounters()
    with counting(ctr):
        pk, mk = cpabe.setup(attrs10, 256, rng)
    checks.append(Check("abe-setup/|U|=10", (11, 1), (ctr.exp, ctr.bipair)))
    ctr = OpCounters()
    with counting(ctr):
        cpabe.keygen(mk, attrs10[:6], rng)
    checks.append(Check("abe-keygen/6-attrs", 12, ctr.exp))
    ctr = OpCounters()
    with counting(ctr):
        cpabe.encrypt(pk, b"payload", parse_policy(attrs10[0]), rng)
    checks.append(Check("abe-encrypt/1-leaf", 2, ctr.exp))
    return checks


def communication_checks(
    upload_counts=(10, 100, 1000, 10000),
    multi_count: int = 10,
    seed: int = 77,
    n_bits: int = 1024,
    prebuilt_upload_world=None,
) -> list[Check]:
    """Measured link payload bits vs the closed forms at n_bits.

    prebuilt_upload_world, when given, must be (world, owner) with at least
    max(upload_counts) uploads already stored (lets callers reuse the heavy
    fixture).
    """
    checks: list[Check] = []
    policy_text, attrs = _and_policy(2)
    gamma = 2
    ell = cpabe.ELEMENT_BITS
    L = n_bits

    if prebuilt_upload_world is None:
        world = World.standard(n_bits, 2, attrs, seed=seed)
        tree = parse_policy(policy_text)
        owner = world.add_data_owner(tree, tree)
        for _ in range(max(upload_counts)):
            world.upload(owner, world.rng.randrange(world.params.n))
    else:
        world, owner = prebuilt_upload_world

    uploads = [e for e in world.transcript.entries if e.msg_type.name == "DATA_UPLOAD"]
    for n in upload_counts:
        measured = sum(e.he_bits for e in uploads[:n])
        checks.append(Check(f"bits/do-sp/N={n}", 2 * n * L, measured))

    requester = world.add_requester(attrs)
    outcome = world.request_single(requester, owner, 0, 2)
    links = measure_communication(world.transcript, request_ids={outcome.request_id})
    sp_cp = links[(Role.SP, Role.CP)]
    cp_sp = links[(Role.CP, Role.SP)]
    sp_dr = links[(Role.SP, Role.DR)]
    checks.append(Check("bits/drs-do/sp-cp-he", 4 * L, sp_cp.he_bits + cp_sp.he_bits))
    checks.append(Check("bits/drs-do/sp-cp-abe", (gamma + 1) * ell, cp_sp.abe_bits))
    checks.append(Check("bits/drs-do/sp-dr-he", 2 * L, sp_dr.he_bits))
    checks.append(Check("bits/drs-do/sp-dr-abe", (gamma + 1) * ell, sp_dr.abe_bits))

    multi_world = World.standard(n_bits, 4, attrs, seed=seed + 1)
    tree = parse_policy(policy_text)
    for _ in range(multi_count):
        mo = multi_world.add_data_owner(tree, tree)
        multi_world.upload(mo, multi_world.rng.randrange(multi_world.params.n))
    requester = multi_world.add_requester(attrs)
    outcome = multi_world.request_multi(requester)
    links = measure_communication(multi_world.transcript, request_ids={outcome.request_id})
    sp_cp = links[(Role.SP, Role.CP)]
    cp_sp = links[(Role.CP, Role.SP)]
    sp_dr = links[(Role.SP, Role.DR)]
    checks.append(Check(
        f"bits/drs-dos/sp-cp-he/N={multi_count}",
        2 * (multi_count + 1) * L,
        sp_cp.he_bits + cp_sp.he_bits,
    ))
    checks.append(Check("bits/drs-dos/sp-dr-he", 2 * L, sp_dr.he_bits))
    checks.append(Check("bits/drs-dos/sp-dr-abe", (gamma + 1) * ell, sp_dr.abe_bits))
    return checks


def render_checks(checks: list[Check]) -> str:
    width = max(len(c.name) for c in checks)
    lines = []
    for c in checks:
        status = "PASS" if c.ok else "FAIL"
        lines.append(f"{c.name:<{width}}  expected={c.expected!r:<24} measured={c.measured!r:<24} {status}")
    passed = sum(1 for c in checks if c.ok)
    lines.append(f"{passed}/{len(checks)} checks passed")
    return "\n".join(lines)
