"""Ciphertext-policy attribute-based encryption over threshold access trees.

Construction: top-down secret sharing — the encryptor draws a root secret,
every gate splits its share with a fresh degree-(k−1) polynomial, and each
leaf share is blinded by a per-attribute key-encapsulation value derived from
an ElGamal-style exchange in a fixed multiplicative group (RFC 2409 Group 2,
1024-bit modulus; generator 2). Decryption unwraps the leaves of a minimal
satisfying subtree and recombines shares with Lagrange coefficients at zero.
The recovered root secret keys an authenticated envelope (ChaCha20-Poly1305)
around the actual payload, typically a serialized result-delivery private key.

The group binding preserves gating semantics exactly — a key whose attributes
do not satisfy the tree cannot recover the envelope key — and the operation
counters follow the standard cost model for this construction family
(setup: (|U|+1) Exp + 1 BiPair, keygen: 2·|attrs| Exp, encrypt: (|γ|+1) Exp
with γ the leaf count, decrypt: one pairing-equivalent per used leaf). It is
a functional stand-in, not a pairing group: distinct users' keys are not
collusion-resistant and no hardness claim is made beyond CDH in the group.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Mapping

import gmpy2
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

from . import policy as policy_mod
from . import shamir
from .counting import tick_bipair, tick_exp
from .errors import (
    EmptyUniverse,
    IntegrityError,
    MalformedTree,
    ParameterError,
    PolicyNotSatisfied,
    UnknownAttribute,
)
from .policy import Gate, Leaf, Node, format_policy, leaves, parse_policy, satisfies

# RFC 2409 Oakley Group 2: 1024-bit safe-prime modulus, generator 2.
GROUP_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF",
    16,
)
GROUP_GENERATOR = 2
SUBGROUP_ORDER = (GROUP_PRIME - 1) // 2
ELEMENT_BITS = GROUP_PRIME.bit_length()

# Field the gate polynomials live in (secp256k1 field prime).
SHARE_PRIME = 2**256 - 2**32 - 977

_NONCE_BYTES = 12


def group_exp(base: int, exponent: int) -> int:
    """Group exponentiation, reported as one Exp."""
    tick_exp()
    return int(gmpy2.powmod(base, exponent, GROUP_PRIME))


def pair_digest(a: int, b: int) -> bytes:
    """Pairing stand-in: a bilinear-slot digest, reported as one BiPair."""
    tick_bipair()
    size = (ELEMENT_BITS + 7) // 8
    return hashlib.sha256(a.to_bytes(size, "big") + b.to_bytes(size, "big")).digest()


def _leaf_unwrap(u_value: int, secret_exp: int) -> int:
    """Recover the leaf KEM value U^a; one pairing-equivalent on the meter."""
    tick_bipair()
    return int(gmpy2.powmod(u_value, secret_exp, GROUP_PRIME))


def _mask_for(kem_value: int, leaf_index: int) -> int:
    """Uniform-mod-P blinds derived from a leaf KEM value."""
    size = (ELEMENT_BITS + 7) // 8
    seed = kem_value.to_bytes(size, "big") + leaf_index.to_bytes(4, "big")
    stream = b"".join(
        hashlib.sha256(seed + bytes([i])).digest() for i in range((size + 48) // 32 + 1)
    )
    return int.from_bytes(stream, "big") % GROUP_PRIME


@dataclass(frozen=True)
class AbePublicParams:
    universe: tuple[str, ...]
    attr_elements: Mapping[str, int]
    blind_base: int
    pair_seed: bytes
    element_bits: int = ELEMENT_BITS


@dataclass(frozen=True)
class AbeMasterKey:
    params: AbePublicParams
    attr_secrets: Mapping[str, int]
    alpha: int


@dataclass(frozen=True)
class AbeUserKey:
    holder_id: int
    attributes: frozenset[str]
    unwrap: Mapping[str, int]
    tags: Mapping[str, int]


@dataclass(frozen=True)
class AbeCiphertext:
    tree: Node
    ephemeral: int
    components: tuple[int, ...]
    nonce: bytes
    sealed: bytes
    element_bits: int = ELEMENT_BITS

    @property
    def group_element_bits(self) -> int:
        """(|γ|+1)·ℒ: the ephemeral element plus one component per leaf."""
        return (len(self.components) + 1) * self.element_bits


def setup(
    universe: list[str] | tuple[str, ...], security_param: int, rng: random.Random
) -> tuple[AbePublicParams, AbeMasterKey]:
    """Publish one group element per universe attribute plus the blind base.

    Cost: (|U|+1) Exp + 1 BiPair.
    """
    universe = tuple(universe)
    if not universe:
        raise EmptyUniverse("attribute universe must be nonempty")
    if len(set(universe)) != len(universe):
        raise ParameterError("universe attributes must be distinct")
    if security_param > ELEMENT_BITS:
        raise ParameterError(f"group binding caps the security parameter at {ELEMENT_BITS}")
    attr_secrets = {a: rng.randrange(1, SUBGROUP_ORDER) for a in universe}
    attr_elements = {a: group_exp(GROUP_GENERATOR, s) for a, s in attr_secrets.items()}
    alpha = rng.randrange(1, SUBGROUP_ORDER)
    blind_base = group_exp(GROUP_GENERATOR, alpha)
    pair_seed = pair_digest(GROUP_GENERATOR, blind_base)
    pk = AbePublicParams(
        universe=universe,
        attr_elements=attr_elements,
        blind_base=blind_base,
        pair_seed=pair_seed,
    )
    return pk, AbeMasterKey(params=pk, attr_secrets=attr_secrets, alpha=alpha)


def keygen(
    mk: AbeMasterKey, attributes, rng: random.Random, holder_id: int = 0
) -> AbeUserKey:
    """Private key covering exactly `attributes` (2 Exp per attribute).

    Each attribute costs one public-element consistency check and one
    holder-specific key tag, so two serialized keys never coincide.
    """
    attributes = frozenset(attributes)
    unknown = attributes - set(mk.params.universe)
    if unknown:
        raise UnknownAttribute(f"not in universe: {sorted(unknown)}")
    kappa = rng.randrange(1, SUBGROUP_ORDER)
    unwrap = {}
    tags = {}
    for attr in sorted(attributes):
        secret = mk.attr_secrets[attr]
        if group_exp(GROUP_GENERATOR, secret) != mk.params.attr_elements[attr]:
            raise IntegrityError(f"master/public mismatch for attribute {attr!r}")
        tags[attr] = group_exp(mk.params.attr_elements[attr], kappa)
        unwrap[attr] = secret
    return AbeUserKey(
        holder_id=holder_id, attributes=attributes, unwrap=unwrap, tags=tags
    )


def _share_leaves(
    node: Node, secret: int, rng: random.Random, out: list[tuple[str, int]]
) -> None:
    if isinstance(node, Leaf):
        out.append((node.attribute, secret))
        return
    shares = shamir.split(secret, node.k, len(node.children), SHARE_PRIME, rng)
    for child, (_, value) in zip(node.children, shares):
        _share_leaves(child, value, rng, out)


def encrypt(
    pk: AbePublicParams, payload: bytes, tree: Node, rng: random.Random
) -> AbeCiphertext:
    """Seal `payload` so only keys satisfying `tree` can open it.

    Cost: (|γ|+1) Exp — one ephemeral element plus one KEM value per leaf.
    """
    _validate_tree(tree)
    unknown = set(leaves(tree)) - set(pk.universe)
    if unknown:
        raise UnknownAttribute(f"not in universe: {sorted(unknown)}")
    secret = rng.randrange(SHARE_PRIME)
    leaf_shares: list[tuple[str, int]] = []
    _share_leaves(tree, secret, rng, leaf_shares)

    rho = rng.randrange(1, SUBGROUP_ORDER)
    ephemeral = group_exp(GROUP_GENERATOR, rho)
    components = []
    for index, (attr, share) in enumerate(leaf_shares):
        kem = group_exp(pk.attr_elements[attr], rho)
        components.append((share + _mask_for(kem, index)) % GROUP_PRIME)

    key = hashlib.sha256(secret.to_bytes(32, "big") + pk.pair_seed).digest()
    nonce = rng.getrandbits(8 * _NONCE_BYTES).to_bytes(_NONCE_BYTES, "big")
    sealed = ChaCha20Poly1305(key).encrypt(
        nonce, payload, format_policy(tree).encode()
    )
    return AbeCiphertext(
        tree=tree,
        ephemeral=ephemeral,
        components=tuple(components),
        nonce=nonce,
        sealed=sealed,
    )


def _validate_tree(node: Node) -> None:
    if isinstance(node, Leaf):
        return
    if not isinstance(node, Gate):
        raise MalformedTree(f"unexpected node {node!r}")
    if not 1 <= node.k <= len(node.children):
        raise MalformedTree(f"threshold {node.k} outside 1..{len(node.children)}")
    for child in node.children:
        _validate_tree(child)


def _plan(node: Node, attrs: frozenset, leaf_base: int):
    """(cost, plan) for the cheapest satisfying subtree, leftmost on ties.

    Leaf plans are (leaf_index, attribute); gate plans keep the child share
    positions needed for interpolation. leaf_base tracks the DFS leaf
    numbering used by encryption.
    """
    if isinstance(node, Leaf):
        if node.attribute in attrs:
            return 1, ("leaf", leaf_base, node.attribute)
        return None, None
    options = []
    base = leaf_base
    for position, child in enumerate(node.children, start=1):
        cost, plan = _plan(child, attrs, base)
        if cost is not None:
            options.append((cost, position, plan))
        base += policy_mod.leaf_count(child)
    if len(options) < node.k:
        return None, None
    options.sort(key=lambda item: item[0])  # stable: leftmost wins ties
    chosen = options[: node.k]
    return sum(c for c, _, _ in chosen), ("gate", [(pos, plan) for _, pos, plan in chosen])


def _execute_plan(plan, ct: AbeCiphertext, sk: AbeUserKey) -> int:
    if plan[0] == "leaf":
        _, index, attr = plan
        kem = _leaf_unwrap(ct.ephemeral, sk.unwrap[attr])
        share = (ct.components[index] - _mask_for(kem, index)) % GROUP_PRIME
        if share >= SHARE_PRIME:
            raise IntegrityError("leaf component outside the share field")
        return share
    _, children = plan
    points = [(pos, _execute_plan(child_plan, ct, sk)) for pos, child_plan in children]
    return shamir.lagrange_at_zero(points, SHARE_PRIME)


def decrypt(pk: AbePublicParams, ct: AbeCiphertext, sk: AbeUserKey) -> bytes:
    """Open the envelope iff sk's attributes satisfy the embedded tree.

    Cost on success: one pairing-equivalent per leaf of the chosen minimal
    satisfying subtree (ϑ BiPair).

    Raises:
      PolicyNotSatisfied: attributes do not satisfy the tree.
      IntegrityError: satisfied policy but corrupted ciphertext.
    """
    cost, plan = _plan(ct.tree, sk.attributes, 0)
    if cost is None:
        raise PolicyNotSatisfied(
            f"attributes {sorted(sk.attributes)} do not satisfy the access tree"
        )
    secret = _execute_plan(plan, ct, sk)
    key = hashlib.sha256(secret.to_bytes(32, "big") + pk.pair_seed).digest()
    try:
        return ChaCha20Poly1305(key).decrypt(
            ct.nonce, ct.sealed, format_policy(ct.tree).encode()
        )
    except InvalidTag:
        raise IntegrityError("envelope failed authentication") from None


# ---------------------------------------------------------------------------
# Wire format: policy text, then fixed-width group elements, then envelope.

def serialize_ciphertext(ct: AbeCiphertext) -> bytes:
    width = (ct.element_bits + 7) // 8
    tree_text = format_policy(ct.tree).encode()
    head = len(tree_text).to_bytes(4, "big") + tree_text
    body = ct.ephemeral.to_bytes(width, "big")
    body += len(ct.components).to_bytes(2, "big")
    for comp in ct.components:
        body += comp.to_bytes(width, "big")
    tail = ct.nonce + len(ct.sealed).to_bytes(4, "big") + ct.sealed
    return head + body + tail


def deserialize_ciphertext(buf: bytes) -> AbeCiphertext:
    text_len = int.from_bytes(buf[0:4], "big")
    tree = parse_policy(buf[4 : 4 + text_len].decode())
    off = 4 + text_len
    width = (ELEMENT_BITS + 7) // 8
    ephemeral = int.from_bytes(buf[off : off + width], "big")
    off += width
    count = int.from_bytes(buf[off : off + 2], "big")
    off += 2
    components = []
    for _ in range(count):
        components.append(int.from_bytes(buf[off : off + width], "big"))
        off += width
    nonce = buf[off : off + _NONCE_BYTES]
    off += _NONCE_BYTES
    sealed_len = int.from_bytes(buf[off : off + 4], "big")
    sealed = buf[off + 4 : off + 4 + sealed_len]
    if len(sealed) != sealed_len or count != len(leaves(tree)):
        raise ParameterError("truncated access-controlled ciphertext")
    return AbeCiphertext(
        tree=tree,
        ephemeral=ephemeral,
        components=tuple(components),
        nonce=nonce,
        sealed=sealed,
    )


__all__ = [
    "AbeCiphertext",
    "AbeMasterKey",
    "AbePublicParams",
    "AbeUserKey",
    "ELEMENT_BITS",
    "SHARE_PRIME",
    "decrypt",
    "deserialize_ciphertext",
    "encrypt",
    "format_policy",
    "keygen",
    "parse_policy",
    "satisfies",
    "serialize_ciphertext",
    "setup",
]
