"""Five-role aggregation protocol over the in-process bus.

Roles: data owners (DO) encrypt each datum once under their own variant
Paillier key; the service provider (SP) stores ciphertexts, aggregates,
masks and demasks; the compute party (CP) holds the strong trapdoor and
decrypts only masked values; data requesters (DR) receive results through a
request-scoped Paillier key whose private half is sealed under the data
owners' access policies; the key authority (KA) issues all key material and
is trusted (its bookkeeping is neither masked nor metered).

Three flows are implemented: a DO aggregating their own history (SP only),
a DR asking for one DO's aggregate (SP masks, CP re-encrypts, SP demasks),
and a DR asking for a cross-owner aggregate over every DO whose sharing
policy the DR's attributes satisfy.

Masking notes: masks are one-time values consumed at demask time. On
full-size systems they are drawn from [0, n >> 80) so the masked sum never
wraps the aggregation modulus (except with probability < 2^-64), keeping
results exact while still swamping the paper-sized plaintext ranges; on toy
systems (n < 2^96) masks cover all of Z_n and the request-scoped Paillier
modulus is minted wide enough for the opener to resolve the wrap count
exactly by range search.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field
from enum import Enum

from . import cpabe, messages, paillier, vphe
from .counting import OpCounters, counting
from .errors import (
    EmptyRange,
    MaskAlreadyConsumed,
    NoData,
    PolicyNotSatisfied,
    ProtocolError,
    SamaError,
    UnknownDataOwner,
)
from .harness import Bus, Transcript
from .messages import MsgType, Role
from .policy import Node, and_of, format_policy, satisfies

# Masks leave this much headroom below the modulus on full-size systems; toy
# moduli below the pivot keep full-range masks and get wide delivery keys.
MASK_SLACK_BITS = 80
TOY_PIVOT_BITS = 96


class UseCase(Enum):
    DO_DO = "do-do"
    DRS_DO = "drs-do"
    DRS_DOS = "drs-dos"


@dataclass
class PolicyRecord:
    do_id: int
    ap_s: Node
    ap_m: Node
    version: int


@dataclass
class MaskRecord:
    """One-time masks keyed by data owner; erased when consumed."""

    request_id: int
    entries: dict[int, int]
    consumed: bool = False

    def consume(self) -> dict[int, int]:
        if self.consumed:
            raise MaskAlreadyConsumed(f"mask for request {self.request_id} already used")
        self.consumed = True
        taken = dict(self.entries)
        self.entries.clear()
        return taken


@dataclass(frozen=True)
class AggregationRequest:
    request_id: int
    kind: UseCase
    requester_id: int
    requester_attributes: frozenset[str] = frozenset()
    target_do: int | None = None
    index_range: tuple[int, int] | None = None


@dataclass(frozen=True)
class ResultBundle:
    request_id: int
    paillier_ct: paillier.PaillierCiphertext
    abe_ct: cpabe.AbeCiphertext
    ppk: paillier.PaillierPublicKey


@dataclass
class Outcome:
    request_id: int
    kind: UseCase
    ok: bool
    value: int | None = None
    error: str | None = None
    opened_by: int | None = None
    bundle: ResultBundle | None = None
    role_costs: dict[str, OpCounters] = field(default_factory=dict)
    role_times: dict[str, float] = field(default_factory=dict)


def resolve_sum(decrypted: int, aggregation_n: int, delivery_n: int) -> int:
    """Map a demasked delivery-key plaintext back into [0, n).

    The demasked value is S - K·n mod n_pe for the (unknown) number of times
    K the masked sum wrapped the aggregation modulus; scan K upward until the
    candidate lands in range. With slack-bounded masks K = 0; on toy systems
    the delivery modulus is wide enough that the hit is unique.
    """
    candidate = decrypted
    for _ in range(delivery_n // aggregation_n + 3):
        if candidate < aggregation_n:
            return candidate
        candidate = (candidate + aggregation_n) % delivery_n
    raise ProtocolError("demasked value unresolvable to the aggregation range")


class KeyAuthority:
    """Trusted issuer of every key in the system; not metered."""

    metered = False

    def __init__(self, params, strong, abe_pk, abe_mk, rng: random.Random, paillier_bits: int):
        self.params = params
        self.strong = strong
        self.abe_pk = abe_pk
        self.abe_mk = abe_mk
        self.rng = rng
        self.paillier_bits = paillier_bits
        self.counters = OpCounters()
        self.wall_time = 0.0

    def enroll_data_owner(self, user_id: int):
        return vphe.user_keygen(self.params, self.strong, user_id, self.rng)

    def enroll_requester(self, holder_id: int, attributes) -> cpabe.AbeUserKey:
        return cpabe.keygen(self.abe_mk, attributes, self.rng, holder_id=holder_id)

    def mint_request_keys(self, request_id: int):
        """Fresh delivery key pair, strictly wider than the aggregation modulus."""
        return paillier.keygen(
            self.paillier_bits, self.rng, key_id=request_id, min_n=self.params.n
        )

    def handle(self, msg: messages.Message, bus: Bus) -> None:
        if msg.msg_type == MsgType.KEY_REQUEST:
            ppk, psk = self.mint_request_keys(msg.request_id)
            bus.send(messages.key_response(msg.request_id, ppk, psk))
        else:
            raise ProtocolError(f"key authority cannot handle {msg.msg_type!r}")


class DataOwner:
    metered = True

    def __init__(self, do_id: int, vpk, wsk, rng: random.Random):
        self.do_id = do_id
        self.vpk = vpk
        self.wsk = wsk
        self.rng = rng
        self.counters = OpCounters()
        self.wall_time = 0.0
        self.results: dict[int, Outcome] = {}

    def upload(self, m: int, bus: Bus) -> vphe.VpheCiphertext:
        """Encrypt one datum (2 ModExp + 1 ModMul) and send it to the SP."""
        ct = vphe.encrypt(self.vpk, m, self.rng)
        bus.send(messages.data_upload(0, ct))
        return ct

    def open_own(self, ct: vphe.VpheCiphertext) -> int:
        """Weak-decrypt an aggregate of this owner's data (ModExp + ModMul)."""
        return vphe.weak_decrypt(self.wsk, self.vpk, ct)

    def handle(self, msg: messages.Message, bus: Bus) -> None:
        if msg.msg_type == MsgType.OWN_AGG_RESPONSE:
            value = self.open_own(msg.body)
            self.results[msg.request_id] = Outcome(
                msg.request_id, UseCase.DO_DO, ok=True, value=value, opened_by=self.do_id
            )
        elif msg.msg_type == MsgType.REQUEST_REJECTED:
            self.results[msg.request_id] = Outcome(
                msg.request_id, UseCase.DO_DO, ok=False, error=msg.body, opened_by=self.do_id
            )
        else:
            raise ProtocolError(f"data owner cannot handle {msg.msg_type!r}")


class ServiceProvider:
    metered = True

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.store: dict[int, list[vphe.VpheCiphertext]] = {}
        self.vpks: dict[int, vphe.UserPublicKey] = {}
        self.policies: dict[int, PolicyRecord] = {}
        self.masks: dict[int, MaskRecord] = {}
        self.pending: dict[int, dict] = {}
        self.enrollment_order: list[int] = []
        self.counters = OpCounters()
        self.wall_time = 0.0
        self.mask_fn = None  # test hook: do_id -> mask value

    # -- enrollment-time bookkeeping -------------------------------------

    def enroll(self, vpk: vphe.UserPublicKey) -> None:
        self.vpks[vpk.user_id] = vpk
        self.store[vpk.user_id] = []
        self.enrollment_order.append(vpk.user_id)

    def register_policy(self, do_id: int, ap_s: Node, ap_m: Node) -> int:
        """Create or bump the owner's policy record; returns the version."""
        if do_id not in self.vpks:
            raise UnknownDataOwner(f"data owner {do_id} not enrolled")
        record = self.policies.get(do_id)
        version = 1 if record is None else record.version + 1
        self.policies[do_id] = PolicyRecord(do_id, ap_s, ap_m, version)
        return version

    def accept_upload(self, ct: vphe.VpheCiphertext) -> None:
        if ct.key_id not in self.store:
            raise UnknownDataOwner(f"data owner {ct.key_id} not enrolled")
        self.store[ct.key_id].append(ct)

    # -- aggregation legs --------------------------------------------------

    def aggregate_range(self, do_id: int, start: int, stop: int) -> vphe.VpheCiphertext:
        """Product of the stored ciphertexts in [start, stop): (N-1) ModMul."""
        if do_id not in self.store:
            raise UnknownDataOwner(f"data owner {do_id} not enrolled")
        cts = self.store[do_id][start:stop]
        if not cts:
            raise EmptyRange(f"no stored data for {do_id} in [{start}, {stop})")
        acc = cts[0]
        for ct in cts[1:]:
            acc = vphe.hom_add(acc, ct)
        return acc

    def _draw_mask(self, n: int) -> int:
        if n.bit_length() <= TOY_PIVOT_BITS:
            return self.rng.randrange(n)
        return self.rng.randrange(n >> MASK_SLACK_BITS)

    def mask_single(self, request: AggregationRequest):
        """Aggregate one owner's range, then blind it with a fresh mask.

        Cost on top of aggregation: 2 ModExp + 2 ModMul (mask encryption and
        the masking multiply). Returns (masked ct, AP_S, mask record).
        """
        do_id = request.target_do
        start, stop = request.index_range
        record = self.policies.get(do_id)
        if record is None:
            raise UnknownDataOwner(f"no policy registered for data owner {do_id}")
        aggregate = self.aggregate_range(do_id, start, stop)
        vpk = self.vpks[do_id]
        r = self.mask_fn(do_id) if self.mask_fn else self._draw_mask(vpk.n)
        masked = vphe.hom_add(aggregate, vphe.encrypt(vpk, r, self.rng))
        mask = MaskRecord(request.request_id, {do_id: r})
        self.masks[request.request_id] = mask
        return masked, record.ap_s, record.version, mask

    def select_dos(self, requester_attributes) -> list[int]:
        """Owners whose sharing policy the requester satisfies, in enrollment order."""
        return [
            do_id
            for do_id in self.enrollment_order
            if do_id in self.policies
            and satisfies(self.policies[do_id].ap_m, requester_attributes)
        ]

    def mask_multi(self, request_id: int, do_ids: list[int], slot: int = -1):
        """Mask each selected owner's latest upload with its own fresh value.

        Cost: N·(2 ModExp + 2 ModMul). Returns (cts, common AP_M, record).
        """
        if not do_ids:
            raise EmptyRange("no data owners selected")
        masked_cts = []
        entries = {}
        seen_policies: list[Node] = []
        for do_id in do_ids:
            uploads = self.store.get(do_id, [])
            if not uploads:
                raise NoData(f"data owner {do_id} has no uploads")
            ct = uploads[slot]
            vpk = self.vpks[do_id]
            r = self.mask_fn(do_id) if self.mask_fn else self._draw_mask(vpk.n)
            entries[do_id] = r
            masked_cts.append(vphe.hom_add(ct, vphe.encrypt(vpk, r, self.rng)))
            ap_m = self.policies[do_id].ap_m
            if all(format_policy(ap_m) != format_policy(seen) for seen in seen_policies):
                seen_policies.append(ap_m)
        common = seen_policies[0] if len(seen_policies) == 1 else and_of(seen_policies)
        mask = MaskRecord(request_id, entries)
        self.masks[request_id] = mask
        return masked_cts, common, mask

    def demask(
        self,
        pe_ct: paillier.PaillierCiphertext,
        mask: MaskRecord,
        ppk: paillier.PaillierPublicKey,
    ) -> paillier.PaillierCiphertext:
        """Fold the additive inverse of the consumed masks into the result.

        The inverse is taken on the plaintext side and encrypted fresh
        (2 ModExp + 1 ModMul), then multiplied in (1 ModMul).
        """
        entries = mask.consume()
        total = sum(entries.values())
        inverse = (-total) % ppk.n
        return paillier.hom_add(pe_ct, paillier.encrypt(ppk, inverse, self.rng))

    # -- message plumbing --------------------------------------------------

    def handle(self, msg: messages.Message, bus: Bus) -> None:
        if msg.msg_type == MsgType.POLICY_REGISTER:
            do_id, ap_s, ap_m, _ = msg.body
            self.register_policy(do_id, ap_s, ap_m)
        elif msg.msg_type == MsgType.DATA_UPLOAD:
            self.accept_upload(msg.body)
        elif msg.msg_type == MsgType.OWN_AGG_REQUEST:
            do_id, start, stop = msg.body
            ct = self.aggregate_range(do_id, start, stop)
            bus.send(messages.own_agg_response(msg.request_id, ct))
        elif msg.msg_type == MsgType.SINGLE_AGG_REQUEST:
            dr_id, do_id, start, stop = msg.body
            request = AggregationRequest(
                msg.request_id, UseCase.DRS_DO, dr_id,
                target_do=do_id, index_range=(start, stop),
            )
            masked, ap_s, version, _ = self.mask_single(request)
            self.pending[msg.request_id] = {"kind": UseCase.DRS_DO, "dr": dr_id}
            bus.send(messages.masked_single(msg.request_id, masked, ap_s, version))
        elif msg.msg_type == MsgType.MULTI_AGG_REQUEST:
            dr_id, attrs = msg.body
            selected = self.select_dos(attrs)
            if not selected:
                bus.send(messages.request_rejected(
                    msg.request_id, Role.DR, "no data owner's sharing policy matches"
                ))
                return
            cts, common, _ = self.mask_multi(msg.request_id, selected)
            self.pending[msg.request_id] = {
                "kind": UseCase.DRS_DOS, "dr": dr_id, "selected": selected,
            }
            bus.send(messages.masked_multi(msg.request_id, cts, common, 0))
        elif msg.msg_type in (MsgType.PREPARED_SINGLE, MsgType.PREPARED_MULTI):
            pe_ct, abe_ct, ppk = msg.body
            mask = self.masks[msg.request_id]
            demasked = self.demask(pe_ct, mask, ppk)
            bus.send(messages.result_bundle(msg.request_id, demasked, abe_ct, ppk))
        else:
            raise ProtocolError(f"service provider cannot handle {msg.msg_type!r}")


class ComputeParty:
    metered = True

    def __init__(self, ssk: vphe.StrongKey, abe_pk: cpabe.AbePublicParams, rng: random.Random):
        self.ssk = ssk
        self.abe_pk = abe_pk
        self.rng = rng
        self.vpks: dict[int, vphe.UserPublicKey] = {}
        self.mu: dict[int, int] = {}
        self.pending: dict[int, dict] = {}
        self.counters = OpCounters()
        self.wall_time = 0.0
        self.debug_plaintexts: list[int] | None = None

    def enroll(self, vpk: vphe.UserPublicKey) -> None:
        """Cache the ciphertext-independent decryption denominator once."""
        self.vpks[vpk.user_id] = vpk
        self.mu[vpk.user_id] = vphe.precompute_strong_mu(self.ssk, vpk)

    def _strong_decrypt(self, ct: vphe.VpheCiphertext) -> int:
        vpk = self.vpks[ct.key_id]
        value = vphe.strong_decrypt(self.ssk, vpk, ct, mu=self.mu[ct.key_id])
        if self.debug_plaintexts is not None:
            self.debug_plaintexts.append(value)
        return value

    def prepare(
        self,
        masked_cts: list[vphe.VpheCiphertext],
        policy: Node,
        ppk: paillier.PaillierPublicKey,
        psk: paillier.PaillierPrivateKey,
    ):
        """Strong-decrypt, total mod n, re-encrypt under the delivery key,
        and seal the delivery private key under the owners' policy.

        Cost: N·(ModExp + ModMul) + 2 ModExp + ModMul + (|γ|+1) Exp.
        """
        n = masked_cts[0].public.n
        total = 0
        for ct in masked_cts:
            total = (total + self._strong_decrypt(ct)) % n
        pe_ct = paillier.encrypt(ppk, total, self.rng)
        abe_ct = cpabe.encrypt(
            self.abe_pk, paillier.serialize_private_key(psk), policy, self.rng
        )
        return pe_ct, abe_ct

    def handle(self, msg: messages.Message, bus: Bus) -> None:
        if msg.msg_type == MsgType.MASKED_SINGLE:
            ct, ap_s, _version = msg.body
            self.pending[msg.request_id] = {
                "cts": [ct], "policy": ap_s, "reply": MsgType.PREPARED_SINGLE,
            }
            bus.send(messages.key_request(msg.request_id))
        elif msg.msg_type == MsgType.MASKED_MULTI:
            cts, ap_m, _version = msg.body
            self.pending[msg.request_id] = {
                "cts": list(cts), "policy": ap_m, "reply": MsgType.PREPARED_MULTI,
            }
            bus.send(messages.key_request(msg.request_id))
        elif msg.msg_type == MsgType.KEY_RESPONSE:
            ppk, psk = msg.body
            ctx = self.pending.pop(msg.request_id)
            pe_ct, abe_ct = self.prepare(ctx["cts"], ctx["policy"], ppk, psk)
            bus.send(messages.prepared(msg.request_id, ctx["reply"], pe_ct, abe_ct, ppk))
        else:
            raise ProtocolError(f"compute party cannot handle {msg.msg_type!r}")


class DataRequester:
    metered = True

    def __init__(self, dr_id: int, attributes, abe_key: cpabe.AbeUserKey,
                 abe_pk: cpabe.AbePublicParams, aggregation_n: int):
        self.dr_id = dr_id
        self.attributes = frozenset(attributes)
        self.abe_key = abe_key
        self.abe_pk = abe_pk
        self.aggregation_n = aggregation_n
        self.counters = OpCounters()
        self.wall_time = 0.0
        self.results: dict[int, Outcome] = {}

    def open_result(self, bundle: ResultBundle) -> int:
        """Unseal the delivery key (ϑ pairing-equivalents), then decrypt the
        result (ModExp + ModMul) and resolve it into the aggregation range.

        Raises:
          PolicyNotSatisfied: this requester's attributes fail the policy.
        """
        psk_bytes = cpabe.decrypt(self.abe_pk, bundle.abe_ct, self.abe_key)
        psk = paillier.deserialize_private_key(psk_bytes)
        raw = paillier.decrypt(psk, bundle.ppk, bundle.paillier_ct)
        return resolve_sum(raw, self.aggregation_n, bundle.ppk.n)

    def handle(self, msg: messages.Message, bus: Bus) -> None:
        if msg.msg_type == MsgType.RESULT_BUNDLE:
            pe_ct, abe_ct, ppk = msg.body
            bundle = ResultBundle(msg.request_id, pe_ct, abe_ct, ppk)
            kind = UseCase.DRS_DO  # corrected by the world when it collects
            try:
                value = self.open_result(bundle)
                self.results[msg.request_id] = Outcome(
                    msg.request_id, kind, ok=True, value=value, opened_by=self.dr_id
                )
            except PolicyNotSatisfied as exc:
                self.results[msg.request_id] = Outcome(
                    msg.request_id, kind, ok=False,
                    error=f"policy_not_satisfied: {exc}", opened_by=self.dr_id,
                )
            self.results[msg.request_id].bundle = bundle
        elif msg.msg_type == MsgType.REQUEST_REJECTED:
            self.results[msg.request_id] = Outcome(
                msg.request_id, UseCase.DRS_DOS, ok=False, error=msg.body,
                opened_by=self.dr_id,
            )
        else:
            raise ProtocolError(f"data requester cannot handle {msg.msg_type!r}")


class World:
    """One simulated deployment: all roles, one bus, one transcript, one RNG."""

    def __init__(
        self,
        params: vphe.VpheSystemParams,
        strong: vphe.StrongKey,
        abe_pk: cpabe.AbePublicParams,
        abe_mk: cpabe.AbeMasterKey,
        seed: int,
        paillier_bits: int | None = None,
        debug: bool = False,
    ):
        self.params = params
        self.rng = random.Random(seed)
        if paillier_bits is None:
            bits = params.n.bit_length()
            paillier_bits = bits if bits >= 512 else max(128, bits + MASK_SLACK_BITS + 16)
        self.transcript = Transcript()
        self.bus = Bus(self.transcript)
        self.ka = KeyAuthority(params, strong, abe_pk, abe_mk, self.rng, paillier_bits)
        self.sp = ServiceProvider(self.rng)
        self.cp = ComputeParty(strong, abe_pk, self.rng)
        if debug:
            self.cp.debug_plaintexts = []
        self.data_owners: dict[int, DataOwner] = {}
        self.requesters: dict[int, DataRequester] = {}
        self.outcomes: dict[int, Outcome] = {}
        self._request_kind: dict[int, UseCase] = {}
        self._request_party: dict[int, object] = {}
        self._request_touched: dict[int, tuple[UseCase, int, list[int]]] = {}
        self._next_request = 1
        self._next_user = 1

        self.bus.register(Role.SP, self.sp)
        self.bus.register(Role.CP, self.cp)
        self.bus.register(Role.KA, self.ka)
        self.bus.register(Role.DO, self._route_do)
        self.bus.register(Role.DR, self._route_dr)

    # -- routing -----------------------------------------------------------

    def _route_do(self, msg: messages.Message) -> DataOwner:
        if msg.msg_type == MsgType.OWN_AGG_RESPONSE:
            return self.data_owners[msg.body.key_id]
        return self._request_party[msg.request_id]

    def _route_dr(self, msg: messages.Message) -> DataRequester:
        return self._request_party[msg.request_id]

    # -- enrollment and uploads ---------------------------------------------

    @classmethod
    def standard(cls, n_bits: int, k: int, universe, seed: int,
                 bit_budget: int = 16, **kw) -> "World":
        rng = random.Random(seed)
        params, strong = vphe.system_setup(n_bits, k, rng, bit_budget=bit_budget)
        abe_pk, abe_mk = cpabe.setup(tuple(universe), 256, rng)
        return cls(params, strong, abe_pk, abe_mk, seed=rng.randrange(2**63), **kw)

    @classmethod
    def toy(cls, universe, seed: int, **kw) -> "World":
        """The 23-bit fixture system: pool {u=3, v=(5,7)}, p=2311, q=2731."""
        pool = vphe.OddPrimePool(u=3, factors=(5, 7), bit_budget=4)
        params, strong = vphe.system_from_primes(
            pool, vphe.StructuredPrime(2311, 11), vphe.StructuredPrime(2731, 13)
        )
        rng = random.Random(seed)
        abe_pk, abe_mk = cpabe.setup(tuple(universe), 256, rng)
        return cls(params, strong, abe_pk, abe_mk, seed=rng.randrange(2**63), **kw)

    def add_data_owner(self, ap_s: Node, ap_m: Node) -> DataOwner:
        do_id = self._next_user
        self._next_user += 1
        vpk, wsk = self.ka.enroll_data_owner(do_id)
        self.sp.enroll(vpk)
        self.cp.enroll(vpk)
        owner = DataOwner(do_id, vpk, wsk, self.rng)
        self.data_owners[do_id] = owner
        self.bus.send(messages.policy_register(0, do_id, ap_s, ap_m, 1))
        self.bus.pump()
        return owner

    def add_requester(self, attributes) -> DataRequester:
        dr_id = self._next_user
        self._next_user += 1
        key = self.ka.enroll_requester(dr_id, attributes)
        requester = DataRequester(
            dr_id, attributes, key, self.ka.abe_pk, self.params.n
        )
        self.requesters[dr_id] = requester
        return requester

    def upload(self, owner: DataOwner, m: int) -> None:
        self.bus.execute(owner, owner.upload, m, self.bus)
        self.bus.pump()

    # -- the three request flows --------------------------------------------

    def new_request_id(self) -> int:
        rid = self._next_request
        self._next_request += 1
        return rid

    def run_use_case(self, request: AggregationRequest) -> tuple[Outcome, Transcript]:
        """Execute one request end to end; returns the outcome and transcript.

        The outcome carries per-role operation and wall-time deltas for this
        request alone.
        """
        rid = request.request_id
        self._request_kind[rid] = request.kind
        roles = self._role_map()
        before = {name: role.counters.snapshot() for name, role in roles.items()}
        times = {name: role.wall_time for name, role in roles.items()}

        if request.kind == UseCase.DO_DO:
            owner = self.data_owners[request.target_do]
            self._request_party[rid] = owner
            start, stop = request.index_range
            first = messages.own_agg_request(rid, owner.do_id, start, stop)
            collector = owner
            touched = [owner.do_id]
        elif request.kind == UseCase.DRS_DO:
            requester = self.requesters[request.requester_id]
            self._request_party[rid] = requester
            start, stop = request.index_range
            first = messages.single_agg_request(
                rid, requester.dr_id, request.target_do, start, stop
            )
            collector = requester
            touched = [request.target_do]
        elif request.kind == UseCase.DRS_DOS:
            requester = self.requesters[request.requester_id]
            self._request_party[rid] = requester
            first = messages.multi_agg_request(rid, requester.dr_id, request.requester_attributes)
            collector = requester
            touched = []
        else:
            raise ProtocolError(f"unknown use case {request.kind!r}")

        try:
            self.bus.send(first)
            self.bus.pump()
            outcome = collector.results.pop(rid)
            outcome.kind = request.kind
        except SamaError as exc:
            outcome = Outcome(rid, request.kind, ok=False, error=f"{type(exc).__name__}: {exc}")
        if request.kind == UseCase.DRS_DOS:
            touched = self.sp.pending.get(rid, {}).get("selected", [])
        self._request_touched[rid] = (request.kind, request.requester_id, list(touched))
        outcome.role_costs = {
            name: role.counters.delta(before[name]) for name, role in roles.items()
        }
        outcome.role_times = {
            name: role.wall_time - times[name] for name, role in roles.items()
        }
        self.outcomes[rid] = outcome
        return outcome, self.transcript

    def _role_map(self) -> dict[str, object]:
        roles: dict[str, object] = {"SP": self.sp, "CP": self.cp, "KA": self.ka}
        for do in self.data_owners.values():
            roles[f"DO{do.do_id}"] = do
        for dr in self.requesters.values():
            roles[f"DR{dr.dr_id}"] = dr
        return roles

    def request_own(self, owner: DataOwner, start: int = 0, stop: int | None = None) -> Outcome:
        stop = len(self.sp.store[owner.do_id]) if stop is None else stop
        request = AggregationRequest(
            self.new_request_id(), UseCase.DO_DO, owner.do_id,
            target_do=owner.do_id, index_range=(start, stop),
        )
        return self.run_use_case(request)[0]

    def request_single(
        self, requester: DataRequester, owner: DataOwner,
        start: int = 0, stop: int | None = None,
    ) -> Outcome:
        stop = len(self.sp.store[owner.do_id]) if stop is None else stop
        request = AggregationRequest(
            self.new_request_id(), UseCase.DRS_DO, requester.dr_id,
            requester_attributes=requester.attributes,
            target_do=owner.do_id, index_range=(start, stop),
        )
        return self.run_use_case(request)[0]

    def request_multi(self, requester: DataRequester) -> Outcome:
        request = AggregationRequest(
            self.new_request_id(), UseCase.DRS_DOS, requester.dr_id,
            requester_attributes=requester.attributes,
        )
        return self.run_use_case(request)[0]

    # -- notification-style transcript query ---------------------------------

    def request_log(self, do_id: int) -> list[dict]:
        """Per-request summary for one owner: who asked, what kind, granted?"""
        log = []
        for rid, (kind, requester, touched) in sorted(self._request_touched.items()):
            if do_id in touched:
                outcome = self.outcomes.get(rid)
                log.append({
                    "request_id": rid,
                    "kind": kind.value,
                    "requester": requester,
                    "granted": bool(outcome and outcome.ok),
                })
        return log
