"""In-process network, transcript recording, cost accounting, and sweeps.

The bus is the only shared structure between roles: every send is appended
to the transcript before delivery, deliveries are FIFO, and each delivery
runs under the receiving role's counters and wall-clock meter. Link totals
separate homomorphic-ciphertext payload bits and access-control group
element bits from framing (tags, ids, length prefixes, policy text,
envelope bytes), so closed-form expectations can be checked exactly.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

from .counting import OpCounters, counting
from .errors import ParameterError, ProtocolError, UnknownEndpoint
from .messages import Message, MsgType, Role


@dataclass(slots=True)
class TranscriptEntry:
    seq: int
    sender: Role
    receiver: Role
    msg_type: MsgType
    request_id: int
    payload: bytes
    he_bits: int
    abe_bits: int

    @property
    def bit_length(self) -> int:
        return 8 * len(self.payload)

    @property
    def framing_bits(self) -> int:
        return self.bit_length - self.he_bits - self.abe_bits


class Transcript:
    """Ordered record of every message with byte sizes and endpoints."""

    def __init__(self):
        self.entries: list[TranscriptEntry] = []

    def append(self, msg: Message) -> TranscriptEntry:
        entry = TranscriptEntry(
            seq=len(self.entries) + 1,
            sender=msg.sender,
            receiver=msg.receiver,
            msg_type=msg.msg_type,
            request_id=msg.request_id,
            payload=msg.payload,
            he_bits=msg.he_bits,
            abe_bits=msg.abe_bits,
        )
        self.entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def to_bytes(self) -> bytes:
        """Canonical byte dump (envelope per entry); equal runs are equal bytes."""
        out = bytearray()
        for e in self.entries:
            msg = Message(e.msg_type, e.request_id, e.sender, e.receiver, e.payload)
            out += msg.envelope()
        return bytes(out)


@dataclass
class LinkBits:
    bits: int = 0
    he_bits: int = 0
    abe_bits: int = 0

    @property
    def framing_bits(self) -> int:
        return self.bits - self.he_bits - self.abe_bits

    def absorb(self, entry: TranscriptEntry) -> None:
        self.bits += entry.bit_length
        self.he_bits += entry.he_bits
        self.abe_bits += entry.abe_bits


def measure_communication(
    transcript: Transcript, request_ids=None
) -> dict[tuple[Role, Role], LinkBits]:
    """Per-directed-link bit totals, optionally restricted to given requests."""
    totals: dict[tuple[Role, Role], LinkBits] = {}
    for entry in transcript.entries:
        if request_ids is not None and entry.request_id not in request_ids:
            continue
        link = totals.setdefault((entry.sender, entry.receiver), LinkBits())
        link.absorb(entry)
    return totals


@dataclass
class CostReport:
    """Per-role counters and the four tracked links."""

    counters: dict[str, OpCounters] = field(default_factory=dict)
    links: dict[str, LinkBits] = field(default_factory=dict)
    times: dict[str, float] = field(default_factory=dict)

    TRACKED_LINKS = {
        "do_sp": (Role.DO, Role.SP),
        "sp_cp": (Role.SP, Role.CP),
        "cp_sp": (Role.CP, Role.SP),
        "sp_dr": (Role.SP, Role.DR),
    }

    @classmethod
    def from_transcript(cls, transcript: Transcript, request_ids=None) -> "CostReport":
        measured = measure_communication(transcript, request_ids)
        report = cls()
        for label, pair in cls.TRACKED_LINKS.items():
            report.links[label] = measured.get(pair, LinkBits())
        # A DO opening their own aggregate stands in for the requester.
        do_response = measured.get((Role.SP, Role.DO))
        if do_response is not None:
            report.links["sp_dr"].bits += do_response.bits
            report.links["sp_dr"].he_bits += do_response.he_bits
            report.links["sp_dr"].abe_bits += do_response.abe_bits
        return report


class Bus:
    """FIFO delivery between registered roles, instrumented end to end."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self._targets: dict[Role, object] = {}
        self._queue: deque[Message] = deque()

    def register(self, role: Role, target) -> None:
        """target is a role instance or a router callable(msg) -> instance."""
        self._targets[role] = target

    def send(self, msg: Message) -> TranscriptEntry:
        """Record the message, then queue it for delivery."""
        try:
            MsgType(msg.msg_type)
        except ValueError:
            raise ProtocolError(f"unknown message tag {msg.msg_type!r}") from None
        if msg.receiver not in self._targets:
            raise UnknownEndpoint(f"no endpoint registered for {msg.receiver!r}")
        entry = self.transcript.append(msg)
        self._queue.append(msg)
        return entry

    def deliver_next(self) -> Message | None:
        if not self._queue:
            return None
        msg = self._queue.popleft()
        target = self._targets[msg.receiver]
        instance = target(msg) if callable(target) else target
        self.execute(instance, instance.handle, msg, self)
        return msg

    def pump(self) -> int:
        """Deliver until idle; returns the number of messages delivered."""
        delivered = 0
        while self._queue:
            self.deliver_next()
            delivered += 1
        return delivered

    def execute(self, instance, fn, *args):
        """Run role work under its meter and wall clock."""
        start = time.perf_counter()
        try:
            if getattr(instance, "metered", True):
                with counting(instance.counters):
                    return fn(*args)
            return fn(*args)
        finally:
            instance.wall_time += time.perf_counter() - start


# ---------------------------------------------------------------------------
# Benchmark sweeps.

VALID_N_BITS = (512, 1024, 2048, 3072, 4096)

REPORT_COLUMNS = (
    "use_case", "role", "n_bits", "N", "attrs",
    "modexp", "modmul", "exp", "bipair", "bits_in", "bits_out", "time_ms",
)


@dataclass
class BenchConfig:
    use_case: str
    n_bits: int
    count: int
    attribute_count: int
    seed: int
    repeats: int = 20
    fmt: str = "csv"
    out: str | None = None
    measure_times: bool = True

    def __post_init__(self):
        if self.n_bits not in VALID_N_BITS:
            raise ParameterError(f"n_bits must be one of {VALID_N_BITS}")
        if self.use_case not in ("do-do", "drs-do", "drs-dos"):
            raise ParameterError("use_case must be do-do, drs-do or drs-dos")
        if not 2 <= self.attribute_count <= 10:
            raise ParameterError("attribute_count must be in 2..10")
        if self.count < 1 or self.repeats < 1:
            raise ParameterError("count and repeats must be positive")
        if self.fmt not in ("csv", "jsonl"):
            raise ParameterError("format must be csv or jsonl")


def _pool_shape(use_case: str, count: int, n_bits: int) -> tuple[int, int]:
    """(k, bit_budget) so the factor pool offers enough subsets and still
    leaves 32 bits of cofactor headroom at n_bits/2."""
    users = count + 2 if use_case == "drs-dos" else 4
    k = max(2, math.ceil(math.log2(users + 1)))
    budget = min(16, (n_bits // 2 - 33) // (k + 1))
    if budget < 5:
        raise ParameterError(f"cannot fit a {k}-factor pool under {n_bits} bits")
    return k, budget


def _build_bench_world(config: BenchConfig):
    from .protocol import World

    universe = [f"attr{i:02d}" for i in range(config.attribute_count)]
    k, budget = _pool_shape(config.use_case, config.count, config.n_bits)
    world = World.standard(
        config.n_bits, k, universe, seed=config.seed, bit_budget=budget
    )
    policy_text = " AND ".join(universe)
    from .policy import parse_policy

    tree = parse_policy(policy_text) if len(universe) > 1 else parse_policy(universe[0])
    owners = []
    if config.use_case in ("do-do", "drs-do"):
        owner = world.add_data_owner(tree, tree)
        owners.append(owner)
        for _ in range(config.count):
            world.upload(owner, world.rng.randrange(world.params.n))
    else:
        for _ in range(config.count):
            owner = world.add_data_owner(tree, tree)
            owners.append(owner)
            world.upload(owner, world.rng.randrange(world.params.n))
    requester = world.add_requester(universe) if config.use_case != "do-do" else None
    return world, owners, requester


def run_bench(config: BenchConfig) -> list[dict]:
    """Run the configured flow `repeats` times and report per-role rows.

    Counters must be identical across repeats (asserted); wall times are
    averaged. The DO row reports per-encryption cost; DO* is the owner
    opening their own aggregate in the do-do case.
    """
    world, owners, requester = _build_bench_world(config)
    upload_counts = {}
    upload_times = {}
    for owner in owners:
        upload_counts[owner.do_id] = owner.counters.snapshot()
        upload_times[owner.do_id] = owner.wall_time

    outcomes = []
    for _ in range(config.repeats):
        if config.use_case == "do-do":
            outcome = world.request_own(owners[0])
        elif config.use_case == "drs-do":
            outcome = world.request_single(requester, owners[0])
        else:
            outcome = world.request_multi(requester)
        if not outcome.ok:
            raise ProtocolError(f"bench flow failed: {outcome.error}")
        outcomes.append(outcome)

    first = outcomes[0]
    for other in outcomes[1:]:
        for name, counters in first.role_costs.items():
            if other.role_costs[name].as_dict() != counters.as_dict():
                raise ProtocolError(f"nondeterministic counters at role {name}")

    report = CostReport.from_transcript(
        world.transcript, request_ids={0, first.request_id}
    )

    def mean_time(label_prefix: str) -> float:
        vals = []
        for outcome in outcomes:
            vals.append(sum(
                t for name, t in outcome.role_times.items()
                if name.startswith(label_prefix)
            ))
        return sum(vals) / len(vals)

    rows = []
    n_value = config.count

    def row(role: str, counters: OpCounters, bits_in: int, bits_out: int, secs: float):
        rows.append({
            "use_case": config.use_case,
            "role": role,
            "n_bits": config.n_bits,
            "N": n_value,
            "attrs": config.attribute_count,
            "modexp": counters.modexp,
            "modmul": counters.modmul,
            "exp": counters.exp,
            "bipair": counters.bipair,
            "bits_in": bits_in,
            "bits_out": bits_out,
            "time_ms": round(secs * 1000, 6) if config.measure_times else 0.0,
        })

    # DO row: per-encryption cost (uploads divided by the upload count).
    first_owner = owners[0]
    up = upload_counts[first_owner.do_id]
    per_enc = OpCounters(
        up.modexp // max(1, _uploads_of(config, first_owner)),
        up.modmul // max(1, _uploads_of(config, first_owner)),
        up.exp, up.bipair, up.modinv,
    )
    do_bits_out = report.links["do_sp"].bits
    row("DO", per_enc, 0, do_bits_out,
        upload_times[first_owner.do_id] / max(1, _uploads_of(config, first_owner)))

    sp_first = first.role_costs["SP"]
    sp_bits_out = report.links["sp_cp"].bits + report.links["sp_dr"].bits
    sp_bits_in = report.links["do_sp"].bits + report.links["cp_sp"].bits
    row("SP", sp_first, sp_bits_in, sp_bits_out, mean_time("SP"))

    cp = first.role_costs["CP"]
    row("CP", cp, report.links["sp_cp"].bits, report.links["cp_sp"].bits, mean_time("CP"))

    if config.use_case == "do-do":
        opener = first.role_costs[f"DO{first_owner.do_id}"]
        row("DO*", opener, report.links["sp_dr"].bits, 0, mean_time("DO"))
    else:
        dr = first.role_costs[f"DR{requester.dr_id}"]
        row("DR", dr, report.links["sp_dr"].bits, 0, mean_time("DR"))
    return rows


def _uploads_of(config: BenchConfig, owner) -> int:
    return config.count if config.use_case in ("do-do", "drs-do") else 1


def emit_report(rows: list[dict], fmt: str = "csv") -> bytes:
    """Serialize report rows with a stable column order."""
    if fmt == "csv":
        import csv
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r[k] for k in REPORT_COLUMNS})
        return buf.getvalue().encode()
    if fmt == "jsonl":
        import json

        return b"".join(
            json.dumps({k: r[k] for k in REPORT_COLUMNS}).encode() + b"\n" for r in rows
        )
    raise ParameterError("format must be csv or jsonl")


def parse_report(blob: bytes, fmt: str = "csv") -> list[dict]:
    """Inverse of emit_report (round-trip support for tooling and tests)."""
    if fmt == "csv":
        import csv
        import io

        reader = csv.DictReader(io.StringIO(blob.decode()))
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in ("n_bits", "N", "attrs", "modexp", "modmul", "exp",
                        "bipair", "bits_in", "bits_out"):
                row[key] = int(row[key])
            row["time_ms"] = float(row["time_ms"])
            rows.append(row)
        return rows
    if fmt == "jsonl":
        import json

        return [json.loads(line) for line in blob.splitlines() if line.strip()]
    raise ParameterError("format must be csv or jsonl")
