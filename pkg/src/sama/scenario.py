"""Scenario files: declarative worlds executed end to end.

A scenario is JSON:

    {
      "seed": 7,
      "system": "toy" | {"n_bits": 1024, "pool_k": 3},
      "universe": ["doctor", "nurse", "hospitalA"],
      "data_owners": [
        {"name": "alice", "ap_s": "doctor AND hospitalA",
         "ap_m": "doctor OR nurse", "data": [10, 20, 30],
         "max_plaintext": 4096}
      ],
      "requesters": [{"name": "bob", "attributes": ["doctor", "hospitalA"]}],
      "requests": [
        {"kind": "do-do", "requester": "alice", "range": [0, 3]},
        {"kind": "drs-do", "requester": "bob", "target": "alice"},
        {"kind": "drs-dos", "requester": "bob"}
      ]
    }

Results are emitted as JSON lines, one per request, plus a summary record.
"""

from __future__ import annotations

import json
import sys

from .errors import ParameterError
from .policy import parse_policy
from .protocol import World


def load_scenario(text: str) -> dict:
    spec = json.loads(text)
    for key in ("universe", "data_owners", "requests"):
        if key not in spec:
            raise ParameterError(f"scenario missing {key!r}")
    return spec


def build_world(spec: dict) -> tuple[World, dict[str, object]]:
    seed = spec.get("seed", 0)
    system = spec.get("system", "toy")
    universe = spec["universe"]
    if system == "toy":
        world = World.toy(universe=universe, seed=seed)
    else:
        world = World.standard(
            int(system["n_bits"]), int(system.get("pool_k", 3)), universe, seed=seed
        )
    names: dict[str, object] = {}
    for owner_spec in spec["data_owners"]:
        ap_s = parse_policy(owner_spec["ap_s"])
        ap_m = parse_policy(owner_spec["ap_m"])
        owner = world.add_data_owner(ap_s, ap_m)
        names[owner_spec["name"]] = owner
        bound = owner_spec.get("max_plaintext")
        data = owner_spec["data"]
        if bound is not None and len(data) * bound >= world.params.n:
            print(
                f"warning: {owner_spec['name']}: {len(data)} values bounded by "
                f"{bound} can overflow the aggregation modulus {world.params.n}; "
                "sums are reduced mod n",
                file=sys.stderr,
            )
        for m in data:
            world.upload(owner, m % world.params.n)
    for dr_spec in spec.get("requesters", []):
        names[dr_spec["name"]] = world.add_requester(dr_spec["attributes"])
    return world, names


def run_scenario(spec: dict) -> tuple[World, list[dict]]:
    world, names = build_world(spec)
    records = []
    for req in spec["requests"]:
        kind = req["kind"]
        party = names[req["requester"]]
        if kind == "do-do":
            rng = req.get("range")
            outcome = world.request_own(party, *(rng or (0, None)))
        elif kind == "drs-do":
            target = names[req["target"]]
            rng = req.get("range")
            outcome = world.request_single(party, target, *(rng or (0, None)))
        elif kind == "drs-dos":
            outcome = world.request_multi(party)
        else:
            raise ParameterError(f"unknown request kind {kind!r}")
        records.append({
            "request_id": outcome.request_id,
            "kind": kind,
            "requester": req["requester"],
            "ok": outcome.ok,
            "value": outcome.value,
            "error": outcome.error,
        })
    return world, records


def emit_records(world: World, records: list[dict]) -> bytes:
    lines = [json.dumps(r) for r in records]
    lines.append(json.dumps({
        "summary": True,
        "requests": len(records),
        "granted": sum(1 for r in records if r["ok"]),
        "messages": len(world.transcript),
        "transcript_bits": sum(e.bit_length for e in world.transcript.entries),
    }))
    return ("\n".join(lines) + "\n").encode()
