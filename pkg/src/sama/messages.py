"""Message envelope and payload wire formats for the simulated network.

Envelope: u16 type tag | u64 request id | u8 sender role | u8 receiver role |
u32 payload length | payload. Payload layouts are per-type; each builder also
reports how many payload bits are homomorphic-ciphertext residues and how
many are access-control group elements, so the harness can check link totals
against closed-form expectations with framing accounted separately.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

from . import cpabe, paillier, vphe
from .arith import decode_int
from .errors import ProtocolError
from .policy import Node, format_policy, parse_policy


class Role(IntEnum):
    DO = 1
    SP = 2
    CP = 3
    DR = 4
    KA = 5


class MsgType(IntEnum):
    POLICY_REGISTER = 0x0001
    DATA_UPLOAD = 0x0002
    OWN_AGG_REQUEST = 0x0003
    OWN_AGG_RESPONSE = 0x0004
    SINGLE_AGG_REQUEST = 0x0005
    MASKED_SINGLE = 0x0006
    KEY_REQUEST = 0x0007
    KEY_RESPONSE = 0x0008
    PREPARED_SINGLE = 0x0009
    RESULT_BUNDLE = 0x000A
    MULTI_AGG_REQUEST = 0x000B
    MASKED_MULTI = 0x000C
    PREPARED_MULTI = 0x000D
    REQUEST_REJECTED = 0x000E


_ENVELOPE = struct.Struct(">HQBBI")


@dataclass(slots=True)
class Message:
    msg_type: MsgType
    request_id: int
    sender: Role
    receiver: Role
    payload: bytes
    he_bits: int = 0
    abe_bits: int = 0
    body: object = field(default=None, repr=False)

    def envelope(self) -> bytes:
        return (
            _ENVELOPE.pack(
                self.msg_type, self.request_id, self.sender, self.receiver, len(self.payload)
            )
            + self.payload
        )

    @property
    def bit_length(self) -> int:
        return 8 * len(self.payload)


def _he_bits_of(n: int) -> int:
    return 8 * ((2 * n.bit_length() + 7) // 8)


def _ids_payload(*ids: int) -> bytes:
    return b"".join(i.to_bytes(8, "big") for i in ids)


def _attrs_payload(attrs) -> bytes:
    blob = b"".join(
        len(a.encode()).to_bytes(2, "big") + a.encode() for a in sorted(attrs)
    )
    return len(blob).to_bytes(4, "big") + blob


def _parse_attrs(buf: bytes, off: int) -> tuple[frozenset[str], int]:
    size = int.from_bytes(buf[off : off + 4], "big")
    end = off + 4 + size
    cursor = off + 4
    attrs = []
    while cursor < end:
        alen = int.from_bytes(buf[cursor : cursor + 2], "big")
        cursor += 2
        attrs.append(buf[cursor : cursor + alen].decode())
        cursor += alen
    return frozenset(attrs), end


def _policy_payload(tree: Node) -> bytes:
    text = format_policy(tree).encode()
    return len(text).to_bytes(4, "big") + text


def _parse_policy_blob(buf: bytes, off: int) -> tuple[Node, int]:
    size = int.from_bytes(buf[off : off + 4], "big")
    text = buf[off + 4 : off + 4 + size].decode()
    return parse_policy(text), off + 4 + size


def policy_register(request_id, do_id, ap_s, ap_m, version) -> Message:
    payload = (
        _ids_payload(do_id, version) + _policy_payload(ap_s) + _policy_payload(ap_m)
    )
    return Message(
        MsgType.POLICY_REGISTER, request_id, Role.DO, Role.SP, payload,
        body=(do_id, ap_s, ap_m, version),
    )


def data_upload(request_id, ct: vphe.VpheCiphertext) -> Message:
    payload = vphe.serialize_ciphertext(ct)
    return Message(
        MsgType.DATA_UPLOAD, request_id, Role.DO, Role.SP, payload,
        he_bits=_he_bits_of(ct.public.n), body=ct,
    )


def own_agg_request(request_id, do_id, start, stop) -> Message:
    payload = _ids_payload(do_id, start, stop)
    return Message(
        MsgType.OWN_AGG_REQUEST, request_id, Role.DO, Role.SP, payload,
        body=(do_id, start, stop),
    )


def own_agg_response(request_id, ct: vphe.VpheCiphertext) -> Message:
    payload = vphe.serialize_ciphertext(ct)
    return Message(
        MsgType.OWN_AGG_RESPONSE, request_id, Role.SP, Role.DO, payload,
        he_bits=_he_bits_of(ct.public.n), body=ct,
    )


def single_agg_request(request_id, dr_id, do_id, start, stop) -> Message:
    payload = _ids_payload(dr_id, do_id, start, stop)
    return Message(
        MsgType.SINGLE_AGG_REQUEST, request_id, Role.DR, Role.SP, payload,
        body=(dr_id, do_id, start, stop),
    )


def masked_single(request_id, ct: vphe.VpheCiphertext, ap_s: Node, version: int) -> Message:
    payload = (
        vphe.serialize_ciphertext(ct) + _policy_payload(ap_s) + version.to_bytes(4, "big")
    )
    return Message(
        MsgType.MASKED_SINGLE, request_id, Role.SP, Role.CP, payload,
        he_bits=_he_bits_of(ct.public.n), body=(ct, ap_s, version),
    )


def key_request(request_id) -> Message:
    return Message(MsgType.KEY_REQUEST, request_id, Role.CP, Role.KA, b"", body=None)


def key_response(request_id, ppk, psk) -> Message:
    payload = paillier.serialize_public_key(ppk) + paillier.serialize_private_key(psk)
    return Message(
        MsgType.KEY_RESPONSE, request_id, Role.KA, Role.CP, payload, body=(ppk, psk)
    )


def prepared(request_id, msg_type, pe_ct, abe_ct, ppk) -> Message:
    abe_blob = cpabe.serialize_ciphertext(abe_ct)
    payload = (
        paillier.serialize_ciphertext(pe_ct)
        + len(abe_blob).to_bytes(4, "big")
        + abe_blob
        + paillier.serialize_public_key(ppk)
    )
    return Message(
        msg_type, request_id, Role.CP, Role.SP, payload,
        he_bits=_he_bits_of(pe_ct.public.n),
        abe_bits=abe_ct.group_element_bits,
        body=(pe_ct, abe_ct, ppk),
    )


def result_bundle(request_id, pe_ct, abe_ct, ppk, receiver=Role.DR) -> Message:
    abe_blob = cpabe.serialize_ciphertext(abe_ct)
    payload = (
        paillier.serialize_ciphertext(pe_ct)
        + len(abe_blob).to_bytes(4, "big")
        + abe_blob
        + paillier.serialize_public_key(ppk)
    )
    return Message(
        MsgType.RESULT_BUNDLE, request_id, Role.SP, receiver, payload,
        he_bits=_he_bits_of(pe_ct.public.n),
        abe_bits=abe_ct.group_element_bits,
        body=(pe_ct, abe_ct, ppk),
    )


def multi_agg_request(request_id, dr_id, attrs) -> Message:
    payload = _ids_payload(dr_id) + _attrs_payload(attrs)
    return Message(
        MsgType.MULTI_AGG_REQUEST, request_id, Role.DR, Role.SP, payload,
        body=(dr_id, frozenset(attrs)),
    )


def masked_multi(request_id, cts: list[vphe.VpheCiphertext], ap_m: Node, version: int) -> Message:
    payload = len(cts).to_bytes(4, "big")
    he_bits = 0
    for ct in cts:
        payload += vphe.serialize_ciphertext(ct)
        he_bits += _he_bits_of(ct.public.n)
    payload += _policy_payload(ap_m) + version.to_bytes(4, "big")
    return Message(
        MsgType.MASKED_MULTI, request_id, Role.SP, Role.CP, payload,
        he_bits=he_bits, body=(list(cts), ap_m, version),
    )


def request_rejected(request_id, receiver: Role, reason: str) -> Message:
    text = reason.encode()
    payload = len(text).to_bytes(4, "big") + text
    return Message(
        MsgType.REQUEST_REJECTED, request_id, Role.SP, receiver, payload, body=reason
    )


# Decoders mirror the builders; used by wire-format tests and replay tooling.

def decode_payload(msg_type: MsgType, payload: bytes, key_lookup=None):
    """Parse a payload back to its logical content.

    key_lookup(kind, key_id) supplies public keys for ciphertext frames:
    kind is "vp" or "pe". Only needed for types that carry ciphertexts.
    """
    if msg_type == MsgType.POLICY_REGISTER:
        do_id = int.from_bytes(payload[0:8], "big")
        version = int.from_bytes(payload[8:16], "big")
        ap_s, off = _parse_policy_blob(payload, 16)
        ap_m, _ = _parse_policy_blob(payload, off)
        return do_id, ap_s, ap_m, version
    if msg_type == MsgType.DATA_UPLOAD or msg_type == MsgType.OWN_AGG_RESPONSE:
        user_id = int.from_bytes(payload[1:9], "big")
        return vphe.deserialize_ciphertext(payload, key_lookup("vp", user_id))
    if msg_type == MsgType.OWN_AGG_REQUEST:
        return tuple(
            int.from_bytes(payload[i : i + 8], "big") for i in range(0, 24, 8)
        )
    if msg_type == MsgType.SINGLE_AGG_REQUEST:
        return tuple(
            int.from_bytes(payload[i : i + 8], "big") for i in range(0, 32, 8)
        )
    if msg_type == MsgType.MASKED_SINGLE:
        user_id = int.from_bytes(payload[1:9], "big")
        vpk = key_lookup("vp", user_id)
        ct = vphe.deserialize_ciphertext(payload, vpk)
        off = 9 + (2 * vpk.n.bit_length() + 7) // 8
        ap_s, off = _parse_policy_blob(payload, off)
        version = int.from_bytes(payload[off : off + 4], "big")
        return ct, ap_s, version
    if msg_type == MsgType.MULTI_AGG_REQUEST:
        dr_id = int.from_bytes(payload[0:8], "big")
        attrs, _ = _parse_attrs(payload, 8)
        return dr_id, attrs
    if msg_type == MsgType.REQUEST_REJECTED:
        size = int.from_bytes(payload[0:4], "big")
        return payload[4 : 4 + size].decode()
    if msg_type in (MsgType.PREPARED_SINGLE, MsgType.PREPARED_MULTI, MsgType.RESULT_BUNDLE):
        key_id = int.from_bytes(payload[1:9], "big")
        ppk_probe = key_lookup("pe", key_id)
        pe_ct = paillier.deserialize_ciphertext(payload, ppk_probe)
        off = 9 + (2 * ppk_probe.n.bit_length() + 7) // 8
        abe_len = int.from_bytes(payload[off : off + 4], "big")
        abe_ct = cpabe.deserialize_ciphertext(payload[off + 4 : off + 4 + abe_len])
        ppk = paillier.deserialize_public_key(payload[off + 4 + abe_len :])
        return pe_ct, abe_ct, ppk
    if msg_type == MsgType.MASKED_MULTI:
        count = int.from_bytes(payload[0:4], "big")
        off = 4
        cts = []
        for _ in range(count):
            user_id = int.from_bytes(payload[off + 1 : off + 9], "big")
            vpk = key_lookup("vp", user_id)
            width = (2 * vpk.n.bit_length() + 7) // 8
            cts.append(vphe.deserialize_ciphertext(payload[off : off + 9 + width], vpk))
            off += 9 + width
        ap_m, off = _parse_policy_blob(payload, off)
        version = int.from_bytes(payload[off : off + 4], "big")
        return cts, ap_m, version
    if msg_type == MsgType.KEY_RESPONSE:
        ppk = paillier.deserialize_public_key(payload)
        _, off = decode_int(payload, 9)
        _, off = decode_int(payload, off)
        psk = paillier.deserialize_private_key(payload[off:])
        return ppk, psk
    if msg_type == MsgType.KEY_REQUEST:
        return None
    raise ProtocolError(f"unknown message tag {msg_type}")
