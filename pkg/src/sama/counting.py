"""Operation counters and the counting context.

Counted units mirror the cost model used throughout the toolkit: modular
exponentiation / multiplication for the homomorphic layers, group
exponentiation and pairing-equivalents for the attribute-based layer, and
modular inversions. Counting is scoped: operations tick the counters of
whichever :func:`counting` context is active on the current logical thread,
and are free-running no-ops otherwise. There is no global mutable state.
"""

from __future__ import annotations

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, fields


@dataclass
class OpCounters:
    """Per-scope operation tallies."""

    modexp: int = 0
    modmul: int = 0
    exp: int = 0
    bipair: int = 0
    modinv: int = 0

    def snapshot(self) -> "OpCounters":
        return OpCounters(self.modexp, self.modmul, self.exp, self.bipair, self.modinv)

    def delta(self, since: "OpCounters") -> "OpCounters":
        """Counters accumulated since an earlier snapshot."""
        return OpCounters(
            self.modexp - since.modexp,
            self.modmul - since.modmul,
            self.exp - since.exp,
            self.bipair - since.bipair,
            self.modinv - since.modinv,
        )

    def add(self, other: "OpCounters") -> None:
        self.modexp += other.modexp
        self.modmul += other.modmul
        self.exp += other.exp
        self.bipair += other.bipair
        self.modinv += other.modinv

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def total(self) -> int:
        return self.modexp + self.modmul + self.exp + self.bipair + self.modinv


_ACTIVE: ContextVar[OpCounters | None] = ContextVar("sama_op_counters", default=None)


@contextmanager
def counting(counters: OpCounters):
    """Route counted operations to *counters* for the duration of the block."""
    token = _ACTIVE.set(counters)
    try:
        yield counters
    finally:
        _ACTIVE.reset(token)


def tick_modexp() -> None:
    c = _ACTIVE.get()
    if c is not None:
        c.modexp += 1


def tick_modmul() -> None:
    c = _ACTIVE.get()
    if c is not None:
        c.modmul += 1


def tick_exp(amount: int = 1) -> None:
    c = _ACTIVE.get()
    if c is not None:
        c.exp += amount


def tick_bipair(amount: int = 1) -> None:
    c = _ACTIVE.get()
    if c is not None:
        c.bipair += amount


def tick_modinv() -> None:
    c = _ACTIVE.get()
    if c is not None:
        c.modinv += 1
