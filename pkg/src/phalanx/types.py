"""Core data types: commands, partial-order logs, and quorum certificates.

All types are immutable values; digests are computed over a canonical
big-endian, length-prefixed encoding so they are bit-exact across
processes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from typing import Optional

Digest = bytes

DIGEST_SIZE = 32

# Placeholder for "no previous log" (sequence number 1).
EMPTY_DIGEST: Digest = b"\x00" * DIGEST_SIZE


class PreconditionViolation(ValueError):
    """A structural precondition on a type or operation was violated."""


def digest_command(proposer_id: int, seq: int, payload: bytes) -> Digest:
    """Digest of a command: sha256 over u16 proposer || u64 seq || u32 len || payload."""
    if seq < 1:
        raise PreconditionViolation(f"command seq must be >= 1, got {seq}")
    return hashlib.sha256(
        struct.pack(">HQI", proposer_id, seq, len(payload)) + payload
    ).digest()


def digest_log(
    node_id: int,
    seq: int,
    timestamp: int,
    command_digest: Digest,
    prev_digest: Digest,
) -> Digest:
    """Digest of a log: sha256 over u16 node || u64 seq || u64 ts || cmd digest || prev digest.

    The first log of a node (seq 1) must chain from EMPTY_DIGEST; every later
    log must carry a real predecessor digest.
    """
    if seq < 1:
        raise PreconditionViolation(f"log seq must be >= 1, got {seq}")
    if (seq == 1) != (prev_digest == EMPTY_DIGEST):
        raise PreconditionViolation(
            f"prev_digest must be empty iff seq == 1 (seq={seq})"
        )
    return hashlib.sha256(
        struct.pack(">HQQ", node_id, seq, timestamp)
        + command_digest
        + prev_digest
    ).digest()


@dataclass(frozen=True, slots=True)
class Command:
    """Atomic ordering unit proposed by a proposer.

    ``seq`` is the proposer-local sending order; ``payload`` may pack several
    client requests into one command.
    """

    proposer_id: int
    seq: int
    payload: bytes
    digest: Digest

    @classmethod
    def create(cls, proposer_id: int, seq: int, payload: bytes) -> "Command":
        return cls(proposer_id, seq, payload, digest_command(proposer_id, seq, payload))

    def verify_digest(self) -> bool:
        return self.digest == digest_command(self.proposer_id, self.seq, self.payload)


@dataclass(frozen=True, slots=True)
class PartialSignature:
    """One node's signature share over an event digest."""

    signer: int
    event_digest: Digest
    sig: bytes


@dataclass(frozen=True, slots=True)
class Certificate:
    """Aggregate of exactly 2f+1 distinct signature shares over one event digest."""

    event_digest: Digest
    signer_set: frozenset[int]
    aggregate: bytes

    def signers_sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.signer_set))


@dataclass(frozen=True, slots=True)
class PartialOrderLog:
    """A node's hash-chained declaration that a command sits at position ``seq``
    in its local order.

    ``certificate`` is None while the log is still gathering votes (pre-order
    stage) and present once 2f+1 nodes endorsed it.
    """

    node_id: int
    seq: int
    timestamp: int
    command_digest: Digest
    prev_digest: Digest
    cur_digest: Digest
    certificate: Optional[Certificate] = None

    @classmethod
    def create(
        cls,
        node_id: int,
        seq: int,
        timestamp: int,
        command_digest: Digest,
        prev_digest: Digest,
    ) -> "PartialOrderLog":
        cur = digest_log(node_id, seq, timestamp, command_digest, prev_digest)
        return cls(node_id, seq, timestamp, command_digest, prev_digest, cur)

    def verify_digest(self) -> bool:
        try:
            expected = digest_log(
                self.node_id, self.seq, self.timestamp,
                self.command_digest, self.prev_digest,
            )
        except PreconditionViolation:
            return False
        return self.cur_digest == expected

    def with_certificate(self, cert: Certificate) -> "PartialOrderLog":
        return replace(self, certificate=cert)

    def without_certificate(self) -> "PartialOrderLog":
        return replace(self, certificate=None)
