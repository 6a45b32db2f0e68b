"""Executor: turns the common log-set stream into the total command order.

Each node replays the same stream, so the whole module is a deterministic
function of its input. Per command it tracks which nodes logged it and at
what timestamps; per author it keeps a FIFO queue of that author's logs.

Commit proceeds by anchor sets:

* normal path: if at least f+1 queue fronts point at the same command,
  every such command anchors the next set;
* alter path: otherwise the uncommitted command with the lowest trusted
  timestamp anchors, together with every command that is not reliably
  ordered after it;
* a final support check drops members below f+1 logs and defers the whole
  set while any member sits between f+1 and 2f+1 logs.

Members of an accepted set are committed in ascending trusted-timestamp
order (ties broken by digest), which keeps every replica's output equal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .consensus import LogSet
from .types import Command, Digest, PartialOrderLog

NORMAL_PATH = "normal"
ALTER_PATH = "alter"


class CommandUnavailable(Exception):
    """Commit needs command bodies that are not in the local store."""

    def __init__(self, digests: list[Digest]):
        super().__init__(f"missing {len(digests)} command bodies")
        self.digests = digests


@dataclass
class CommandInfo:
    """Aggregated per-command view: one log slot per node plus their timestamps."""

    digest: Digest
    logs: dict[int, PartialOrderLog] = field(default_factory=dict)

    @property
    def support(self) -> int:
        return len(self.logs)

    def timestamps(self) -> list[int]:
        out = sorted(log.timestamp for log in self.logs.values())
        return out

    def add_log(self, log: PartialOrderLog) -> None:
        self.logs[log.node_id] = log


@dataclass(frozen=True, slots=True)
class TraceEntry:
    """One committed command in the final order."""

    index: int
    proposer_id: int
    proposer_seq: int
    digest: Digest
    trusted_timestamp: int
    path_tag: str  # "normal"/"alter" for the anchor commands, "-" otherwise

    def line(self) -> str:
        return (
            f"{self.index}\t{self.proposer_id}\t{self.proposer_seq}\t"
            f"{self.digest.hex()}\t{self.trusted_timestamp}\t{self.path_tag}"
        )


@dataclass(frozen=True, slots=True)
class AnchorEvent:
    path: str
    anchors: tuple[Digest, ...]
    committed: tuple[Digest, ...]


class Executor:
    """Anchor-based total ordering over the consensus log-set stream."""

    def __init__(self, n: int, f: int, resolve_command: Callable[[Digest], Optional[Command]]):
        self.n = n
        self.f = f
        self.quorum = 2 * f + 1
        self._resolve = resolve_command
        self.committed_digests: set[Digest] = set()
        self.command_infos: dict[Digest, CommandInfo] = {}
        self.author_queues: list[deque[PartialOrderLog]] = [deque() for _ in range(n)]
        self.committed_order: list[TraceEntry] = []
        self.anchor_events: list[AnchorEvent] = []
        self.pending_sets: deque[LogSet] = deque()
        self.blocked_on: set[Digest] = set()
        # Uncommitted commands whose trusted timestamp is defined (support >= 2f+1).
        self._eligible: dict[Digest, CommandInfo] = {}

    # ------------------------------------------------------------------
    # ingestion

    def ingest_log_set(self, log_set: LogSet) -> None:
        for log in log_set:
            info = self.command_infos.get(log.command_digest)
            if info is None:
                info = CommandInfo(log.command_digest)
                self.command_infos[log.command_digest] = info
            # Exactly-once delivery upstream: one (author, seq) never repeats.
            assert log.node_id not in info.logs or (
                info.logs[log.node_id].seq == log.seq
            ), "duplicate author slot for command"
            info.add_log(log)
            self.author_queues[log.node_id].append(log)
            if (
                info.support >= self.quorum
                and log.command_digest not in self.committed_digests
            ):
                self._eligible[log.command_digest] = info

    # ------------------------------------------------------------------
    # selection machinery

    def trusted_timestamp(self, info: CommandInfo) -> Optional[int]:
        """The (f+1)-th smallest reported timestamp, defined at 2f+1 support."""
        if info.support < self.quorum:
            return None
        return info.timestamps()[self.f]

    def front_vector(self) -> list[Optional[PartialOrderLog]]:
        """Pop committed fronts off every author queue and report the rest."""
        fronts: list[Optional[PartialOrderLog]] = [None] * self.n
        for j, queue in enumerate(self.author_queues):
            while queue and queue[0].command_digest in self.committed_digests:
                queue.popleft()
            if queue:
                fronts[j] = queue[0]
        return fronts

    def reliable_precedes(self, first: Digest, second: Digest) -> bool:
        """True iff at least f+1 nodes logged both commands with `first` earlier."""
        a = self.command_infos.get(first)
        b = self.command_infos.get(second)
        if a is None or b is None:
            return False
        believers = 0
        logs_b = b.logs
        for node_id, log_a in a.logs.items():
            log_b = logs_b.get(node_id)
            if log_b is not None and log_a.seq < log_b.seq:
                believers += 1
                if believers > self.f:
                    return True
        return False

    def select_anchor_set(self) -> list[CommandInfo]:
        members, _path, _anchors = self._select()
        return members

    def _select(self) -> tuple[list[CommandInfo], str, tuple[Digest, ...]]:
        fronts = self.front_vector()
        counts: dict[Digest, int] = {}
        for front in fronts:
            if front is not None:
                counts[front.command_digest] = counts.get(front.command_digest, 0) + 1
        agreed = sorted(d for d, c in counts.items() if c >= self.f + 1)
        if agreed:
            candidates = [self.command_infos[d] for d in agreed]
            return self._front_set_check(candidates), NORMAL_PATH, tuple(agreed)
        members = self._alter_path()
        anchors = (members[0].digest,) if members else ()
        return self._front_set_check(members), ALTER_PATH, anchors

    def _alter_path(self) -> list[CommandInfo]:
        anchor: Optional[CommandInfo] = None
        anchor_ts = 0
        for digest in self._eligible:
            info = self._eligible[digest]
            ts = self.trusted_timestamp(info)
            if anchor is None or (ts, digest) < (anchor_ts, anchor.digest):
                anchor, anchor_ts = info, ts
        if anchor is None:
            return []
        members = [anchor]
        chosen = {anchor.digest}
        # Commands not reliably ordered after the anchor join its set. Fully
        # supported candidates are absorbed first; the first under-supported
        # addition ends the expansion (the support check below then defers).
        ranked = sorted(
            (info for d, info in self.command_infos.items()
             if d not in self.committed_digests and d not in chosen),
            key=lambda info: (info.support < self.quorum, info.digest),
        )
        for info in ranked:
            if self.reliable_precedes(anchor.digest, info.digest):
                continue
            members.append(info)
            chosen.add(info.digest)
            if info.support < self.quorum:
                break
        return members

    def _front_set_check(self, members: list[CommandInfo]) -> list[CommandInfo]:
        kept = [info for info in members if info.support >= self.f + 1]
        for info in kept:
            if info.support < self.quorum:
                return []
        return kept

    # ------------------------------------------------------------------
    # commitment

    def commit_anchor_set(self, members: list[CommandInfo], path: str,
                          anchors: tuple[Digest, ...]) -> list[Command]:
        ordered = sorted(
            members, key=lambda info: (self.trusted_timestamp(info), info.digest)
        )
        resolved: list[Command] = []
        missing: list[Digest] = []
        for info in ordered:
            cmd = self._resolve(info.digest)
            if cmd is None:
                missing.append(info.digest)
            else:
                resolved.append(cmd)
        if missing:
            raise CommandUnavailable(missing)
        committed: list[Digest] = []
        for info, cmd in zip(ordered, resolved):
            assert info.digest not in self.committed_digests
            tag = path if info.digest in anchors else "-"
            self.committed_order.append(
                TraceEntry(
                    index=len(self.committed_order),
                    proposer_id=cmd.proposer_id,
                    proposer_seq=cmd.seq,
                    digest=info.digest,
                    trusted_timestamp=self.trusted_timestamp(info),
                    path_tag=tag,
                )
            )
            self.committed_digests.add(info.digest)
            self._eligible.pop(info.digest, None)
            committed.append(info.digest)
        self.anchor_events.append(AnchorEvent(path, anchors, tuple(committed)))
        return resolved

    # ------------------------------------------------------------------
    # pipeline driver

    def feed(self, log_set: LogSet) -> None:
        self.pending_sets.append(log_set)

    def drain(self) -> None:
        """Ingest pending log sets and commit anchor sets until quiescent.

        Leaves ``blocked_on`` non-empty when command bodies must be fetched;
        call :meth:`unblock` once they are stored locally.
        """
        while not self.blocked_on:
            members, path, anchors = self._select()
            if members:
                try:
                    self.commit_anchor_set(members, path, anchors)
                except CommandUnavailable as exc:
                    self.blocked_on = set(exc.digests)
                    return
                continue
            if not self.pending_sets:
                return
            self.ingest_log_set(self.pending_sets.popleft())

    def unblock(self, digest: Digest) -> bool:
        """Clear one awaited command body; returns True when fully unblocked."""
        self.blocked_on.discard(digest)
        return not self.blocked_on

    # ------------------------------------------------------------------
    # inspection

    @property
    def idle(self) -> bool:
        return not self.pending_sets and not self.blocked_on

    def alter_path_ratio(self) -> float:
        if not self.anchor_events:
            return 0.0
        alters = sum(1 for ev in self.anchor_events if ev.path == ALTER_PATH)
        return alters / len(self.anchor_events)

    def trace_lines(self) -> list[str]:
        return [entry.line() for entry in self.committed_order]
