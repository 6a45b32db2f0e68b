"""Built-in micro-scenarios with frozen expected outcomes.

Two hand-scripted 4-node traces exercise the ordering pipeline end to end
without the network simulator:

* anchor handoff: three batches drive the executor through a normal-path
  commit, an alter-path commit, and a second normal-path commit, in that
  order, with one under-supported command correctly left uncommitted;
* median inversion: a single Byzantine timestamp report makes the
  timestamp baseline invert a same-proposer pair that the anchor executor
  commits in proposal order.

Every replica replays the same batch stream; the expected committed
sequences are asserted on all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .authenticators import HmacAuthenticator
from .consensus import Consenter
from .executor import ALTER_PATH, Executor, NORMAL_PATH
from .mempool import Mempool
from .tsorder import TimestampExecutor
from .types import Command, Digest, EMPTY_DIGEST, PartialOrderLog


@dataclass
class GoldenOutcome:
    name: str
    passed: bool
    details: list[str] = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}"


def _certified(auth: HmacAuthenticator, node_id: int, seq: int, ts: int,
               cmd_digest: Digest, prev: Digest) -> PartialOrderLog:
    log = PartialOrderLog.create(node_id, seq, ts, cmd_digest, prev)
    partials = [auth.partial_sign(s, log.cur_digest) for s in range(auth.quorum)]
    return log.with_certificate(auth.aggregate(log.cur_digest, partials))


def _chain(auth: HmacAuthenticator, node_id: int,
           entries: list[tuple[Command, int]]) -> list[PartialOrderLog]:
    """Certified logs for one node: [(command, timestamp), ...] in local order."""
    logs = []
    prev = EMPTY_DIGEST
    for seq, (cmd, ts) in enumerate(entries, start=1):
        log = _certified(auth, node_id, seq, ts, cmd.digest, prev)
        logs.append(log)
        prev = log.cur_digest
    return logs


class _Replica:
    def __init__(self, node_id: int, auth: HmacAuthenticator, strategy: str,
                 commands: list[Command], logs: list[PartialOrderLog]):
        self.mempool = Mempool(node_id, auth)
        for cmd in commands:
            self.mempool.store_command(cmd)
        for log in logs:
            accepted = self.mempool.handle_order(log)
            assert accepted, f"harness log rejected: {log}"
        self.consenter = Consenter(node_id, auth, self.mempool)
        if strategy == "timestamp":
            self.executor = TimestampExecutor(auth.n, auth.f, self.mempool.fetch_command)
        else:
            self.executor = Executor(auth.n, auth.f, self.mempool.fetch_command)

    def deliver(self, batch) -> None:
        log_set = self.consenter.commit_order_batch(batch)
        self.executor.feed(log_set)
        self.executor.drain()

    def committed_digests(self) -> list[Digest]:
        return [entry.digest for entry in self.executor.committed_order]


def _check(details: list[str], ok: bool, label: str) -> bool:
    details.append(f"{'ok' if ok else 'FAIL'}: {label}")
    return ok


def run_anchor_handoff() -> GoldenOutcome:
    """Normal -> alter -> normal anchor progression over three batches."""
    n, f = 4, 1
    auth = HmacAuthenticator(n, f, cluster_seed=b"golden-handoff")
    red = Command.create(0, 1, b"red")
    yellow = Command.create(0, 2, b"yellow")
    green = Command.create(0, 3, b"green")
    white = Command.create(0, 4, b"white")
    commands = [red, yellow, green, white]

    chains = {
        0: _chain(auth, 0, [(red, 1), (green, 2), (yellow, 3)]),
        1: _chain(auth, 1, [(white, 1), (red, 2), (yellow, 3)]),
        2: _chain(auth, 2, [(red, 1), (yellow, 2), (green, 3)]),
        3: _chain(auth, 3, [(yellow, 1), (green, 2)]),
    }
    all_logs = [log for chain in chains.values() for log in chain]

    batches = [
        (chains[0][0], chains[1][0], None, None),
        (chains[0][2], chains[1][2], chains[2][1], None),
        (chains[0][2], chains[1][2], chains[2][2], chains[3][1]),
    ]

    replicas = [_Replica(i, auth, "anchor", commands, all_logs) for i in range(n)]
    details: list[str] = []
    passed = True

    first = replicas[0]
    first.deliver(batches[0])
    passed &= _check(details, first.committed_digests() == [],
                     "no anchor after the first batch")
    first.deliver(batches[1])
    passed &= _check(details, first.committed_digests() == [red.digest, yellow.digest],
                     "second batch commits red then yellow")
    first.deliver(batches[2])
    expected = [red.digest, yellow.digest, green.digest]
    passed &= _check(details, first.committed_digests() == expected,
                     "third batch commits green")
    paths = [event.path for event in first.executor.anchor_events]
    passed &= _check(details, paths == [NORMAL_PATH, ALTER_PATH, NORMAL_PATH],
                     "yellow is the alter-path anchor")
    tags = [entry.path_tag for entry in first.executor.committed_order]
    passed &= _check(details, tags == [NORMAL_PATH, ALTER_PATH, NORMAL_PATH],
                     "trace tags normal/alter/normal")
    passed &= _check(details, white.digest not in first.committed_digests(),
                     "under-supported command stays uncommitted")

    for replica in replicas[1:]:
        for batch in batches:
            replica.deliver(batch)
        passed &= _check(
            details,
            replica.committed_digests() == expected,
            f"replica {replica.mempool.node_id} commits the identical order",
        )
    return GoldenOutcome("anchor-handoff", passed, details)


def run_median_inversion() -> GoldenOutcome:
    """One skewed reporter flips the timestamp baseline but not the anchors."""
    n, f = 4, 1
    auth = HmacAuthenticator(n, f, cluster_seed=b"golden-median")
    early = Command.create(0, 1, b"first")
    late = Command.create(0, 2, b"second")
    commands = [early, late]

    chains = {
        0: _chain(auth, 0, [(early, 0), (late, 1)]),
        1: _chain(auth, 1, [(early, 3), (late, 4)]),
        2: _chain(auth, 2, [(late, 2), (early, 3)]),
    }
    all_logs = [log for chain in chains.values() for log in chain]
    batch = (chains[0][1], chains[1][1], chains[2][1], None)

    details: list[str] = []
    passed = True

    anchor_traces = []
    ts_traces = []
    for node_id in range(n):
        anchor = _Replica(node_id, auth, "anchor", commands, all_logs)
        anchor.deliver(batch)
        anchor_traces.append(anchor.committed_digests())
        baseline = _Replica(node_id, auth, "timestamp", commands, all_logs)
        baseline.deliver(batch)
        baseline.executor.flush_ready()
        ts_traces.append(baseline.committed_digests())
        if node_id == 0:
            trusted = {
                entry.digest: entry.trusted_timestamp
                for entry in baseline.executor.committed_order
            }
            passed &= _check(details, trusted[early.digest] == 3,
                             "trusted timestamp of the earlier command is 3")
            passed &= _check(details, trusted[late.digest] == 2,
                             "trusted timestamp of the later command is 2")

    passed &= _check(details, all(t == [early.digest, late.digest] for t in anchor_traces),
                     "anchor strategy preserves proposal order on every node")
    passed &= _check(details, all(t == [late.digest, early.digest] for t in ts_traces),
                     "timestamp baseline inverts the pair on every node")
    return GoldenOutcome("median-inversion", passed, details)


def run_all() -> list[GoldenOutcome]:
    return [run_anchor_handoff(), run_median_inversion()]
