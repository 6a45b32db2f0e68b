"""End-to-end simulation properties: FIFO links, determinism, fault handling."""

from phalanx import NodeBehavior, Scenario, Simulation, run


def small(**kw):
    defaults = dict(n=4, f=1, proposers=1, commands_per_proposer=30, seed=5)
    defaults.update(kw)
    return Scenario(**defaults)


class TestHonestRuns:
    def test_all_commands_commit_in_proposal_order(self):
        result = run(small())
        assert result.committed == 30
        assert result.uncommitted == 0
        assert result.reordered_ratio == 0.0
        assert result.consistency
        assert not result.non_quiescent

    def test_honest_traces_identical_across_nodes(self):
        result = run(small(seed=9))
        digests = {
            node: [e.digest for e in trace] for node, trace in result.traces.items()
        }
        assert len(digests) == 4
        reference = digests[0]
        assert all(t == reference for t in digests.values())

    def test_wide_latency_preserves_per_link_fifo(self):
        # One proposer, huge latency variance: per-link FIFO still forces the
        # proposal order onto every honest partial order, hence zero inversions.
        result = run(small(latency=(1, 400), commands_per_proposer=40, seed=123))
        assert result.reordered_ratio == 0.0
        assert result.consistency

    def test_two_proposers_stay_consistent(self):
        result = run(small(proposers=2, commands_per_proposer=25, seed=21))
        assert result.consistency
        assert result.uncommitted == 0
        assert result.reordered_ratio == 0.0

    def test_wan_profile_commits_everything(self):
        result = run(small(latency=(40, 150), seed=33))
        assert result.uncommitted == 0
        assert result.consistency


class TestLinkFifoClamp:
    def test_earlier_send_never_overtaken(self):
        # Latency draws of 10 then 3 on one link must still deliver in send
        # order: the second delivery time is clamped up to the first.
        class FixedRng:
            def __init__(self, values):
                self._values = iter(values)

            def randint(self, lo, hi):
                return next(self._values)

        sim = Simulation(small())
        sim.rng = FixedRng([10, 3])
        sim.now = 100
        first = sim._deliver_time(0, 1)
        second = sim._deliver_time(0, 1)
        assert first == 110
        assert second == 110  # clamped, not 103

    def test_independent_links_unclamped(self):
        class FixedRng:
            def __init__(self, values):
                self._values = iter(values)

            def randint(self, lo, hi):
                return next(self._values)

        sim = Simulation(small())
        sim.rng = FixedRng([10, 3])
        sim.now = 100
        assert sim._deliver_time(0, 1) == 110
        assert sim._deliver_time(0, 2) == 103

    def test_self_link_is_immediate(self):
        sim = Simulation(small())
        sim.now = 42
        assert sim._deliver_time(1, 1) == 42


class TestDeterminism:
    def test_same_seed_byte_identical_json(self):
        a = run(small(seed=42))
        b = run(small(seed=42))
        assert a.to_json() == b.to_json()

    def test_different_seed_changes_run(self):
        a = run(small(seed=42))
        b = run(small(seed=43))
        assert a.events_processed != b.events_processed or a.sim_time_ms != b.sim_time_ms

    def test_trace_lines_reproducible(self):
        a = run(small(seed=10, byzantine={3: NodeBehavior(shuffle=True)}))
        b = run(small(seed=10, byzantine={3: NodeBehavior(shuffle=True)}))
        assert [e.line() for e in a.reference_trace] == [
            e.line() for e in b.reference_trace
        ]


class TestByzantineBehaviors:
    def test_silent_node_does_not_stop_commits(self):
        result = run(small(byzantine={3: NodeBehavior(silent=True)}))
        assert result.uncommitted == 0
        assert result.consistency
        assert result.reordered_ratio == 0.0

    def test_shuffler_cannot_reorder_below_threshold(self):
        result = run(small(byzantine={3: NodeBehavior(shuffle=True)},
                           commands_per_proposer=60, seed=17))
        assert result.reordered_ratio == 0.0
        assert result.consistency

    def test_skew_shifts_reported_timestamps(self):
        scenario = small(byzantine={3: NodeBehavior(skew=-7)}, commands_per_proposer=5)
        sim = Simulation(scenario)
        sim.run()
        skewed = sim.nodes[3].mempool
        honest = sim.nodes[1].mempool
        skewed_ts = [skewed.fetch_log(3, s).timestamp for s in range(1, 6)]
        honest_ts = [honest.fetch_log(1, s).timestamp for s in range(1, 6)]
        # Both tick on the same grid; the Byzantine one reports shifted stamps.
        assert all((h - s) % scenario.delta_o != 0 or h != s for h, s in zip(honest_ts, skewed_ts))
        assert all(ts % scenario.delta_o != 0 for ts in skewed_ts)

    def test_reverse_control_fully_inverts(self):
        result = run(small(strategy="follow", propose_interval=0,
                           commands_per_proposer=50,
                           byzantine={3: NodeBehavior(reverse=True)}))
        assert result.reordered_ratio == 1.0

    def test_two_reversers_break_ordering(self):
        result = run(small(propose_interval=0, commands_per_proposer=60,
                           byzantine={2: NodeBehavior(reverse=True),
                                      3: NodeBehavior(reverse=True)}))
        assert result.reordered_ratio > 0.005
        assert result.uncommitted == 0

    def test_over_threshold_silence_hits_duration_guard(self):
        result = run(small(commands_per_proposer=5, max_sim_ms=4000,
                           byzantine={2: NodeBehavior(silent=True),
                                      3: NodeBehavior(silent=True)}))
        assert result.non_quiescent
        assert result.uncommitted == 5


class TestTimestampStrategy:
    def test_honest_baseline_matches_proposal_order(self):
        result = run(small(strategy="timestamp", seed=14))
        assert result.reordered_ratio == 0.0
        assert result.uncommitted == 0
        assert result.consistency

    def test_baseline_traces_identical_across_nodes(self):
        result = run(small(strategy="timestamp", proposers=2, seed=15))
        digests = {n: [e.digest for e in t] for n, t in result.traces.items()}
        reference = digests[0]
        assert all(t == reference for t in digests.values())


class TestClientReplies:
    def test_every_command_reaches_quorum_acceptance(self):
        result = run(small(commands_per_proposer=10), client_replies=True)
        assert result.accepted_commands == 10

    def test_replies_survive_a_silent_node(self):
        result = run(small(commands_per_proposer=10,
                           byzantine={3: NodeBehavior(silent=True)}),
                     client_replies=True)
        assert result.accepted_commands == 10


class TestPeerRetrieval:
    """Gap recovery: a node missing state pulls it from peers and resumes."""

    def _chain(self, sim, author, commands):
        from phalanx.types import EMPTY_DIGEST, PartialOrderLog

        logs, prev = [], EMPTY_DIGEST
        for seq, cmd in enumerate(commands, start=1):
            log = PartialOrderLog.create(author, seq, 10 * seq, cmd.digest, prev)
            shares = [sim.auth.partial_sign(s, log.cur_digest) for s in range(3)]
            logs.append(log.with_certificate(sim.auth.aggregate(log.cur_digest, shares)))
            prev = logs[-1].cur_digest
        return logs

    def test_missing_log_fetched_from_peers(self):
        from phalanx import Command

        sim = Simulation(small(commands_per_proposer=0))
        commands = [Command.create(0, i, b"cmd%d" % i) for i in (1, 2)]
        chains = {author: self._chain(sim, author, commands) for author in (0, 1, 3)}
        for node in sim.nodes:
            for cmd in commands:
                node.mempool.store_command(cmd)
        all_logs = [log for chain in chains.values() for log in chain]
        for node_id in (0, 1, 3):
            for log in all_logs:
                assert sim.nodes[node_id].mempool.handle_order(log)
        # Node 2 misses author 1's first log; the delivered batch skips ahead.
        target = sim.nodes[2]
        for log in all_logs:
            if (log.node_id, log.seq) != (1, 1):
                assert target.mempool.handle_order(log)
        batch = (chains[0][1], chains[1][1], None, chains[3][1])
        target.on_batch(0, batch)
        assert target.consenter.blocked
        sim.run()  # drains the fetch round-trip to quiescence
        assert not target.consenter.blocked
        assert target.mempool.fetch_log(1, 1) is not None
        assert [e.digest for e in target.executor.committed_order] == [
            c.digest for c in commands
        ]

    def test_missing_command_body_fetched_before_commit(self):
        from phalanx import Command

        sim = Simulation(small(commands_per_proposer=0))
        secret = Command.create(0, 1, b"late body")
        logs = {
            author: self._chain(sim, author, [secret])[0] for author in (0, 1, 3)
        }
        target = sim.nodes[2]
        for author, log in logs.items():
            assert target.mempool.handle_order(log)
        # Only node 3 knows the command body.
        sim.nodes[3].mempool.store_command(secret)
        batch = (logs[0], logs[1], None, logs[3])
        target.on_batch(0, batch)
        assert target.executor.blocked_on == {secret.digest}
        sim.run()
        assert not target.executor.blocked_on
        assert [e.digest for e in target.executor.committed_order] == [secret.digest]


class TestAuthenticatorSchemes:
    def test_ed25519_scheme_end_to_end(self):
        result = run(small(commands_per_proposer=8, auth_scheme="ed25519"))
        assert result.uncommitted == 0
        assert result.consistency

    def test_schemes_agree_on_committed_order(self):
        hmac_run = run(small(commands_per_proposer=8, auth_scheme="hmac"))
        ed_run = run(small(commands_per_proposer=8, auth_scheme="ed25519"))
        assert [e.digest for e in hmac_run.reference_trace] == [
            e.digest for e in ed_run.reference_trace
        ]


class TestResultShape:
    def test_json_contains_schema_and_metrics(self):
        import json

        result = run(small(commands_per_proposer=5))
        payload = json.loads(result.to_json())
        for key in (
            "schema_version", "scenario", "reordered_ratio", "alter_path_ratio",
            "consistency", "uncommitted", "non_quiescent", "trace_sha256",
        ):
            assert key in payload
        assert payload["scenario"]["n"] == 4

    def test_batch_trace_recording(self):
        result = run(small(commands_per_proposer=5), record_batches=True)
        assert result.batch_trace
        assert all(isinstance(line, str) for line in result.batch_trace)
        from phalanx.consensus import decode_order_batch
        decoded = decode_order_batch(bytes.fromhex(result.batch_trace[0]))
        assert len(decoded) == 4
