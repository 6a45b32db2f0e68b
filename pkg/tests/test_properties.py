"""Randomized protocol invariants over mixed clusters and behaviors."""

import random

import pytest

from phalanx import Scenario, run
from phalanx.scenario import TIMESTAMP

from prop_harness import check_invariants, random_scenario

BATCH = 40  # the acceptance suite runs the full 200-scenario battery


@pytest.mark.parametrize("index", range(BATCH))
def test_random_scenario_invariants(index):
    rng = random.Random(0xA5C0 + index)
    scenario = random_scenario(rng)
    failures = check_invariants(scenario)
    assert not failures, f"{scenario.to_dict()}: {failures}"


@pytest.mark.parametrize("index", range(8))
def test_timestamp_strategy_consistency(index):
    rng = random.Random(0xBEEF + index)
    scenario = random_scenario(rng, strategy=TIMESTAMP)
    result = run(scenario)
    assert result.consistency
    assert not result.non_quiescent


def test_unanimous_preservation_under_pure_skew():
    # Skew-only adversaries never change any declared order, so every pair
    # is unanimously ordered and the total order must equal proposal order.
    from phalanx import NodeBehavior

    scenario = Scenario(
        n=4, f=1, proposers=1, commands_per_proposer=40, seed=77,
        byzantine={3: NodeBehavior(skew=-500)},
    )
    result = run(scenario)
    assert result.reordered_ratio == 0.0
    assert result.uncommitted == 0
