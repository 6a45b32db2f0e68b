"""Scenario configuration: a flat key-value text format and its parser.

Example scenario file::

    # adversary sweep point
    n = 16
    f = 5
    proposers = 2
    commands_per_proposer = 150
    batch_size = 4
    delta_o = 50
    latency = 40..150          # or "lan" (1..5) / "wan" (40..150)
    propose_interval = 50
    seed = 42
    strategy = anchor          # anchor | timestamp | follow
    byzantine = 11:shuffle+skew:-40, 12:silent
    max_sim_ms = 600000

``strategy = follow`` is the manipulation control: every node adopts the
first Byzantine node's declared partial order as the total order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

ANCHOR = "anchor"
TIMESTAMP = "timestamp"
FOLLOW = "follow"

STRATEGIES = (ANCHOR, TIMESTAMP, FOLLOW)

LATENCY_PROFILES = {
    "lan": (1, 5),
    "wan": (40, 150),
}


class ScenarioError(ValueError):
    """Malformed scenario configuration."""


@dataclass(frozen=True, slots=True)
class NodeBehavior:
    """Byzantine behavior flags for one node."""

    shuffle: bool = False
    reverse: bool = False
    silent: bool = False
    skew: int = 0

    @property
    def is_byzantine(self) -> bool:
        return self.shuffle or self.reverse or self.silent or self.skew != 0

    def tag(self) -> str:
        parts = []
        if self.shuffle:
            parts.append("shuffle")
        if self.reverse:
            parts.append("reverse")
        if self.silent:
            parts.append("silent")
        if self.skew:
            parts.append(f"skew:{self.skew}")
        return "+".join(parts) if parts else "honest"

    @classmethod
    def parse(cls, spec: str) -> "NodeBehavior":
        shuffle = reverse = silent = False
        skew = 0
        for part in spec.split("+"):
            part = part.strip().lower()
            if part == "shuffle":
                shuffle = True
            elif part == "reverse":
                reverse = True
            elif part == "silent":
                silent = True
            elif part.startswith("skew:"):
                try:
                    skew = int(part.split(":", 1)[1])
                except ValueError as exc:
                    raise ScenarioError(f"bad skew delta in {spec!r}") from exc
            else:
                raise ScenarioError(f"unknown behavior {part!r}")
        return cls(shuffle, reverse, silent, skew)


HONEST = NodeBehavior()


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation run; the seed fixes everything."""

    n: int = 4
    f: int = 1
    proposers: int = 1
    commands_per_proposer: int = 50
    batch_size: int = 4
    delta_o: int = 50
    latency: tuple[int, int] = (1, 5)
    propose_interval: int = 50
    seed: int = 1
    strategy: str = ANCHOR
    byzantine: dict[int, NodeBehavior] = field(default_factory=dict)
    max_sim_ms: int = 600_000
    resend_ms: int = 2_000
    auth_scheme: str = "hmac"

    def __post_init__(self):
        if self.n != 3 * self.f + 1:
            raise ScenarioError(f"n must equal 3f+1 (n={self.n}, f={self.f})")
        if self.strategy not in STRATEGIES:
            raise ScenarioError(f"unknown strategy {self.strategy!r}")
        if len(self.byzantine) > self.n:
            raise ScenarioError("more Byzantine entries than nodes")
        for node_id, behavior in self.byzantine.items():
            if not 0 <= node_id < self.n:
                raise ScenarioError(f"Byzantine id {node_id} out of range")
            if not behavior.is_byzantine:
                raise ScenarioError(f"node {node_id} tagged Byzantine but honest")
        if self.strategy == FOLLOW and not self.byzantine:
            raise ScenarioError("follow strategy needs at least one Byzantine node")
        if self.latency[0] < 0 or self.latency[1] < self.latency[0]:
            raise ScenarioError(f"bad latency range {self.latency}")
        if self.proposers < 1 or self.commands_per_proposer < 0:
            raise ScenarioError("need at least one proposer and >= 0 commands")
        if self.delta_o < 1:
            raise ScenarioError("delta_o must be >= 1 ms")

    def behavior(self, node_id: int) -> NodeBehavior:
        return self.byzantine.get(node_id, HONEST)

    def honest_ids(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.byzantine]

    def with_overrides(self, **kwargs) -> "Scenario":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "proposers": self.proposers,
            "commands_per_proposer": self.commands_per_proposer,
            "batch_size": self.batch_size,
            "delta_o": self.delta_o,
            "latency": list(self.latency),
            "propose_interval": self.propose_interval,
            "seed": self.seed,
            "strategy": self.strategy,
            "byzantine": {str(k): self.byzantine[k].tag() for k in sorted(self.byzantine)},
            "max_sim_ms": self.max_sim_ms,
            "resend_ms": self.resend_ms,
            "auth_scheme": self.auth_scheme,
        }

    def to_text(self) -> str:
        lines = [
            f"n = {self.n}",
            f"f = {self.f}",
            f"proposers = {self.proposers}",
            f"commands_per_proposer = {self.commands_per_proposer}",
            f"batch_size = {self.batch_size}",
            f"delta_o = {self.delta_o}",
            f"latency = {self.latency[0]}..{self.latency[1]}",
            f"propose_interval = {self.propose_interval}",
            f"seed = {self.seed}",
            f"strategy = {self.strategy}",
            f"max_sim_ms = {self.max_sim_ms}",
            f"resend_ms = {self.resend_ms}",
            f"auth_scheme = {self.auth_scheme}",
        ]
        if self.byzantine:
            entry = ", ".join(
                f"{node}:{self.byzantine[node].tag()}" for node in sorted(self.byzantine)
            )
            lines.append(f"byzantine = {entry}")
        return "\n".join(lines) + "\n"


_INT_KEYS = {
    "n", "f", "proposers", "commands_per_proposer", "batch_size",
    "delta_o", "propose_interval", "seed", "max_sim_ms", "resend_ms",
}


def _parse_latency(value: str) -> tuple[int, int]:
    value = value.strip().lower()
    if value in LATENCY_PROFILES:
        return LATENCY_PROFILES[value]
    sep = ".." if ".." in value else ("-" if "-" in value else None)
    if sep is None:
        raise ScenarioError(f"bad latency spec {value!r}")
    lo, _, hi = value.partition(sep)
    try:
        return (int(lo), int(hi))
    except ValueError as exc:
        raise ScenarioError(f"bad latency spec {value!r}") from exc


def _parse_byzantine(value: str) -> dict[int, NodeBehavior]:
    out: dict[int, NodeBehavior] = {}
    value = value.strip()
    if not value or value.lower() == "none":
        return out
    for chunk in value.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        node_str, _, behavior_str = chunk.partition(":")
        try:
            node_id = int(node_str)
        except ValueError as exc:
            raise ScenarioError(f"bad Byzantine node id {node_str!r}") from exc
        if not behavior_str:
            raise ScenarioError(f"missing behavior for node {node_id}")
        if node_id in out:
            raise ScenarioError(f"duplicate Byzantine entry for node {node_id}")
        out[node_id] = NodeBehavior.parse(behavior_str)
    return out


def parse_scenario_text(text: str) -> Scenario:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().lower()
        value = value.strip()
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ScenarioError(f"line {lineno}: {key} must be an integer") from exc
        elif key == "latency":
            values["latency"] = _parse_latency(value)
        elif key == "strategy":
            values["strategy"] = value.lower()
        elif key == "byzantine":
            values["byzantine"] = _parse_byzantine(value)
        elif key == "auth_scheme":
            values["auth_scheme"] = value.lower()
        else:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
    try:
        return Scenario(**values)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return parse_scenario_text(handle.read())
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
