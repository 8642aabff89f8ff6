"""Synchronous network model: every message arrives within delta ticks.

Delays are per message, never zero, never more than delta, and there is no
loss or forgery. worst_case pins every delay to delta, uniform_random draws
from [1, delta] with a seeded generator, scripted replays configured delays.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import AgentId, AssetId, Tick

WORST_CASE = "worst_case"
UNIFORM_RANDOM = "uniform_random"
SCRIPTED = "scripted"

MODES = (WORST_CASE, UNIFORM_RANDOM, SCRIPTED)


@dataclass(frozen=True)
class DelayRule:
    """First matching rule wins; None fields match anything."""

    delay: Tick
    agent: AgentId | None = None
    replica: AssetId | None = None
    kind: str | None = None
    round: int | None = None

    def matches(self, agent: AgentId, replica: AssetId, kind: str, rnd: int | None) -> bool:
        return (
            (self.agent is None or self.agent == agent)
            and (self.replica is None or self.replica == replica)
            and (self.kind is None or self.kind == kind)
            and (self.round is None or self.round == rnd)
        )


@dataclass
class NetworkPolicy:
    mode: str
    delta: Tick
    seed: int = 0
    default: Tick | None = None
    rules: tuple[DelayRule, ...] = ()
    _rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown network mode {self.mode!r}")
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        for rule in self.rules:
            self._check(rule.delay)
        if self.default is not None:
            self._check(self.default)
        self._rng = random.Random(self.seed)

    def _check(self, delay: Tick) -> None:
        if not 1 <= delay <= self.delta:
            raise ValueError(f"delay {delay} outside [1, {self.delta}]")

    def delay(self, agent: AgentId, replica: AssetId, kind: str, rnd: int | None = None) -> Tick:
        if self.mode == WORST_CASE:
            return self.delta
        if self.mode == UNIFORM_RANDOM:
            return self._rng.randint(1, self.delta)
        for rule in self.rules:
            if rule.matches(agent, replica, kind, rnd):
                return rule.delay
        return self.default if self.default is not None else self.delta
