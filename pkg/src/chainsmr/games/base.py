"""Turn-based game machines: the replicated programs that replicas execute.

A machine is a finite tree of turns. Each round has exactly one enabled agent,
Skip is always legal in a non-final state, and apply() is a pure function: a
move whose internal guards fail still advances the turn, it just has no other
effect. Account balances live inside the state and never go negative.
"""

from __future__ import annotations

import dataclasses
from abc import ABC, abstractmethod
from dataclasses import dataclass

from ..core import SKIP, AgentId, AssetId, MoveDescriptor

SELF_ADDR: AgentId = -1  # the machine's own escrow address


class NotFinal(Exception):
    """Utility is only defined at final states."""


Accounts = dict[tuple[AgentId, AssetId], int]


def balance(accounts: Accounts, addr: AgentId, asset: AssetId) -> int:
    return accounts.get((addr, asset), 0)


def credited(accounts: Accounts, addr: AgentId, asset: AssetId, amount: int) -> Accounts:
    """Copy of the account table with `amount` added (amount >= 0)."""
    if amount < 0:
        raise ValueError("credit amount must be non-negative")
    out = dict(accounts)
    out[(addr, asset)] = out.get((addr, asset), 0) + amount
    return out


def transferred(
    accounts: Accounts, frm: AgentId, to: AgentId, asset: AssetId, amount: int
) -> Accounts | None:
    """Copy with a transfer applied, or None when it would overdraw."""
    if amount < 0 or balance(accounts, frm, asset) < amount:
        return None
    out = dict(accounts)
    out[(frm, asset)] = out.get((frm, asset), 0) - amount
    out[(to, asset)] = out.get((to, asset), 0) + amount
    return out


@dataclass(frozen=True)
class GameState:
    """Common shape: a turn cursor plus the in-execution account table."""

    cursor: int
    accounts: Accounts


def account_deltas(initial: GameState, final: GameState, addr: AgentId) -> dict[AssetId, int]:
    assets = {asset for a, asset in initial.accounts} | {asset for a, asset in final.accounts}
    return {
        asset: balance(final.accounts, addr, asset) - balance(initial.accounts, addr, asset)
        for asset in sorted(assets)
    }


@dataclass(frozen=True)
class UtilityConfig:
    """Per-agent valuations in a common numeraire.

    valuations[agent][asset] prices one unit of the asset; event_values[agent]
    prices outcome events the machine reports (e.g. a funded proposal).
    """

    valuations: dict[AgentId, dict[AssetId, int]]
    event_values: dict[AgentId, dict[str, int]] = dataclasses.field(default_factory=dict)

    def value_of(self, agent: AgentId, deltas: dict[AssetId, int], events: frozenset[str]) -> int:
        vals = self.valuations.get(agent, {})
        total = sum(d * vals.get(asset, 0) for asset, d in deltas.items())
        evs = self.event_values.get(agent, {})
        total += sum(v for name, v in evs.items() if name in events)
        return total


class Machine(ABC):
    """One configured game instance: turn table, transition rule, payoffs."""

    @abstractmethod
    def initial_state(self) -> GameState: ...

    @abstractmethod
    def turn_table(self) -> tuple[AgentId, ...]:
        """The enabled agent for each round, in order."""

    @abstractmethod
    def move_names(self, state: GameState) -> frozenset[str]:
        """Legal move names at this state; always includes Skip when not final."""

    @abstractmethod
    def _apply(self, state: GameState, sender: AgentId, move: MoveDescriptor) -> GameState:
        """Game-specific effect of a non-Skip move. Guard failures return the
        input state unchanged; the caller advances the cursor either way."""

    @abstractmethod
    def planned_move(self, state: GameState, agent: AgentId, rnd: int) -> MoveDescriptor | None:
        """The prescribed move for `agent` in round `rnd` (1-based), or None
        when the round is not theirs. The plan is fixed per position so an
        agent can issue for a round the cursor has not reached yet; `state`
        only feeds balance-dependent arguments."""

    def total_rounds(self) -> int:
        return len(self.turn_table())

    def is_final(self, state: GameState) -> bool:
        return state.cursor >= len(self.turn_table())

    def enabled(self, state: GameState) -> AgentId | None:
        table = self.turn_table()
        if state.cursor >= len(table):
            return None
        return table[state.cursor]

    def moves(self, state: GameState) -> frozenset[str]:
        if self.is_final(state):
            return frozenset()
        return self.move_names(state) | {SKIP}

    def apply(self, state: GameState, sender: AgentId | None, move: MoveDescriptor) -> GameState:
        """Consume one round. Skip (or any failed guard) only advances the cursor."""
        if self.is_final(state):
            raise ValueError("machine is already final")
        if move.name != SKIP and sender is not None:
            state = self._apply(state, sender, move)
        return dataclasses.replace(state, cursor=state.cursor + 1)

    def compliant_move(self, state: GameState, agent: AgentId) -> MoveDescriptor | None:
        """The prescribed move for `agent` at the current turn, else None."""
        if self.is_final(state):
            return None
        return self.planned_move(state, agent, state.cursor + 1)

    def outcome_events(self, state: GameState) -> frozenset[str]:
        return frozenset()

    def staked_agents(self) -> tuple[AgentId, ...]:
        """Agents expected to profit in the all-compliant run."""
        return ()


def machine_util(
    machine: Machine,
    cfg: UtilityConfig,
    agent: AgentId,
    final: GameState,
    initial: GameState | None = None,
) -> int:
    """Payoff at a final state: valued balance deltas plus outcome events.

    `initial` is the funded starting state; it defaults to the machine's bare
    initial state (all agent balances zero).
    """
    if not machine.is_final(final):
        raise NotFinal("utility requested at a non-final state")
    if initial is None:
        initial = machine.initial_state()
    deltas = account_deltas(initial, final, agent)
    return cfg.value_of(agent, deltas, machine.outcome_events(final))
