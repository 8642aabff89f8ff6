"""Two-party atomic swap: each side agrees, then the first party completes."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..core import AgentId, AssetId, MoveDescriptor
from .base import Accounts, GameState, Machine, transferred

AGREE = "Agree"
COMPLETE = "Complete"


@dataclass(frozen=True)
class SwapState(GameState):
    agreed_a: bool = False
    agreed_b: bool = False
    all_done: bool = False


class SwapMachine(Machine):
    """party_a gives amount_a of asset_a for party_b's amount_b of asset_b.

    Turn order: Agree(party_a), Agree(party_b), Complete(party_a). A Complete
    before both agreements still ends the game, with no transfers.
    """

    def __init__(
        self,
        party_a: AgentId,
        party_b: AgentId,
        asset_a: AssetId,
        asset_b: AssetId,
        amount_a: int = 1,
        amount_b: int = 1,
    ):
        if party_a == party_b:
            raise ValueError("swap needs two distinct parties")
        self.party_a = party_a
        self.party_b = party_b
        self.asset_a = asset_a
        self.asset_b = asset_b
        self.amount_a = amount_a
        self.amount_b = amount_b

    def initial_state(self) -> SwapState:
        return SwapState(cursor=0, accounts={})

    def turn_table(self) -> tuple[AgentId, ...]:
        return (self.party_a, self.party_b, self.party_a)

    def move_names(self, state: GameState) -> frozenset[str]:
        return frozenset({AGREE} if state.cursor < 2 else {COMPLETE})

    def _apply(self, state: SwapState, sender: AgentId, move: MoveDescriptor) -> SwapState:
        if move.name == AGREE and move.args == ():
            if state.cursor == 0 and sender == self.party_a:
                return dataclasses.replace(state, agreed_a=True)
            if state.cursor == 1 and sender == self.party_b:
                return dataclasses.replace(state, agreed_b=True)
        elif move.name == COMPLETE and move.args == ():
            if state.cursor == 2 and sender == self.party_a:
                accounts: Accounts | None = state.accounts
                if state.agreed_a and state.agreed_b:
                    accounts = transferred(
                        accounts, self.party_a, self.party_b, self.asset_a, self.amount_a
                    )
                    if accounts is not None:
                        accounts = transferred(
                            accounts, self.party_b, self.party_a, self.asset_b, self.amount_b
                        )
                if accounts is None:  # either leg would overdraw: complete without transfers
                    accounts = state.accounts
                return dataclasses.replace(state, accounts=accounts, all_done=True)
        return state

    def planned_move(self, state: SwapState, agent: AgentId, rnd: int) -> MoveDescriptor | None:
        pos = rnd - 1
        table = self.turn_table()
        if not 0 <= pos < len(table) or agent != table[pos]:
            return None
        return MoveDescriptor(AGREE if pos < 2 else COMPLETE)

    def staked_agents(self) -> tuple[AgentId, ...]:
        return (self.party_a, self.party_b)
