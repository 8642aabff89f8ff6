"""Token-weighted funding vote: LPs vote in turn, then a director resolves.

Votes cost nothing; a VoteYes(k) only requires owning k governance tokens at
vote time. If the yes total meets the threshold when the director resolves,
the treasury pays the grant to the beneficiary.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..core import AgentId, AssetId, MoveDescriptor, skip_move
from .base import SELF_ADDR, GameState, Machine, balance, transferred

VOTE_YES = "VoteYes"
VOTE_NO = "VoteNo"
RESOLVE = "Resolve"

PROPOSAL_FUNDED = "proposal_funded"

YES = "yes"
NO = "no"
ABSTAIN = "abstain"


@dataclass(frozen=True)
class DaoState(GameState):
    yes_tokens: int = 0
    no_tokens: int = 0
    resolved: bool = False
    funded_proposal: bool = False


class DaoMachine(Machine):
    def __init__(
        self,
        lps: tuple[AgentId, ...],
        director: AgentId,
        beneficiary: AgentId,
        threshold: int,
        token_asset: AssetId,
        treasury_asset: AssetId,
        grant: int = 100,
        treasury: int = 100,
        vote_plan: dict[AgentId, str] | None = None,
    ):
        if not lps:
            raise ValueError("need at least one LP")
        if threshold <= 0:
            raise ValueError("threshold must be positive")
        self.lps = tuple(lps)
        self.director = director
        self.beneficiary = beneficiary
        self.threshold = threshold
        self.token_asset = token_asset
        self.treasury_asset = treasury_asset
        self.grant = grant
        self.treasury = treasury
        # how each compliant LP votes; default is yes with their full balance
        self.vote_plan = dict(vote_plan or {})

    def initial_state(self) -> DaoState:
        return DaoState(cursor=0, accounts={(SELF_ADDR, self.treasury_asset): self.treasury})

    def turn_table(self) -> tuple[AgentId, ...]:
        return self.lps + (self.director,)

    def move_names(self, state: GameState) -> frozenset[str]:
        if state.cursor < len(self.lps):
            return frozenset({VOTE_YES, VOTE_NO})
        return frozenset({RESOLVE})

    def _apply(self, state: DaoState, sender: AgentId, move: MoveDescriptor) -> DaoState:
        if move.name in (VOTE_YES, VOTE_NO):
            if state.cursor >= len(self.lps) or sender != self.lps[state.cursor]:
                return state
            if len(move.args) != 1 or not isinstance(move.args[0], int):
                return state
            k = move.args[0]
            if k < 0 or balance(state.accounts, sender, self.token_asset) < k:
                return state
            if move.name == VOTE_YES:
                return dataclasses.replace(state, yes_tokens=state.yes_tokens + k)
            return dataclasses.replace(state, no_tokens=state.no_tokens + k)
        if move.name == RESOLVE and move.args == ():
            if state.cursor != len(self.lps) or sender != self.director or state.resolved:
                return state
            state = dataclasses.replace(state, resolved=True)
            if state.yes_tokens >= self.threshold:
                accounts = transferred(
                    state.accounts, SELF_ADDR, self.beneficiary, self.treasury_asset, self.grant
                )
                if accounts is not None:
                    return dataclasses.replace(state, accounts=accounts, funded_proposal=True)
            return state
        return state

    def planned_move(self, state: DaoState, agent: AgentId, rnd: int) -> MoveDescriptor | None:
        pos = rnd - 1
        if 0 <= pos < len(self.lps):
            if agent != self.lps[pos]:
                return None
            stance = self.vote_plan.get(agent, YES)
            tokens = balance(state.accounts, agent, self.token_asset)
            if stance == ABSTAIN or tokens == 0:
                return skip_move()
            name = VOTE_YES if stance == YES else VOTE_NO
            return MoveDescriptor(name, (tokens,))
        if pos == len(self.lps) and agent == self.director:
            return MoveDescriptor(RESOLVE)
        return None

    def outcome_events(self, state: DaoState) -> frozenset[str]:
        return frozenset({PROPOSAL_FUNDED}) if state.funded_proposal else frozenset()

    def staked_agents(self) -> tuple[AgentId, ...]:
        return (self.beneficiary,)
