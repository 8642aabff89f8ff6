"""First-price sealed-bid auction for a single NFT held in escrow.

Phases, one turn per bidder each: seal a commitment, unseal it (escrowing the
bid), resolve. The highest unsealed bid wins, ties broken toward the larger
agent id. The winner's Resolve transfers the NFT; a loser's Resolve refunds
their escrowed bid. A commitment that is never unsealed simply forfeits.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from dataclasses import dataclass

from ..core import AgentId, AssetId, MoveDescriptor, skip_move
from .base import SELF_ADDR, GameState, Machine, balance, transferred

SEALED_BID = "SealedBid"
UNSEAL = "Unseal"
RESOLVE = "Resolve"


def commit_hash(bid: int, nonce: bytes) -> bytes:
    """SHA-256 over the canonical commitment payload: i64le bid, then the
    length-prefixed nonce."""
    payload = struct.pack("<q", bid) + struct.pack("<I", len(nonce)) + nonce
    return hashlib.sha256(payload).digest()


@dataclass(frozen=True)
class AuctionState(GameState):
    commits: tuple[tuple[AgentId, bytes], ...] = ()
    bids: tuple[tuple[AgentId, int], ...] = ()
    resolved: tuple[AgentId, ...] = ()


def _lookup(pairs: tuple, key: AgentId):
    for k, v in pairs:
        if k == key:
            return v
    return None


class AuctionMachine(Machine):
    def __init__(
        self,
        bidders: tuple[AgentId, ...],
        currency: AssetId,
        nft: AssetId,
        bid_plan: dict[AgentId, int],
        nonce_plan: dict[AgentId, bytes],
        topup_turn: bool = False,
    ):
        if len(bidders) < 2:
            raise ValueError("auction needs at least two bidders")
        self.bidders = tuple(bidders)
        self.currency = currency
        self.nft = nft
        self.bid_plan = dict(bid_plan)
        self.nonce_plan = dict(nonce_plan)
        # optional rest turn between seal and unseal phases, reserved for
        # funding top-ups; the prescribed move for it is Skip
        self.topup_turn = topup_turn

    def initial_state(self) -> AuctionState:
        return AuctionState(cursor=0, accounts={(SELF_ADDR, self.nft): 1})

    def turn_table(self) -> tuple[AgentId, ...]:
        table = list(self.bidders)
        if self.topup_turn:
            table.append(self.bidders[0])
        table.extend(self.bidders)  # unseal
        table.extend(self.bidders)  # resolve
        return tuple(table)

    def topup_round(self) -> int | None:
        """1-based round index of the rest turn, if configured."""
        return len(self.bidders) + 1 if self.topup_turn else None

    def _phase(self, cursor: int) -> str:
        k = len(self.bidders)
        if cursor < k:
            return "seal"
        if self.topup_turn:
            if cursor == k:
                return "rest"
            cursor -= 1
        if cursor < 2 * k:
            return "unseal"
        return "resolve"

    def move_names(self, state: GameState) -> frozenset[str]:
        phase = self._phase(state.cursor)
        if phase == "seal":
            return frozenset({SEALED_BID})
        if phase == "unseal":
            return frozenset({UNSEAL})
        if phase == "resolve":
            return frozenset({RESOLVE})
        return frozenset()

    def winner(self, state: AuctionState) -> AgentId | None:
        """Highest unsealed bid; ties go to the larger agent id."""
        if not state.bids:
            return None
        return max(state.bids, key=lambda kv: (kv[1], kv[0]))[0]

    def _apply(self, state: AuctionState, sender: AgentId, move: MoveDescriptor) -> AuctionState:
        table = self.turn_table()
        if sender != table[state.cursor]:
            return state
        phase = self._phase(state.cursor)
        if move.name == SEALED_BID and phase == "seal":
            if len(move.args) != 1 or not isinstance(move.args[0], bytes):
                return state
            if _lookup(state.commits, sender) is not None:
                return state
            return dataclasses.replace(state, commits=state.commits + ((sender, move.args[0]),))
        if move.name == UNSEAL and phase == "unseal":
            if (
                len(move.args) != 2
                or not isinstance(move.args[0], int)
                or not isinstance(move.args[1], bytes)
            ):
                return state
            bid, nonce = move.args
            commit = _lookup(state.commits, sender)
            if commit is None or commit != commit_hash(bid, nonce):
                return state
            if _lookup(state.bids, sender) is not None:
                return state
            accounts = transferred(state.accounts, sender, SELF_ADDR, self.currency, bid)
            if accounts is None:
                return state
            return dataclasses.replace(
                state, accounts=accounts, bids=state.bids + ((sender, bid),)
            )
        if move.name == RESOLVE and move.args == () and phase == "resolve":
            if sender in state.resolved:
                return state
            bid = _lookup(state.bids, sender)
            if sender == self.winner(state):
                accounts = transferred(state.accounts, SELF_ADDR, sender, self.nft, 1)
            elif bid is not None:
                accounts = transferred(state.accounts, SELF_ADDR, sender, self.currency, bid)
            else:
                accounts = state.accounts
            if accounts is None:
                accounts = state.accounts
            return dataclasses.replace(
                state, accounts=accounts, resolved=state.resolved + (sender,)
            )
        return state

    def planned_move(self, state: AuctionState, agent: AgentId, rnd: int) -> MoveDescriptor | None:
        pos = rnd - 1
        table = self.turn_table()
        if not 0 <= pos < len(table) or agent != table[pos]:
            return None
        phase = self._phase(pos)
        if phase == "rest" or agent not in self.bid_plan:
            return skip_move()
        bid = self.bid_plan[agent]
        nonce = self.nonce_plan[agent]
        if phase == "seal":
            return MoveDescriptor(SEALED_BID, (commit_hash(bid, nonce),))
        if phase == "unseal":
            if balance(state.accounts, agent, self.currency) < bid:
                return skip_move()
            return MoveDescriptor(UNSEAL, (bid, nonce))
        return MoveDescriptor(RESOLVE)

    def staked_agents(self) -> tuple[AgentId, ...]:
        if not self.bid_plan:
            return ()
        win = max(self.bid_plan.items(), key=lambda kv: (kv[1], kv[0]))[0]
        return (win,)
