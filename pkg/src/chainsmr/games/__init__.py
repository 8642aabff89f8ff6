"""Example game machines and the machine interface."""

from .auction import AuctionMachine, AuctionState, commit_hash
from .base import (
    SELF_ADDR,
    Accounts,
    GameState,
    Machine,
    NotFinal,
    UtilityConfig,
    account_deltas,
    balance,
    credited,
    machine_util,
    transferred,
)
from .dao import DaoMachine, DaoState
from .swap import SwapMachine, SwapState

GAME_KINDS = ("swap", "dao", "auction")

__all__ = [
    "Accounts",
    "AuctionMachine",
    "AuctionState",
    "DaoMachine",
    "DaoState",
    "GAME_KINDS",
    "GameState",
    "Machine",
    "NotFinal",
    "SELF_ADDR",
    "SwapMachine",
    "SwapState",
    "UtilityConfig",
    "account_deltas",
    "balance",
    "commit_hash",
    "credited",
    "machine_util",
    "transferred",
]
