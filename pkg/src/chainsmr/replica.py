"""The per-asset replica: a passive, trusted automaton driven by agent calls.

Each replica escrows exactly one asset, holds its own copy of the game machine,
and never talks to other replicas. Everything it learns arrives through five
entry points (initialize, receive, top_up, defund, redeem) plus deliver(),
the poll that resolves rounds. Cross-replica agreement is the agents' job.

In pessimistic mode a round resolves only once its full challenge window of
n*delta ticks has passed. In optimistic mode a round executes as soon as a
unique live request from the enabled agent is buffered; the window stays open,
and a conflicting request arriving inside it rolls the round back to Skip and
replays the rounds after it from the buffer.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

from .core import (
    AgentId,
    AssetId,
    PathSignature,
    Request,
    SignatureProvider,
    Tick,
    age,
    is_ready,
    round_start_time,
    skip_move,
    verify_path_signature,
)
from .games.base import SELF_ADDR, GameState, Machine, balance

PESSIMISTIC = "pessimistic"
OPTIMISTIC = "optimistic"


class InvariantViolation(AssertionError):
    """The escrow no longer covers the short accounts; a bookkeeping bug."""


class Replica:
    def __init__(
        self,
        asset: AssetId,
        machine: Machine,
        agents: tuple[AgentId, ...],
        delta: Tick,
        provider: SignatureProvider,
        mode: str = PESSIMISTIC,
        premium: dict[AssetId, int] | None = None,
        leader: AgentId | None = None,
        long_balances: dict[AgentId, int] | None = None,
        emit: Callable[..., None] | None = None,
    ):
        if mode not in (PESSIMISTIC, OPTIMISTIC):
            raise ValueError(f"unknown mode {mode!r}")
        self.asset = asset
        self.machine = machine
        self.agents = tuple(agents)
        self.n = len(agents)
        self.delta = delta
        self.provider = provider
        self.mode = mode
        self.premium = dict(premium or {})
        self.leader = leader
        self.emit = emit or (lambda **kw: None)

        self.state: GameState = machine.initial_state()
        # the machine's own pre-escrowed holdings back its Self rows
        self.long: dict[AgentId, int] = {
            SELF_ADDR: balance(self.state.accounts, SELF_ADDR, asset)
        }
        for a in self.agents:
            self.long[a] = (long_balances or {}).get(a, 0)
        self.funded: dict[AgentId, bool] = {a: False for a in self.agents}
        self.deposits: dict[AgentId, int] = {a: 0 for a in self.agents}
        self.slash_done: dict[AgentId, bool] = {a: False for a in self.agents}

        self.buffer: dict[AgentId, dict[Request, PathSignature]] = {a: {} for a in self.agents}
        self.buffer_log: list[tuple[Tick, PathSignature]] = []

        # decisions[r-1] is the applied request for round r, or None for Skip
        self.decisions: list[Request | None] = []
        self.snapshots: dict[int, GameState] = {1: self.state}
        self.start_times: dict[int, Tick] = {1: round_start_time(1, self.n, delta)}
        self.decided_at: dict[int, Tick] = {}

    # ----- inspection ---------------------------------------------------

    @property
    def current_round(self) -> int:
        return len(self.decisions) + 1

    def is_final(self) -> bool:
        return self.machine.is_final(self.state)

    def round_start(self, rnd: int) -> Tick | None:
        if self.mode == PESSIMISTIC:
            return round_start_time(rnd, self.n, self.delta)
        return self.start_times.get(rnd)

    def window_close(self, rnd: int) -> Tick | None:
        start = self.round_start(rnd)
        return None if start is None else start + self.n * self.delta

    def settled(self, now: Tick) -> bool:
        """Final, with every decided round's challenge window closed."""
        if not self.is_final():
            return False
        return all(now > self.window_close(r) for r in range(1, len(self.decisions) + 1))

    def completion_tick(self) -> Tick | None:
        """Close of the last decided round's window: when the outcome froze."""
        if not self.is_final():
            return None
        return max(self.window_close(r) for r in range(1, len(self.decisions) + 1))

    def account_row(self, addr: AgentId, asset: AssetId) -> int:
        return balance(self.state.accounts, addr, asset)

    def applied_log(self) -> list[dict]:
        log = []
        for i, req in enumerate(self.decisions):
            if req is None:
                log.append({"round": i + 1, "kind": "skip"})
            else:
                log.append(
                    {
                        "round": i + 1,
                        "kind": "move",
                        "agent": req.agent,
                        "move": req.move.name,
                        "args": _args_payload(req.move.args),
                    }
                )
        return log

    def check_invariant(self) -> None:
        """Escrow covers shorts exactly: long(Self) equals the sum of every
        address's own-asset row, and nothing is negative."""
        total = sum(
            amt for (addr, asset), amt in self.state.accounts.items() if asset == self.asset
        )
        if self.long[SELF_ADDR] != total:
            raise InvariantViolation(
                f"replica {self.asset}: long(Self)={self.long[SELF_ADDR]} != shorts {total}"
            )
        for addr, amt in self.long.items():
            if amt < 0:
                raise InvariantViolation(f"replica {self.asset}: negative long for {addr}")
        for key, amt in self.state.accounts.items():
            if amt < 0:
                raise InvariantViolation(f"replica {self.asset}: negative short row {key}")
        for a, amt in self.deposits.items():
            if amt < 0:
                raise InvariantViolation(f"replica {self.asset}: negative deposit for {a}")

    # ----- entry points -------------------------------------------------

    def initialize(self, sender: AgentId, fund: dict[AssetId, int], now: Tick) -> bool:
        """Escrow the sender's stake during the funding window.

        The own-asset amount (plus the premium deposit, if any) moves from the
        sender's long account into escrow; amounts claimed for other assets are
        recorded at face value. Failure is a recorded non-event.
        """
        if sender not in self.funded or self.funded[sender]:
            return False
        if now > self.delta or any(v < 0 for v in fund.values()):
            self.emit(kind="fund", agent=sender, ok=False, fund=_fund_payload(fund))
            return False
        own = fund.get(self.asset, 0)
        deposit = self.premium.get(self.asset, 0)
        if self.long[sender] < own + deposit:
            self.emit(kind="fund", agent=sender, ok=False, fund=_fund_payload(fund))
            return False
        self.long[sender] -= own + deposit
        self.long[SELF_ADDR] += own
        self.deposits[sender] += deposit
        accounts = dict(self.state.accounts)
        for asset_id, amount in fund.items():
            accounts[(sender, asset_id)] = amount
        if (sender, self.asset) not in accounts:
            accounts[(sender, self.asset)] = 0
        self.state = _with_accounts(self.state, accounts)
        self.funded[sender] = True
        self.emit(kind="fund", agent=sender, ok=True, fund=_fund_payload(fund))
        return True

    def receive(self, ps: PathSignature, now: Tick) -> bool:
        """Buffer a wrapped request if well-formed, live, and from a funded
        agent; duplicates by request identity keep their first path."""
        req = ps.request
        if req.agent not in self.funded or not self.funded[req.agent]:
            return False
        if req.round > self.machine.total_rounds():
            return False
        if not verify_path_signature(self.provider, ps):
            return False
        start = self.round_start(req.round)
        if start is not None and age(now, start) > len(ps.path) * self.delta:
            return False
        if req in self.buffer[req.agent]:
            return False
        self.buffer[req.agent][req] = ps
        self.buffer_log.append((now, ps))
        self.emit(
            kind="buffer",
            agent=req.agent,
            round=req.round,
            move=req.move.name,
            args=_args_payload(req.move.args),
            path=list(ps.path),
        )
        if self.mode == OPTIMISTIC:
            self._maybe_rollback(req, now)
        return True

    def deliver(self, now: Tick) -> None:
        """Resolve as many rounds as the clock (and, optimistically, the
        buffer) allows. Idempotent; any caller may wake the replica."""
        while not self.is_final():
            rnd = self.current_round
            start = self.round_start(rnd)
            if start is None:  # optimistic round not begun; cannot happen for current
                start = self.start_times.setdefault(rnd, now)
            candidates = self._distinct_enabled_requests(rnd)
            legal = [r for r in candidates if r.move.name in self.machine.moves(self.state)]
            overdue = is_ready(now, start, self.n, self.delta)
            if self.mode == OPTIMISTIC and len(legal) == 1:
                # a unique legal buffered request executes without waiting
                self._decide(legal[0], now)
                continue
            if overdue and len(legal) == 1:
                self._decide(legal[0], now)
                continue
            if overdue:
                self._decide(None, now)
                if len(candidates) != 1:
                    self._slash(self.machine.turn_table()[rnd - 1], now)
                continue
            return

    def top_up(self, sender: AgentId, fund: dict[AssetId, int], now: Tick) -> bool:
        """Add to the sender's escrow mid-run. A claim the long account cannot
        cover freezes the sender instead (funded := false)."""
        if sender not in self.funded or not self.funded[sender]:
            return False
        if any(v < 0 for v in fund.values()):
            return False
        own = fund.get(self.asset, 0)
        if self.long[sender] < own:
            self.funded[sender] = False
            self.emit(kind="topup", agent=sender, ok=False, fund=_fund_payload(fund))
            return False
        self.long[sender] -= own
        self.long[SELF_ADDR] += own
        accounts = dict(self.state.accounts)
        for asset_id, amount in fund.items():
            accounts[(sender, asset_id)] = accounts.get((sender, asset_id), 0) + amount
        self.state = _with_accounts(self.state, accounts)
        self.emit(kind="topup", agent=sender, ok=True, fund=_fund_payload(fund))
        return True

    def defund(self, sender: AgentId, votes: tuple[AgentId, ...], now: Tick) -> bool:
        """Leader-only: freeze the voted agents and forfeit their deposits."""
        if self.leader is None or sender != self.leader:
            return False
        hit = [a for a in sorted(set(votes)) if a in self.funded]
        for a in hit:
            self.funded[a] = False
        self.emit(kind="defund", by=sender, votes=hit)
        for a in hit:
            self._slash(a, now)
        return True

    def redeem(self, sender: AgentId, now: Tick) -> bool:
        """Pay out the sender's own-asset short balance and return their
        deposit; freezes them. A second redeem is a no-op."""
        if sender not in self.funded or not self.funded[sender]:
            return False
        amount = self.account_row(sender, self.asset)
        if self.long[SELF_ADDR] < amount:
            raise InvariantViolation(
                f"replica {self.asset}: escrow cannot cover redeem of {amount}"
            )
        deposit = self.deposits[sender]
        self.deposits[sender] = 0
        self.long[SELF_ADDR] -= amount
        self.long[sender] += amount + deposit
        accounts = dict(self.state.accounts)
        accounts[(sender, self.asset)] = 0
        self.state = _with_accounts(self.state, accounts)
        self.funded[sender] = False
        self.emit(kind="redeem", agent=sender, amount=amount, deposit=deposit)
        return True

    # ----- internals ----------------------------------------------------

    def _distinct_enabled_requests(self, rnd: int) -> list[Request]:
        agent = self.machine.turn_table()[rnd - 1]
        reqs = [r for r in self.buffer[agent] if r.round == rnd]
        reqs.sort(key=lambda r: r.move.encode())
        return reqs

    def _decide(self, req: Request | None, now: Tick) -> None:
        rnd = self.current_round
        self.start_times.setdefault(rnd, round_start_time(rnd, self.n, self.delta))
        self.snapshots[rnd] = self.state
        if req is None:
            self.state = self.machine.apply(self.state, None, skip_move())
            self.emit(kind="skip", round=rnd, round_start=self.start_times[rnd])
        else:
            self.state = self.machine.apply(self.state, req.agent, req.move)
            self.emit(
                kind="execute",
                round=rnd,
                round_start=self.start_times[rnd],
                agent=req.agent,
                move=req.move.name,
                args=_args_payload(req.move.args),
            )
        self.decisions.append(req)
        self.decided_at[rnd] = now
        if not self.is_final():
            nxt = rnd + 1
            if self.mode == OPTIMISTIC:
                # keep the first stamp on replays: windows never restart
                self.start_times.setdefault(nxt, max(now, self.start_times[rnd]))
            else:
                self.start_times[nxt] = round_start_time(nxt, self.n, self.delta)

    def _maybe_rollback(self, req: Request, now: Tick) -> None:
        """A distinct legal request for an executed round, arriving inside the
        round's window, turns that round into Skip and replays the rest."""
        rnd = req.round
        if rnd > len(self.decisions):
            return
        decided = self.decisions[rnd - 1]
        if decided is None or req == decided or req.agent != decided.agent:
            return
        if now > self.window_close(rnd):
            return
        snapshot = self.snapshots[rnd]
        if req.move.name not in self.machine.moves(snapshot):
            return
        self.emit(kind="rollback", round=rnd, agent=req.agent)
        self.state = snapshot
        del self.decisions[rnd - 1 :]
        for r in list(self.decided_at):
            if r >= rnd:
                del self.decided_at[r]
        self._decide(None, now)  # the contested round becomes Skip
        self.deliver(now)  # replay later rounds from the buffer

    def _slash(self, offender: AgentId, now: Tick) -> None:
        """Forfeit the offender's deposit to the remaining funded agents.

        The local pot (own asset) actually moves; the same split is mirrored
        into the machine's view rows for every other premium asset, which all
        replicas compute identically from shared configuration.
        """
        if not self.premium or self.slash_done.get(offender, True):
            return
        self.slash_done[offender] = True
        victims = [a for a in self.agents if a != offender and self.funded[a]]
        if not victims:
            return
        pot = self.deposits[offender]
        self.deposits[offender] = 0
        self.long[SELF_ADDR] += pot
        accounts = dict(self.state.accounts)
        for asset_id in sorted(set(self.premium) | {self.asset}):
            amount = pot if asset_id == self.asset else self.premium.get(asset_id, 0)
            if amount <= 0:
                continue
            share, remainder = divmod(amount, len(victims))
            for v in victims:
                extra = remainder if v == min(victims) else 0
                accounts[(v, asset_id)] = accounts.get((v, asset_id), 0) + share + extra
        self.state = _with_accounts(self.state, accounts)
        self.emit(kind="slash", offender=offender, amount=pot, victims=victims)


def _with_accounts(state: GameState, accounts) -> GameState:
    return dataclasses.replace(state, accounts=accounts)


def _fund_payload(fund: dict[AssetId, int]) -> dict[str, int]:
    return {str(k): v for k, v in sorted(fund.items())}


def _args_payload(args: tuple) -> list:
    return [a.hex() if isinstance(a, bytes) else a for a in args]
