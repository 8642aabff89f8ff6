"""Agent runtime: the untrusted front end driving the replicas.

Each agent owns a strategy and a signing key. Per tick it may initialize,
cross-check account tables, issue its turn move, run the top-up round
protocol, relay everyone else's requests, and finally redeem once every
replica has settled. All of it goes over the delayed message network; the
only synchronous surface is reading replica state, which stands in for
querying a machine you can reach but not rush.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .core import (
    AgentId,
    AssetId,
    PathSignature,
    Request,
    SignatureProvider,
    Tick,
    extend_path,
    sign_request,
)
from .games.base import Machine
from .replica import Replica
from .strategies import Strategy

# message kinds understood by the engine dispatcher
MSG_INITIALIZE = "initialize"
MSG_SEND = "send"
MSG_TOPUP = "topup"
MSG_DEFUND = "defund"
MSG_REDEEM = "redeem"

SendFn = Callable[[AgentId, str, AssetId, object, int | None], None]
EmitFn = Callable[..., None]


@dataclass
class AgentRuntime:
    agent_id: AgentId
    strategy: Strategy
    machine: Machine
    replicas: dict[AssetId, Replica]
    provider: SignatureProvider
    send: SendFn
    emit: EmitFn
    # all agents' agreed funding, for the post-initialization cross-check
    expected_funding: dict[AgentId, dict[AssetId, int]]
    delta: int
    n_agents: int
    # agreed funding after the top-up round; the leader's defund rule
    expected_totals: dict[AgentId, dict[AssetId, int]] | None = None
    topup_plan: dict[AssetId, int] | None = None
    topup_round: int | None = None
    verified_topup: bool = False
    leader: AgentId | None = None
    funding_check: str = "exact"  # or "min"
    underfunded_policy: str = "abort"  # or "continue"

    halted: bool = field(default=False, init=False)
    redeemed: bool = field(default=False, init=False)
    issued_rounds: set[int] = field(default_factory=set, init=False)
    topup_sent: bool = field(default=False, init=False)
    defund_sent: bool = field(default=False, init=False)
    topup_verified: bool = field(default=False, init=False)
    _seen: set[Request] = field(default_factory=set, init=False)
    _cursors: dict[AssetId, int] = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.replica_ids: tuple[AssetId, ...] = tuple(sorted(self.replicas))
        for asset in self.replica_ids:
            self._cursors[asset] = 0
        table = self.machine.turn_table()
        self._my_rounds = tuple(r for r in range(1, len(table) + 1) if table[r - 1] == self.agent_id)

    # -- per-tick actions (engine phase 3) --------------------------------

    def step(self, now: Tick) -> None:
        if self.halted:
            return
        if now == 0:
            self._initialize(now)
        if now == self.delta and self.strategy.verifies:
            self._post_funding_check(now)
        if self.topup_round is not None:
            self._topup_protocol(now)
        self._maybe_issue_turn(now)
        self._maybe_redeem(now)

    def _initialize(self, now: Tick) -> None:
        fund = self.strategy.initial_fund(self)
        for asset in self.replica_ids:
            self.send(self.agent_id, MSG_INITIALIZE, asset, {"fund": dict(fund)}, None)

    def _post_funding_check(self, now: Tick) -> None:
        if not self.verify_accounts():
            self._abort(now, "inconsistent_accounts")
            return
        if not self._funding_matches():
            if self.underfunded_policy == "abort":
                self._abort(now, "underfunded")
            # "continue": play on with whoever showed up

    def _abort(self, now: Tick, reason: str) -> None:
        self.emit(kind="halt", agent=self.agent_id, reason=reason)
        if self.strategy.redeems:
            self._send_redeems()
        self.halted = True

    # -- account verification ---------------------------------------------

    def verify_accounts(self) -> bool:
        """True iff every replica tells the same story about every agent in
        scope. Scope: funded at at least one replica. Compared per replica:
        the escrow row for that replica's own asset, plus the funded flag."""
        replicas = [self.replicas[a] for a in self.replica_ids]
        scope = set()
        for rep in replicas:
            scope.update(q for q in rep.agents if rep.funded[q])
        for q in sorted(scope):
            flags = {rep.funded[q] for rep in replicas}
            if len(flags) != 1:
                return False
            for rep in replicas:
                rows = {other.account_row(q, rep.asset) for other in replicas}
                if len(rows) != 1:
                    return False
        return True

    def _funding_matches(self) -> bool:
        one = self.replicas[self.replica_ids[0]]
        for q in one.agents:
            expected = self.expected_funding.get(q, {})
            for asset in self.replica_ids:
                want = expected.get(asset, 0)
                got = self.replicas[asset].account_row(q, asset)
                if self.funding_check == "min":
                    if got < want:
                        return False
                elif got != want:
                    return False
        return True

    # -- game moves ---------------------------------------------------------

    def _maybe_issue_turn(self, now: Tick) -> None:
        """Issue the planned move for each of my rounds at its start tick.

        Round starts are known up front in pessimistic mode, so the request
        goes out the moment the round opens (a path of length 1 stays live
        for delta ticks, exactly the direct delivery bound). In optimistic
        mode starts drift per replica; keying the issue to the earliest
        observed start keeps every direct copy inside the window, because
        a replica that has not opened the round yet clamps its age to zero."""
        reps = [self.replicas[r] for r in self.replica_ids]
        for rnd in self._my_rounds:
            if rnd in self.issued_rounds:
                continue
            if all(rep.current_round > rnd for rep in reps):
                self.issued_rounds.add(rnd)  # decided everywhere without us
                continue
            starts = [s for rep in reps if (s := rep.round_start(rnd)) is not None]
            if not starts or now < min(starts):
                break
            self.issued_rounds.add(rnd)
            lead = max(reps, key=lambda rep: rep.current_round)
            move = self.strategy.turn_move(self, lead.state, rnd)
            if move is None:
                continue
            for targets, mv in self.strategy.send_plan(self, move, rnd):
                req = Request(agent=self.agent_id, move=mv, round=rnd)
                ps = sign_request(self.provider, req, self.agent_id)
                for asset in targets:
                    self.send(self.agent_id, MSG_SEND, asset, ps, rnd)

    # -- top-up round --------------------------------------------------------

    def _topup_protocol(self, now: Tick) -> None:
        rep = self.replicas[self.replica_ids[0]]
        rnd = self.topup_round
        start = rep.round_start(rnd)
        if start is None or now < start:
            return
        if not self.topup_sent and rep.current_round == rnd and now >= start + 1:
            self.topup_sent = True
            fund = self.strategy.topup_fund(self, rnd)
            if fund:
                for asset in self.replica_ids:
                    self.send(self.agent_id, MSG_TOPUP, asset, {"fund": dict(fund)}, rnd)
        if (
            self.verified_topup
            and self.leader == self.agent_id
            and not self.defund_sent
            and now == start + self.delta + 2
        ):
            self.defund_sent = True
            votes = tuple(
                q for q in rep.agents if q != self.agent_id and self._should_defund(q)
            )
            if votes:
                for asset in self.replica_ids:
                    self.send(self.agent_id, MSG_DEFUND, asset, {"votes": votes}, rnd)
        if (
            self.verified_topup
            and self.strategy.verifies
            and not self.topup_verified
            and now == start + self.n_agents * self.delta
        ):
            self.topup_verified = True
            if not self.verify_accounts():
                self._abort(now, "inconsistent_accounts")

    def _should_defund(self, q: AgentId) -> bool:
        """The leader votes an agent out when the replicas disagree about it
        or its escrow falls short of the agreed post-top-up amount: an
        uncoverable claim trips the first test, quiet underfunding the
        second, and both offenses forfeit the same deposit."""
        if self._rows_diverge(q):
            return True
        totals = (self.expected_totals or {}).get(q, {})
        for asset in self.replica_ids:
            if self.replicas[asset].account_row(q, asset) < totals.get(asset, 0):
                return True
        return False

    def _rows_diverge(self, q: AgentId) -> bool:
        replicas = [self.replicas[a] for a in self.replica_ids]
        if len({rep.funded[q] for rep in replicas}) != 1:
            return True
        for rep in replicas:
            rows = {other.account_row(q, rep.asset) for other in replicas}
            if len(rows) != 1:
                return True
        return False

    # -- redeem ---------------------------------------------------------------

    def _maybe_redeem(self, now: Tick) -> None:
        if not self.strategy.redeems or self.redeemed:
            return
        if all(self.replicas[a].settled(now) for a in self.replica_ids):
            self._send_redeems()
            self.emit(kind="halt", agent=self.agent_id, reason="settled")
            self.halted = True

    def _send_redeems(self) -> None:
        self.redeemed = True
        for asset in self.replica_ids:
            self.send(self.agent_id, MSG_REDEEM, asset, {}, None)

    # -- relaying (engine phase 4) ----------------------------------------------

    def relay_step(self, now: Tick) -> None:
        if self.halted:
            return
        if self.strategy.relays:
            for asset in self.replica_ids:
                log = self.replicas[asset].buffer_log
                cursor = self._cursors[asset]
                while cursor < len(log):
                    _, ps = log[cursor]
                    cursor += 1
                    self._relay_one(ps)
                self._cursors[asset] = cursor
        # wake the replicas: relayed copies just sent will arrive later, but
        # anything already due was delivered in phase 1 of this tick
        for asset in self.replica_ids:
            self.replicas[asset].deliver(now)

    def _relay_one(self, ps: PathSignature) -> None:
        req = ps.request
        if req in self._seen:
            return
        self._seen.add(req)
        if self.agent_id in ps.path:
            return
        extended = extend_path(self.provider, ps, self.agent_id)
        for asset in self.replica_ids:
            self.send(self.agent_id, MSG_SEND, asset, extended, req.round)
