"""Discrete-tick simulation engine.

Each tick runs four phases in a fixed order: (1) deliver every message due,
(2) poll deliver() on every replica, (3) let each agent act, (4) let each
agent relay and wake the replicas again. Messages travel through the network
policy; nothing else crosses the agent/replica boundary. Identical
configurations replay to byte-identical traces.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .agent import (
    MSG_DEFUND,
    MSG_INITIALIZE,
    MSG_REDEEM,
    MSG_SEND,
    MSG_TOPUP,
    AgentRuntime,
)
from .config import ScenarioConfig, parse_scenario
from .core import AgentId, AssetId, SignatureProvider, Tick, round_start_time
from .games.base import Machine
from .replica import Replica


@dataclass
class RunResult:
    config: ScenarioConfig
    machine: Machine
    replicas: dict[AssetId, Replica]
    agents: dict[AgentId, AgentRuntime]
    trace: list[dict]
    initial_long: dict[AssetId, dict[AgentId, int]]
    summary: dict = field(default_factory=dict)

    def header_extra(self) -> dict:
        cfg = self.config
        return {
            "name": cfg.name,
            "mode": cfg.mode,
            "delta": cfg.delta,
            "seed": cfg.seed,
            "agents": cfg.n_agents,
            "assets": list(cfg.asset_names),
        }


class Engine:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.machine = cfg.build_machine()
        self.network = cfg.build_network()
        self.provider = SignatureProvider()
        self.now: Tick = 0
        self.trace: list[dict] = []
        self.invariant_checks = 0
        self._queue: list = []
        self._seq = 0
        self._dirty: set[AssetId] = set()

        agent_ids = tuple(range(cfg.n_agents))
        self.replicas: dict[AssetId, Replica] = {}
        self.initial_long: dict[AssetId, dict[AgentId, int]] = {}
        for asset in range(len(cfg.asset_names)):
            long_balances = {i: spec.long.get(asset, 0) for i, spec in enumerate(cfg.agents)}
            self.initial_long[asset] = dict(long_balances)
            self.replicas[asset] = Replica(
                asset=asset,
                machine=self.machine,
                agents=agent_ids,
                delta=cfg.delta,
                provider=self.provider,
                mode=cfg.mode,
                premium=cfg.premium,
                leader=cfg.leader,
                long_balances=long_balances,
                emit=self._replica_emitter(asset),
            )

        strategies = cfg.build_strategies()
        topup_round = cfg.topup_round(self.machine)
        verified = bool(cfg.topup and cfg.topup.get("verified"))
        expected = cfg.expected_funding()
        totals = {
            i: {
                asset: expected[i].get(asset, 0) + (cfg.agents[i].topup or {}).get(asset, 0)
                for asset in set(expected[i]) | set(cfg.agents[i].topup or {})
            }
            for i in agent_ids
        }
        self.agents: dict[AgentId, AgentRuntime] = {}
        for i in agent_ids:
            self.agents[i] = AgentRuntime(
                agent_id=i,
                strategy=strategies[i],
                machine=self.machine,
                replicas=self.replicas,
                provider=self.provider,
                send=self._send,
                emit=self._agent_emitter(),
                expected_funding=expected,
                delta=cfg.delta,
                n_agents=cfg.n_agents,
                expected_totals=totals,
                topup_plan=cfg.agents[i].topup,
                topup_round=topup_round,
                verified_topup=verified,
                leader=cfg.leader,
                funding_check=cfg.funding_check,
                underfunded_policy=cfg.underfunded_policy,
            )

    # -- plumbing ----------------------------------------------------------

    def _replica_emitter(self, asset: AssetId):
        def emit(**fields):
            ev = {"tick": self.now, "replica": asset}
            ev.update(fields)
            self.trace.append(ev)
            self._dirty.add(asset)

        return emit

    def _agent_emitter(self):
        def emit(**fields):
            ev = {"tick": self.now}
            ev.update(fields)
            self.trace.append(ev)

        return emit

    def _send(self, sender: AgentId, kind: str, asset: AssetId, payload, rnd: int | None) -> None:
        delay = self.network.delay(sender, asset, kind, rnd)
        arrival = self.now + delay
        self._seq += 1
        heapq.heappush(self._queue, (arrival, self._seq, sender, kind, asset, payload, rnd))
        ev = {
            "tick": self.now,
            "kind": "send",
            "agent": sender,
            "replica": asset,
            "msg": kind,
            "arrival": arrival,
        }
        if rnd is not None:
            ev["round"] = rnd
        if kind == MSG_SEND:
            req = payload.request
            ev["origin"] = req.agent
            ev["move"] = req.move.name
            ev["args"] = [a.hex() if isinstance(a, bytes) else a for a in req.move.args]
            ev["path"] = list(payload.path)
        self.trace.append(ev)

    def _dispatch(self, sender: AgentId, kind: str, asset: AssetId, payload) -> None:
        rep = self.replicas[asset]
        if kind == MSG_INITIALIZE:
            rep.initialize(sender, payload["fund"], self.now)
        elif kind == MSG_SEND:
            rep.receive(payload, self.now)
        elif kind == MSG_TOPUP:
            rep.top_up(sender, payload["fund"], self.now)
        elif kind == MSG_DEFUND:
            rep.defund(sender, tuple(payload["votes"]), self.now)
        elif kind == MSG_REDEEM:
            rep.redeem(sender, self.now)
        else:
            raise ValueError(f"unknown message kind {kind!r}")

    def _check_dirty(self) -> None:
        for asset in sorted(self._dirty):
            self.replicas[asset].check_invariant()
            self.invariant_checks += 1
        self._dirty.clear()

    # -- main loop -----------------------------------------------------------

    def hard_cap(self) -> Tick:
        n, d = self.cfg.n_agents, self.cfg.delta
        return round_start_time(self.machine.total_rounds(), n, d) + 2 * n * d

    def _done(self, now: Tick) -> bool:
        if self._queue:
            return False
        if not all(rep.settled(now) for rep in self.replicas.values()):
            return False
        return all(a.halted for a in self.agents.values() if a.strategy.redeems)

    def run(self) -> RunResult:
        cap = self.hard_cap()
        agent_order = sorted(self.agents)
        replica_order = sorted(self.replicas)
        settled_tick = None
        for t in range(cap + 1):
            self.now = t
            while self._queue and self._queue[0][0] <= t:
                _, _, sender, kind, asset, payload, _ = heapq.heappop(self._queue)
                self._dispatch(sender, kind, asset, payload)
            self._check_dirty()
            for asset in replica_order:
                self.replicas[asset].deliver(t)
            self._check_dirty()
            for i in agent_order:
                self.agents[i].step(t)
            for i in agent_order:
                self.agents[i].relay_step(t)
            self._check_dirty()
            if self._done(t):
                settled_tick = t
                break
        else:
            self.trace.append(
                {"tick": cap, "kind": "check", "what": "hard_cap", "ok": False}
            )
        return self._result(settled_tick)

    # -- reporting --------------------------------------------------------------

    def _result(self, settled_tick: Tick | None) -> RunResult:
        cfg = self.cfg
        result = RunResult(
            config=cfg,
            machine=self.machine,
            replicas=self.replicas,
            agents=self.agents,
            trace=self.trace,
            initial_long=self.initial_long,
        )
        completion = None
        ticks = [rep.completion_tick() for rep in self.replicas.values()]
        if all(t is not None for t in ticks):
            completion = max(ticks)
        applied = {cfg.asset_name(a): self.replicas[a].applied_log() for a in sorted(self.replicas)}
        logs = list(applied.values())
        consistent = all(log == logs[0] for log in logs[1:])
        utility = cfg.utility_config(self.machine)
        utils = {}
        first = self.replicas[min(self.replicas)]
        events = (
            self.machine.outcome_events(first.state) if first.is_final() else frozenset()
        )
        for i in sorted(self.agents):
            deltas = {
                asset: self.replicas[asset].long[i] - self.initial_long[asset][i]
                for asset in sorted(self.replicas)
            }
            utils[str(i)] = utility.value_of(i, deltas, events)
        final_long = {
            cfg.asset_name(a): {str(addr): amt for addr, amt in sorted(rep.long.items())}
            for a, rep in sorted(self.replicas.items())
        }
        result.summary = {
            "name": cfg.name,
            "mode": cfg.mode,
            "seed": cfg.seed,
            "delta": cfg.delta,
            "agents": cfg.n_agents,
            "assets": list(cfg.asset_names),
            "settled_tick": settled_tick,
            "completion_tick": completion,
            "capped": settled_tick is None,
            "consistent": consistent,
            "applied": applied,
            "final_long": final_long,
            "utils": utils,
            "staked": list(cfg.staked(self.machine)),
            "compliant": list(cfg.compliant_agents()),
            "invariant_checks": self.invariant_checks,
        }
        return result


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    return Engine(cfg).run()


def run_dict(data: dict) -> RunResult:
    return run_scenario(parse_scenario(data))
