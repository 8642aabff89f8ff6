"""Property checkers: consistency, safety, liveness, fairness, timing, and
the optimistic/pessimistic comparison.

check_consistency works from a trace alone (so stored traces can be vetted);
the others take a completed run, which carries the trace, the configuration,
and final balances together. Every failed verdict names a concrete witness.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .config import ScenarioConfig
from .core import SKIP, round_start_time
from .replica import PESSIMISTIC


@dataclass
class Verdict:
    check: str
    passed: bool
    applicable: bool = True
    details: str = ""
    witness: dict | None = None

    @property
    def ok(self) -> bool:
        return self.passed or not self.applicable

    def as_dict(self) -> dict:
        out = {
            "check": self.check,
            "passed": self.passed,
            "applicable": self.applicable,
            "details": self.details,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def applied_logs_from_trace(trace: list[dict]) -> dict[int, list[dict]]:
    """Reconstruct each replica's final applied log from its decision events.

    A rollback event voids that round and everything after it; the replica
    then re-decides, so later events overwrite."""
    logs: dict[int, dict[int, dict]] = {}
    for ev in trace:
        kind = ev.get("kind")
        if kind not in ("execute", "skip", "rollback"):
            continue
        rep = ev["replica"]
        rnd = ev["round"]
        log = logs.setdefault(rep, {})
        if kind == "rollback":
            for r in [r for r in log if r >= rnd]:
                del log[r]
        elif kind == "execute":
            log[rnd] = {
                "round": rnd,
                "kind": "move",
                "agent": ev["agent"],
                "move": ev["move"],
                "args": list(ev.get("args", [])),
            }
        else:
            log[rnd] = {"round": rnd, "kind": "skip"}
    return {rep: [log[r] for r in sorted(log)] for rep, log in sorted(logs.items())}


def check_consistency(trace: list[dict]) -> Verdict:
    """All replicas agree on the applied log, entry by entry."""
    logs = applied_logs_from_trace(trace)
    if not logs:
        return Verdict("consistency", True, details="no decisions in trace")
    reps = sorted(logs)
    base = logs[reps[0]]
    for rep in reps[1:]:
        other = logs[rep]
        for i in range(max(len(base), len(other))):
            a = base[i] if i < len(base) else None
            b = other[i] if i < len(other) else None
            if a != b:
                return Verdict(
                    "consistency",
                    False,
                    details=f"replica {reps[0]} and replica {rep} disagree at round {i + 1}",
                    witness={"round": i + 1, "replica_a": reps[0], "entry_a": a, "replica_b": rep, "entry_b": b},
                )
    return Verdict(
        "consistency", True, details=f"{len(reps)} replicas agree on {len(base)} rounds"
    )


def check_safety(result) -> Verdict:
    """No compliant agent ends worse off than it started."""
    utils = result.summary["utils"]
    for agent in result.summary["compliant"]:
        u = utils[str(agent)]
        if u < 0:
            return Verdict(
                "safety",
                False,
                details=f"compliant agent {agent} finished with util {u}",
                witness={"agent": agent, "util": u},
            )
    compliant = result.summary["compliant"]
    return Verdict(
        "safety",
        True,
        details=f"utils {[utils[str(a)] for a in compliant]} for compliant agents {compliant}",
    )


def check_liveness(result) -> Verdict:
    """All-compliant runs finish, agree, and pay the staked agents."""
    cfg = result.config
    if list(cfg.compliant_agents()) != list(range(cfg.n_agents)):
        return Verdict(
            "liveness",
            True,
            applicable=False,
            details="adversarial scenario; liveness is asserted for all-compliant runs only",
        )
    s = result.summary
    if s["capped"]:
        return Verdict("liveness", False, details="run hit the hard tick cap", witness={"capped": True})
    if s["completion_tick"] is None:
        return Verdict("liveness", False, details="machines never reached a final state")
    if not s["consistent"]:
        return Verdict("liveness", False, details="replica logs diverged")
    utils = s["utils"]
    for agent in s["staked"]:
        if utils[str(agent)] <= 0:
            return Verdict(
                "liveness",
                False,
                details=f"staked agent {agent} finished with util {utils[str(agent)]}, expected > 0",
                witness={"agent": agent, "util": utils[str(agent)]},
            )
    for agent in range(cfg.n_agents):
        if utils[str(agent)] < 0:
            return Verdict(
                "liveness",
                False,
                details=f"agent {agent} finished with util {utils[str(agent)]} < 0",
                witness={"agent": agent, "util": utils[str(agent)]},
            )
    return Verdict(
        "liveness",
        True,
        details=f"completed at tick {s['completion_tick']}; staked utils "
        f"{[utils[str(a)] for a in s['staked']]}",
    )


def _direct_issues(trace: list[dict], agents: set[int]) -> dict[tuple[int, int], dict]:
    """(agent, round) -> {(move, args): first issue tick} for direct sends."""
    issues: dict[tuple[int, int], dict] = {}
    for ev in trace:
        if ev.get("kind") != "send" or ev.get("msg") != "send":
            continue
        if ev.get("origin") != ev["agent"] or ev["agent"] not in agents:
            continue
        key = (ev["agent"], ev["round"])
        mk = (ev["move"], tuple(ev.get("args", [])))
        d = issues.setdefault(key, {})
        d[mk] = min(d.get(mk, ev["tick"]), ev["tick"])
    return issues


def check_fairness(result) -> Verdict:
    """A compliant agent's single on-time request is what every replica
    executed for that round; late or multiple issues void the hypothesis."""
    trace = result.trace
    compliant = set(result.summary["compliant"])
    logs = applied_logs_from_trace(trace)
    starts: dict[tuple[int, int], int] = {}
    for ev in trace:
        if ev.get("kind") in ("execute", "skip"):
            starts[(ev["replica"], ev["round"])] = ev["round_start"]
    checked = 0
    for (agent, rnd), moves in sorted(_direct_issues(trace, compliant).items()):
        if len(moves) != 1:
            continue
        (mname, margs), tick = next(iter(moves.items()))
        on_time = all(
            (rep, rnd) in starts and tick <= starts[(rep, rnd)] + 1 for rep in logs
        )
        if not on_time:
            continue
        want = {"round": rnd, "kind": "move", "agent": agent, "move": mname, "args": list(margs)}
        for rep, log in logs.items():
            got = log[rnd - 1] if rnd <= len(log) else None
            if got != want:
                return Verdict(
                    "fairness",
                    False,
                    details=f"agent {agent}'s on-time round-{rnd} request was not applied at replica {rep}",
                    witness={"agent": agent, "round": rnd, "replica": rep, "expected": want, "got": got},
                )
        checked += 1
    return Verdict("fairness", True, details=f"{checked} on-time unique requests all applied")


def check_timing(result) -> Verdict:
    """Funding before (n+1)Δ; buffered requests spread to every replica
    within nΔ while a compliant relayer is around; start arithmetic; and the
    Δ network bound on every message."""
    cfg = result.config
    trace = result.trace
    n, delta = cfg.n_agents, cfg.delta
    m = len(cfg.asset_names)
    fund_deadline = (n + 1) * delta

    for ev in trace:
        if ev.get("kind") == "fund" and ev.get("ok") and ev["tick"] >= fund_deadline:
            return Verdict(
                "timing",
                False,
                details=f"funding accepted at tick {ev['tick']}, at or past (n+1)delta={fund_deadline}",
                witness=ev,
            )
        if ev.get("kind") == "send":
            lag = ev["arrival"] - ev["tick"]
            if not 1 <= lag <= delta:
                return Verdict(
                    "timing", False, details=f"message delay {lag} outside [1, {delta}]", witness=ev
                )

    # relay spread: only asserted while some compliant agent never aborted early
    relayers = [
        a
        for a in result.summary["compliant"]
        if not any(
            ev.get("kind") == "halt" and ev.get("agent") == a and ev.get("reason") != "settled"
            for ev in trace
        )
    ]
    if relayers:
        buffered: dict[tuple, dict[int, int]] = {}
        for ev in trace:
            if ev.get("kind") != "buffer":
                continue
            key = (ev["agent"], ev["round"], ev["move"], tuple(ev.get("args", [])))
            per = buffered.setdefault(key, {})
            rep = ev["replica"]
            per[rep] = min(per.get(rep, ev["tick"]), ev["tick"])
        for key, per in sorted(buffered.items()):
            first = min(per.values())
            if len(per) != m:
                return Verdict(
                    "timing",
                    False,
                    details=f"request {key} buffered at {len(per)} of {m} replicas",
                    witness={"request": list(key[:3]) + [list(key[3])], "replicas": sorted(per)},
                )
            spread = max(per.values()) - first
            if spread > n * delta:
                return Verdict(
                    "timing",
                    False,
                    details=f"request {key} took {spread} > n*delta={n * delta} to reach all replicas",
                    witness={"request": list(key[:3]) + [list(key[3])], "first": first, "spread": spread},
                )

    for ev in trace:
        if ev.get("kind") not in ("execute", "skip"):
            continue
        closed_form = round_start_time(ev["round"], n, delta)
        if cfg.mode == PESSIMISTIC:
            if ev["round_start"] != closed_form:
                return Verdict(
                    "timing",
                    False,
                    details=f"round {ev['round']} start {ev['round_start']} != {closed_form}",
                    witness=ev,
                )
        elif ev["round_start"] > closed_form:
            return Verdict(
                "timing",
                False,
                details=f"optimistic round {ev['round']} started later than the pessimistic schedule",
                witness=ev,
            )
    return Verdict("timing", True, details="funding window, relay spread, schedule, and delays all in bounds")


def compare_optimistic(cfg: ScenarioConfig) -> Verdict:
    """Run both modes: same log, and a strictly faster optimistic finish
    whenever the game is long enough for the speedup to show (r >= 2, n >= 3)."""
    from .sim import run_scenario

    if list(cfg.compliant_agents()) != list(range(cfg.n_agents)):
        return Verdict(
            "optimistic",
            True,
            applicable=False,
            details="comparison defined for adversary-free configurations",
        )
    pess = run_scenario(dataclasses.replace(cfg, mode="pessimistic"))
    opt = run_scenario(dataclasses.replace(cfg, mode="optimistic"))
    if pess.summary["applied"] != opt.summary["applied"]:
        return Verdict(
            "optimistic",
            False,
            details="modes disagree on the applied log",
            witness={"pessimistic": pess.summary["applied"], "optimistic": opt.summary["applied"]},
        )
    p_tick, o_tick = pess.summary["completion_tick"], opt.summary["completion_tick"]
    r, n = pess.machine.total_rounds(), cfg.n_agents
    if p_tick is None or o_tick is None:
        return Verdict("optimistic", False, details="a mode failed to complete",
                       witness={"pessimistic": p_tick, "optimistic": o_tick})
    if r >= 2 and n >= 3 and not o_tick < p_tick:
        return Verdict(
            "optimistic",
            False,
            details=f"optimistic {o_tick} not faster than pessimistic {p_tick} (r={r}, n={n})",
            witness={"pessimistic": p_tick, "optimistic": o_tick},
        )
    return Verdict(
        "optimistic",
        True,
        details=f"same log; completion optimistic={o_tick} pessimistic={p_tick} (r={r}, n={n})",
    )


def check_delivery(result) -> Verdict:
    """Every compliant-issued request is buffered at every replica within
    delta ticks of issue (the direct-delivery bound)."""
    cfg = result.config
    trace = result.trace
    m = len(cfg.asset_names)
    compliant = set(result.summary["compliant"])
    issues = _direct_issues(trace, compliant)
    buffered: dict[tuple, dict[int, int]] = {}
    for ev in trace:
        if ev.get("kind") != "buffer":
            continue
        key = (ev["agent"], ev["round"], ev["move"], tuple(ev.get("args", [])))
        per = buffered.setdefault(key, {})
        per[ev["replica"]] = min(per.get(ev["replica"], ev["tick"]), ev["tick"])
    count = 0
    for (agent, rnd), moves in sorted(issues.items()):
        for (mname, margs), tick in sorted(moves.items()):
            per = buffered.get((agent, rnd, mname, margs), {})
            late = {rep: t for rep, t in per.items() if t > tick + cfg.delta}
            if len(per) != m or late:
                return Verdict(
                    "delivery",
                    False,
                    details=f"agent {agent}'s round-{rnd} {mname} not buffered everywhere within delta",
                    witness={
                        "agent": agent,
                        "round": rnd,
                        "move": mname,
                        "issued": tick,
                        "buffered_at": {str(k): v for k, v in sorted(per.items())},
                    },
                )
            count += 1
    return Verdict("delivery", True, details=f"{count} issued requests all buffered within delta")


def run_checks(result) -> list[Verdict]:
    return [
        check_consistency(result.trace),
        check_safety(result),
        check_liveness(result),
        check_fairness(result),
        check_timing(result),
    ]
