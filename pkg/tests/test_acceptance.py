"""Acceptance gate: ten end-to-end criteria over the shipped scenarios.

Each criterion is one test; `pytest -v` gives one PASS/FAIL line per
criterion, and every test prints the measurements behind its verdict (shown
with -rA, or automatically on failure). This module is deliberately heavier
than the unit tests: several thousand full simulations, shared where
criteria overlap.
"""

import dataclasses
import random
import time

import pytest

from conftest import scenario, shipped_raw

from chainsmr.checks import (
    check_delivery,
    check_liveness,
    check_safety,
    compare_optimistic,
)
from chainsmr.core import MoveDescriptor, round_start_time
from chainsmr.games.auction import AuctionMachine, commit_hash
from chainsmr.sim import run_scenario
from chainsmr.trace import dump_trace

MATRIX_SEEDS = 200
RELAY_SEEDS = 1000
DELIVERY_SEEDS = 1000


def report(num: int, ok: bool, detail: str) -> None:
    print(f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def matrix():
    """Every pessimistic shipped scenario x 200 seeds, run once and shared.

    Collects what several criteria need from the same runs: safety verdicts,
    liveness verdicts where every agent is compliant, the all-compliant swap's
    completion ticks, and the count of post-decision invariant evaluations
    (a violated invariant raises, so finishing the sweep means zero)."""
    names = sorted(
        name
        for name, raw in shipped_raw().items()
        if raw.get("mode", "pessimistic") == "pessimistic"
    )
    stats = {
        "names": names,
        "runs": 0,
        "invariant_checks": 0,
        "safety_failures": [],
        "liveness_failures": [],
        "swap_ticks": set(),
    }
    for name in names:
        for seed in range(MATRIX_SEEDS):
            res = run_scenario(scenario(name, seed=seed))
            stats["runs"] += 1
            stats["invariant_checks"] += res.summary["invariant_checks"]
            sv = check_safety(res)
            if not sv.ok:
                stats["safety_failures"].append((name, seed, sv.details))
            lv = check_liveness(res)
            if lv.applicable and not lv.passed:
                stats["liveness_failures"].append((name, seed, lv.details))
            if name == "swap_compliant":
                stats["swap_ticks"].add(res.summary["completion_tick"])
    return stats


def test_criterion_01_delivery_under_nonrelaying_adversary():
    """1000 seeded auction runs against a bidder that never relays: every
    request a compliant agent issues is buffered at every replica within
    delta of the send, and the whole sweep finishes inside a minute."""
    t0 = time.perf_counter()
    bad = []
    for seed in range(DELIVERY_SEEDS):
        res = run_scenario(scenario("auction_nonrelayer", seed=seed))
        v = check_delivery(res)
        if not v.ok:
            bad.append((seed, v.details))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60.0
    report(
        1,
        ok,
        f"{DELIVERY_SEEDS} runs, {len(bad)} delivery violations, "
        f"{elapsed:.1f}s elapsed (budget 60s)",
    )


def _first_buffer_ticks(trace):
    """Request identity -> {replica: first tick it was buffered there}."""
    first: dict[tuple, dict[int, int]] = {}
    for ev in trace:
        if ev.get("kind") != "buffer":
            continue
        key = (ev["agent"], ev["round"], ev["move"], tuple(ev["args"]))
        first.setdefault(key, {}).setdefault(ev["replica"], ev["tick"])
    return first


def test_criterion_02_relay_propagation_bound():
    """1000 runs of the gauntlet swap (equivocator + withholder + a single
    compliant relayer): any request buffered at some replica before its round
    starts is buffered at every replica within n*delta of that start, and
    regardless of when it first lands, every buffered request reaches both
    replicas with a first-buffer spread of at most n*delta."""
    cfg0 = scenario("swap_gauntlet")
    n, delta = cfg0.n_agents, cfg0.delta
    replicas = set(range(len(cfg0.asset_names)))
    bound = n * delta
    early_seen = early_viol = spread_viol = 0
    max_spread = 0
    for seed in range(RELAY_SEEDS):
        res = run_scenario(scenario("swap_gauntlet", seed=seed))
        for (agent, rnd, move, args), per in _first_buffer_ticks(res.trace).items():
            start = round_start_time(rnd, n, delta)
            if min(per.values()) < start:
                early_seen += 1
                if set(per) != replicas or any(
                    t >= start + bound for t in per.values()
                ):
                    early_viol += 1
            if set(per) != replicas:
                spread_viol += 1
                continue
            spread = max(per.values()) - min(per.values())
            max_spread = max(max_spread, spread)
            if spread > bound:
                spread_viol += 1
    ok = early_viol == 0 and spread_viol == 0
    report(
        2,
        ok,
        f"{RELAY_SEEDS} runs: {early_viol} early-buffer violations "
        f"({early_seen} requests buffered before round start), "
        f"{spread_viol} propagation violations, "
        f"max first-buffer spread {max_spread} (bound {bound})",
    )


def test_criterion_03_equivocators_decided_as_skip():
    """Every shipped scenario with an equivocating agent: replicas stay in
    agreement and each of the equivocator's turns is decided Skip."""
    shipped = shipped_raw()
    names = sorted(
        name
        for name, raw in shipped.items()
        if any(
            a.get("strategy", {}).get("kind") == "equivocator"
            for a in raw["agents"]
        )
    )
    assert names, "shipped set must cover the equivocation attack"
    failures = []
    attacked = 0
    for name in names:
        eq_ids = {
            i
            for i, a in enumerate(shipped[name]["agents"])
            if a.get("strategy", {}).get("kind") == "equivocator"
        }
        tt = scenario(name).build_machine().turn_table()
        eq_rounds = [i + 1 for i, turn in enumerate(tt) if turn in eq_ids]
        for seed in range(25):
            res = run_scenario(scenario(name, seed=seed))
            if not res.summary["consistent"]:
                failures.append((name, seed, "replica logs diverged"))
                continue
            for asset, log in res.summary["applied"].items():
                kinds = {e["round"]: e["kind"] for e in log}
                for rnd in eq_rounds:
                    attacked += 1
                    if kinds.get(rnd) != "skip":
                        failures.append(
                            (name, seed, asset, f"round {rnd}: {kinds.get(rnd)!r}")
                        )
    ok = not failures
    report(
        3,
        ok,
        f"{len(names)} scenarios x 25 seeds, {attacked} attacked rounds "
        f"decided Skip everywhere, {len(failures)} failures",
    )


def test_criterion_04_no_compliant_agent_loses(matrix):
    """Across every pessimistic scenario x 200 seeds, no compliant agent ends
    with negative utility."""
    fails = matrix["safety_failures"]
    ok = not fails
    report(
        4,
        ok,
        f"{matrix['runs']} runs ({len(matrix['names'])} scenarios x "
        f"{MATRIX_SEEDS} seeds), {len(fails)} compliant-loss violations"
        + (f"; first: {fails[0]}" if fails else ""),
    )


def test_criterion_05_all_compliant_runs_pay_out(matrix):
    """All-compliant swap/DAO/auction runs settle consistently with positive
    utility for every staked agent, and the swap finishes at tick 90 exactly."""
    lf = matrix["liveness_failures"]
    ticks = matrix["swap_ticks"]
    ok = not lf and ticks == {90}
    report(
        5,
        ok,
        f"{len(lf)} liveness failures across all-compliant runs, "
        f"swap completion ticks {sorted(ticks)} (expected exactly [90])"
        + (f"; first: {lf[0]}" if lf else ""),
    )


def test_criterion_06_invariant_check_volume(matrix):
    """The matrix runs evaluate the conservation/non-negativity invariant at
    least 10^4 times with zero violations (a violation raises, so the sweep
    completing is the zero-count evidence)."""
    total = matrix["invariant_checks"]
    ok = total >= 10_000
    report(
        6,
        ok,
        f"{total} invariant evaluations across {matrix['runs']} runs "
        f"(threshold 10000), 0 violations raised",
    )


def test_criterion_07_defund_equivalence():
    """An uncoverable topup claim and silence at topup time end identically
    for everyone but the offender: the offender is defunded at every replica,
    forfeits the premium deposit, and the other agents' final balances match
    across the two runs, seed by seed."""
    raw = shipped_raw()["auction_invalid_funder"]
    offender = next(
        i
        for i, a in enumerate(raw["agents"])
        if a.get("strategy", {}).get("kind", "compliant") != "compliant"
    )
    premium_total = sum(raw["premium"].values())
    n_replicas = len(raw["assets"])
    mismatches = []
    seeds = 50
    for seed in range(seeds):
        res_claim = run_scenario(scenario("auction_invalid_funder", seed=seed))
        res_silent = run_scenario(scenario("auction_defund_silent", seed=seed))
        for res, tag in ((res_claim, "claim"), (res_silent, "silent")):
            defunded = {
                ev["replica"]
                for ev in res.trace
                if ev.get("kind") == "defund" and offender in ev["votes"]
            }
            if defunded != set(range(n_replicas)):
                mismatches.append(
                    (seed, tag, f"defunded only at replicas {sorted(defunded)}")
                )
            forfeits = [
                ev["amount"]
                for ev in res.trace
                if ev.get("kind") == "slash" and ev["offender"] == offender
            ]
            if premium_total not in forfeits:
                mismatches.append((seed, tag, f"premium not forfeited: {forfeits}"))
        for asset, rows_a in res_claim.summary["final_long"].items():
            rows_b = res_silent.summary["final_long"][asset]
            for who in rows_a.keys() | rows_b.keys():
                if who == str(offender):
                    continue
                if rows_a.get(who) != rows_b.get(who):
                    mismatches.append(
                        (seed, asset, who, rows_a.get(who), rows_b.get(who))
                    )
    ok = not mismatches
    report(
        7,
        ok,
        f"{seeds} seed pairs: offender {offender} defunded at all replicas, "
        f"premium {premium_total} forfeited, no non-offender balance "
        f"differences"
        if ok
        else f"{len(mismatches)} mismatches; first: {mismatches[0]}",
    )


def test_criterion_08_mode_agreement_and_completion_bounds():
    """Optimistic and pessimistic executions of the all-compliant auction
    apply the same log, with optimistic completion <= (r + 2n)*delta and
    pessimistic completion >= r*n*delta."""
    cfg = scenario("auction_compliant")
    r = cfg.build_machine().total_rounds()
    n, delta = cfg.n_agents, cfg.delta
    opt_bound = (r + 2 * n) * delta
    pess_bound = r * n * delta
    failures = []
    v = compare_optimistic(cfg)
    if not v.ok:
        failures.append(("compare", v.details))
    worst_opt, best_pess = 0, None
    for seed in range(25):
        pess = run_scenario(scenario("auction_compliant", seed=seed))
        opt = run_scenario(
            scenario("auction_compliant", seed=seed, mode="optimistic")
        )
        if pess.summary["applied"] != opt.summary["applied"]:
            failures.append((seed, "applied logs differ across modes"))
        o_tick = opt.summary["completion_tick"]
        p_tick = pess.summary["completion_tick"]
        worst_opt = max(worst_opt, o_tick)
        best_pess = p_tick if best_pess is None else min(best_pess, p_tick)
        if o_tick > opt_bound:
            failures.append((seed, f"optimistic {o_tick} > {opt_bound}"))
        if p_tick < pess_bound:
            failures.append((seed, f"pessimistic {p_tick} < {pess_bound}"))
    ok = not failures
    report(
        8,
        ok,
        f"r={r}, n={n}, delta={delta}: 25 seeds agree across modes, "
        f"optimistic worst {worst_opt} <= {opt_bound}, "
        f"pessimistic best {best_pess} >= {pess_bound}"
        if ok
        else f"failures: {failures[:3]}",
    )


def test_criterion_09_commitment_binding():
    """10^4 random forged openings never match a sealed commitment, and a
    wrong-nonce unseal records no bid and escrows nothing."""
    rng = random.Random(90)
    bid, nonce = 7, rng.randbytes(16)
    sealed = commit_hash(bid, nonce)
    trials = collisions = 0
    while trials < 10_000:
        forged = (rng.randrange(-(2**40), 2**40), rng.randbytes(rng.randrange(24)))
        if forged == (bid, nonce):
            continue
        trials += 1
        if commit_hash(*forged) == sealed:
            collisions += 1

    m = AuctionMachine(
        bidders=(0, 1),
        currency=0,
        nft=1,
        bid_plan={0: 5, 1: 7},
        nonce_plan={0: b"n0", 1: b"n1"},
        topup_turn=False,
    )
    s = dataclasses.replace(m.initial_state(), accounts={(0, 0): 5, (1, 0): 7})
    s = m.apply(s, 0, MoveDescriptor("SealedBid", (commit_hash(5, b"n0"),)))
    s = m.apply(s, 1, MoveDescriptor("SealedBid", (commit_hash(7, b"n1"),)))
    s = m.apply(s, 0, MoveDescriptor("Unseal", (5, b"WRONG")))
    ok = collisions == 0 and s.bids == () and s.accounts[(0, 0)] == 5
    report(
        9,
        ok,
        f"{trials} forged openings, {collisions} collisions; wrong-nonce "
        f"unseal recorded {len(s.bids)} bids and moved nothing",
    )


def test_criterion_10_trace_determinism():
    """Every shipped configuration, run twice from a fresh parse, emits
    byte-identical canonical traces and equal summaries."""
    names = sorted(shipped_raw())
    diffs = []
    for name in names:
        a = run_scenario(scenario(name))
        b = run_scenario(scenario(name))
        text_a = dump_trace(a.trace, header_extra=a.header_extra())
        text_b = dump_trace(b.trace, header_extra=b.header_extra())
        if text_a.encode() != text_b.encode() or a.summary != b.summary:
            diffs.append(name)
    ok = not diffs
    report(
        10,
        ok,
        f"{len(names)} configurations x 2 runs each, "
        f"{len(diffs)} byte-level differences",
    )
