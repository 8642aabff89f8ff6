"""Game machines checked against independent oracles.

The DAO outcome is brute-forced over every vote combination, the auction
winner over bid orderings; conservation, skip-neutrality, and determinism
are property tests over random move sequences.
"""

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainsmr.core import MoveDescriptor, skip_move
from chainsmr.games.auction import AuctionMachine, commit_hash
from chainsmr.games.base import SELF_ADDR, UtilityConfig, balance, machine_util
from chainsmr.games.dao import PROPOSAL_FUNDED, DaoMachine
from chainsmr.games.swap import SwapMachine

FLORIN, DUCAT = 0, 1


def funded(machine, holdings):
    """Initial state with the given {(agent, asset): amount} escrowed in."""
    state = machine.initial_state()
    accounts = dict(state.accounts)
    for key, amount in holdings.items():
        accounts[key] = accounts.get(key, 0) + amount
    import dataclasses

    return dataclasses.replace(state, accounts=accounts)


def play_plan(machine, state):
    """Run the prescribed plan to the end; returns the final state."""
    while not machine.is_final(state):
        agent = machine.enabled(state)
        move = machine.compliant_move(state, agent)
        state = machine.apply(state, agent, move)
    return state


# -- swap ----------------------------------------------------------------


def swap():
    return SwapMachine(party_a=0, party_b=1, asset_a=FLORIN, asset_b=DUCAT)


def test_swap_compliant_path_transfers_both_legs():
    m = swap()
    s = funded(m, {(0, FLORIN): 1, (1, DUCAT): 1})
    s = play_plan(m, s)
    assert m.is_final(s)
    assert balance(s.accounts, 0, DUCAT) == 1 and balance(s.accounts, 0, FLORIN) == 0
    assert balance(s.accounts, 1, FLORIN) == 1 and balance(s.accounts, 1, DUCAT) == 0


def test_swap_premature_complete_transfers_nothing():
    m = swap()
    s = funded(m, {(0, FLORIN): 1, (1, DUCAT): 1})
    s = m.apply(s, 0, MoveDescriptor("Agree"))
    s = m.apply(s, 1, skip_move())  # Bob never agrees
    s = m.apply(s, 0, MoveDescriptor("Complete"))
    assert m.is_final(s)
    assert balance(s.accounts, 0, FLORIN) == 1
    assert balance(s.accounts, 1, DUCAT) == 1


def test_swap_underfunded_complete_is_a_noop():
    m = swap()
    s = funded(m, {(1, DUCAT): 1})  # Alice never escrowed her florin
    s = m.apply(s, 0, MoveDescriptor("Agree"))
    s = m.apply(s, 1, MoveDescriptor("Agree"))
    s = m.apply(s, 0, MoveDescriptor("Complete"))
    assert balance(s.accounts, 1, DUCAT) == 1
    assert balance(s.accounts, 0, DUCAT) == 0


def test_swap_guard_failure_still_advances():
    m = swap()
    s = funded(m, {(0, FLORIN): 1, (1, DUCAT): 1})
    s2 = m.apply(s, 1, MoveDescriptor("Agree"))  # wrong sender for round 1
    assert s2.cursor == 1 and s2.accounts == s.accounts
    assert not s2.agreed_a and not s2.agreed_b


def test_swap_utility_from_valuations():
    m = swap()
    cfg = UtilityConfig({0: {FLORIN: 1, DUCAT: 2}, 1: {DUCAT: 1, FLORIN: 2}})
    init = funded(m, {(0, FLORIN): 1, (1, DUCAT): 1})
    done = play_plan(m, init)
    assert machine_util(m, cfg, 0, done, init) == 1  # -1 florin + 2 for the ducat
    assert machine_util(m, cfg, 1, done, init) == 1
    aborted = m.apply(m.apply(m.apply(init, 0, skip_move()), 1, skip_move()), 0, skip_move())
    assert machine_util(m, cfg, 0, aborted, init) == 0


# -- dao -----------------------------------------------------------------

TOKENS = {0: 50, 1: 30, 2: 20}


def dao(vote_plan=None, threshold=60):
    return DaoMachine(
        lps=(0, 1, 2),
        director=3,
        beneficiary=0,
        threshold=threshold,
        token_asset=0,
        treasury_asset=1,
        grant=100,
        treasury=100,
        vote_plan=vote_plan or {},
    )


@pytest.mark.parametrize(
    "stances", list(itertools.product(["yes", "no", "abstain"], repeat=3))
)
def test_dao_every_vote_combination(stances):
    plan = dict(zip(TOKENS, stances))
    m = dao(vote_plan=plan)
    s = funded(m, {(lp, 0): t for lp, t in TOKENS.items()})
    s = play_plan(m, s)
    should_fund = sum(TOKENS[lp] for lp in TOKENS if plan[lp] == "yes") >= 60
    assert s.funded_proposal == should_fund
    grant = 100 if should_fund else 0
    assert balance(s.accounts, 0, 1) == grant
    assert balance(s.accounts, SELF_ADDR, 1) == 100 - grant
    assert (PROPOSAL_FUNDED in m.outcome_events(s)) == should_fund


def test_dao_overweight_vote_ignored():
    m = dao()
    s = funded(m, {(0, 0): 50})
    s2 = m.apply(s, 0, MoveDescriptor("VoteYes", (51,)))
    assert s2.yes_tokens == 0 and s2.cursor == 1


def test_dao_resolve_only_by_director_in_turn():
    m = dao()
    s = funded(m, {(lp, 0): t for lp, t in TOKENS.items()})
    s = m.apply(s, 0, MoveDescriptor("Resolve"))  # wrong phase: recorded as nothing
    assert not s.resolved
    s = m.apply(s, 1, MoveDescriptor("VoteYes", (30,)))
    s = m.apply(s, 2, MoveDescriptor("VoteYes", (20,)))
    s = m.apply(s, 0, MoveDescriptor("Resolve"))  # wrong sender for the resolve turn
    assert m.is_final(s) and not s.resolved
    assert balance(s.accounts, 0, 1) == 0


def test_dao_vote_requires_current_balance():
    # tokens spent... there is no spending in this game, but a zero-balance LP
    # cannot vote any weight
    m = dao()
    s = funded(m, {(1, 0): 30, (2, 0): 20})
    s = m.apply(s, 0, MoveDescriptor("VoteYes", (50,)))
    assert s.yes_tokens == 0


# -- auction -------------------------------------------------------------


def auction(bids, topup_turn=False):
    nonces = {b: b"n%d" % b for b in bids}
    return AuctionMachine(
        bidders=tuple(sorted(bids)),
        currency=FLORIN,
        nft=1,
        bid_plan=dict(bids),
        nonce_plan=nonces,
        topup_turn=topup_turn,
    )


def run_auction(bids, topup_turn=False):
    m = auction(bids, topup_turn)
    s = funded(m, {(b, FLORIN): amt for b, amt in bids.items()})
    s = play_plan(m, s)
    assert m.is_final(s)
    return m, s


@pytest.mark.parametrize(
    "bids",
    [
        {0: 5, 1: 7, 2: 6},
        {0: 5, 1: 7, 2: 7},  # tie goes to the larger id
        {0: 0, 1: 0},
        {0: 9, 1: 1, 2: 2, 3: 9},
        {0: 3, 1: 3, 2: 3},
    ],
)
def test_auction_winner_oracle(bids):
    m, s = run_auction(bids)
    expect = max(bids, key=lambda b: (bids[b], b))
    assert m.winner(s) == expect
    assert balance(s.accounts, expect, 1) == 1  # nft delivered
    assert balance(s.accounts, expect, FLORIN) == 0  # winner paid their bid
    for b in bids:
        if b != expect:
            assert balance(s.accounts, b, FLORIN) == bids[b]  # refunded
            assert balance(s.accounts, b, 1) == 0
    assert balance(s.accounts, SELF_ADDR, FLORIN) == bids[expect]


def test_auction_criterion_tie_example():
    m, s = run_auction({0: 5, 1: 7, 2: 7})
    assert m.winner(s) == 2


def test_auction_topup_turn_shifts_schedule():
    m = auction({0: 2, 1: 3}, topup_turn=True)
    assert m.total_rounds() == 7
    assert m.topup_round() == 3
    assert m.turn_table()[2] == 0  # the rest turn belongs to the first bidder
    _, s = run_auction({0: 2, 1: 3}, topup_turn=True)
    assert m.winner(s) == 1


def test_auction_wrong_nonce_never_records_a_bid():
    m = auction({0: 5, 1: 7})
    s = funded(m, {(0, FLORIN): 5, (1, FLORIN): 7})
    s = m.apply(s, 0, MoveDescriptor("SealedBid", (commit_hash(5, b"n0"),)))
    s = m.apply(s, 1, MoveDescriptor("SealedBid", (commit_hash(7, b"n1"),)))
    s = m.apply(s, 0, MoveDescriptor("Unseal", (5, b"WRONG")))
    assert s.bids == ()
    assert balance(s.accounts, 0, FLORIN) == 5  # nothing escrowed
    s = m.apply(s, 1, MoveDescriptor("Unseal", (8, b"n1")))  # wrong amount
    assert s.bids == ()


def test_auction_unseal_needs_funds():
    m = auction({0: 5, 1: 7})
    s = funded(m, {(0, FLORIN): 5, (1, FLORIN): 3})  # 1 cannot cover their bid
    s = m.apply(s, 0, MoveDescriptor("SealedBid", (commit_hash(5, b"n0"),)))
    s = m.apply(s, 1, MoveDescriptor("SealedBid", (commit_hash(7, b"n1"),)))
    s = m.apply(s, 0, MoveDescriptor("Unseal", (5, b"n0")))
    s = m.apply(s, 1, MoveDescriptor("Unseal", (7, b"n1")))
    assert dict(s.bids) == {0: 5}
    assert balance(s.accounts, 1, FLORIN) == 3


def test_auction_planned_unseal_skips_when_broke():
    m = auction({0: 5, 1: 7})
    s = funded(m, {(0, FLORIN): 5})  # bidder 1 never funded
    s = m.apply(s, 0, m.planned_move(s, 0, 1))
    s = m.apply(s, 1, m.planned_move(s, 1, 2))
    assert m.planned_move(s, 1, 4) == skip_move()


def test_commitment_binding_smoke():
    rng = random.Random(11)
    sealed = commit_hash(7, b"n1")
    for _ in range(500):
        b = rng.randrange(0, 1000)
        n = rng.randbytes(rng.randrange(0, 8))
        if (b, n) != (7, b"n1"):
            assert commit_hash(b, n) != sealed


# -- cross-machine properties ---------------------------------------------


def machines():
    sw = swap()
    da = dao()
    au = auction({0: 5, 1: 7, 2: 6})
    return [
        (sw, funded(sw, {(0, FLORIN): 1, (1, DUCAT): 1})),
        (da, funded(da, {(lp, 0): t for lp, t in TOKENS.items()})),
        (au, funded(au, {(b, FLORIN): amt for b, amt in {0: 5, 1: 7, 2: 6}.items()})),
    ]


def asset_totals(state):
    totals = {}
    for (_, asset), amt in state.accounts.items():
        totals[asset] = totals.get(asset, 0) + amt
    return totals


@settings(max_examples=60)
@given(st.integers(0, 2**32 - 1))
def test_conservation_and_determinism_over_random_play(seed):
    rng = random.Random(seed)
    for machine, init in machines():
        agents = sorted(set(machine.turn_table()))
        totals = asset_totals(init)
        trace = []
        state = init
        while not machine.is_final(state):
            sender = rng.choice(agents)
            planned = machine.compliant_move(state, sender)
            move = rng.choice([planned or skip_move(), skip_move()])
            trace.append((sender, move))
            state = machine.apply(state, sender, move)
            assert asset_totals(state) == totals
        # replaying the same sequence lands on the identical state
        replay = init
        for sender, move in trace:
            replay = machine.apply(replay, sender, move)
        assert replay == state


def test_skip_neutrality():
    for machine, init in machines():
        state = init
        while not machine.is_final(state):
            skipped = machine.apply(state, None, skip_move())
            assert skipped.cursor == state.cursor + 1
            assert skipped.accounts == state.accounts
            agent = machine.enabled(state)
            state = machine.apply(state, agent, machine.compliant_move(state, agent))


def test_apply_after_final_rejected():
    m = swap()
    s = play_plan(m, funded(m, {(0, FLORIN): 1, (1, DUCAT): 1}))
    with pytest.raises(ValueError):
        m.apply(s, 0, skip_move())
    assert m.moves(s) == frozenset()
