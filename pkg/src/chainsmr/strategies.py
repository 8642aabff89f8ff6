"""Agent strategies: the compliant baseline and the standard adversaries.

A strategy decides what to fund, what move to issue at a turn, which replicas
to tell, and whether to relay. The replicas never trust any of it; these
classes exist to exercise the protocol from both sides.
"""

from __future__ import annotations

from .core import SKIP, AssetId, MoveDescriptor, skip_move

COMPLIANT = "compliant"
EQUIVOCATOR = "equivocator"
WITHHOLDER = "withholder"
INVALID_FUNDER = "invalid_funder"
SILENT = "silent"
NON_RELAYER = "non_relayer"


class Strategy:
    """Compliant behavior; adversaries override the parts they corrupt."""

    kind = COMPLIANT
    relays = True
    verifies = True
    redeems = True

    def initial_fund(self, rt) -> dict[AssetId, int]:
        return dict(rt.expected_funding.get(rt.agent_id, {}))

    def turn_move(self, rt, state, rnd: int) -> MoveDescriptor | None:
        return rt.machine.planned_move(state, rt.agent_id, rnd)

    def send_plan(self, rt, move: MoveDescriptor, rnd: int):
        """List of (replica asset ids, move) pairs to sign and send."""
        return [(rt.replica_ids, move)]

    def topup_fund(self, rt, rnd: int) -> dict[AssetId, int] | None:
        return rt.topup_plan


class Equivocator(Strategy):
    """Inconsistent transaction attack: two distinct signed requests for the
    same round, each shown to a different part of the network."""

    kind = EQUIVOCATOR

    def __init__(self, attack_round: int | None = None):
        self.attack_round = attack_round

    def send_plan(self, rt, move: MoveDescriptor, rnd: int):
        if self.attack_round is not None and rnd != self.attack_round:
            return super().send_plan(rt, move, rnd)
        if move.name == SKIP:  # nothing to contradict on a rest turn
            return super().send_plan(rt, move, rnd)
        ids = rt.replica_ids
        half = max(1, len(ids) // 2)
        first, second = ids[:half], ids[half:] or ids
        return [(first, move), (second, skip_move())]


class Withholder(Strategy):
    """Incomplete transaction attack: the signed move goes to a strict subset
    of the replicas and the relays are left to finish the job."""

    kind = WITHHOLDER
    relays = False

    def __init__(self, targets: tuple[AssetId, ...] | None = None):
        self.targets = targets

    def send_plan(self, rt, move: MoveDescriptor, rnd: int):
        targets = self.targets if self.targets is not None else rt.replica_ids[:1]
        return [(tuple(targets), move)]


class InvalidFunder(Strategy):
    """Invalid transaction attack: claims an escrow its long account cannot
    cover, at initialization or at the top-up round. Plays on otherwise."""

    kind = INVALID_FUNDER
    verifies = False

    def __init__(self, claim: dict[AssetId, int], at: str = "topup"):
        if at not in ("init", "topup"):
            raise ValueError("InvalidFunder attacks at 'init' or 'topup'")
        self.claim = dict(claim)
        self.at = at

    def initial_fund(self, rt) -> dict[AssetId, int]:
        if self.at == "init":
            return dict(self.claim)
        return super().initial_fund(rt)

    def topup_fund(self, rt, rnd: int) -> dict[AssetId, int] | None:
        if self.at == "topup":
            return dict(self.claim)
        return super().topup_fund(rt, rnd)


class Silent(Strategy):
    """Funds its stake, then never speaks again: no moves, no relays, no
    top-ups, no redeem."""

    kind = SILENT
    relays = False
    verifies = False
    redeems = False

    def turn_move(self, rt, state, rnd: int) -> MoveDescriptor | None:
        return None

    def topup_fund(self, rt, rnd: int) -> dict[AssetId, int] | None:
        return None


class NonRelayer(Strategy):
    """Plays its own moves correctly but never forwards anyone else's."""

    kind = NON_RELAYER
    relays = False


def build_strategy(spec: dict, asset_ids: dict[str, AssetId]) -> Strategy:
    """Construct a strategy from its config dict ({"kind": ..., params})."""
    kind = spec.get("kind", COMPLIANT)
    params = {k: v for k, v in spec.items() if k != "kind"}

    def fund_map(raw: dict) -> dict[AssetId, int]:
        return {asset_ids[name]: int(v) for name, v in raw.items()}

    if kind == COMPLIANT:
        return Strategy()
    if kind == EQUIVOCATOR:
        return Equivocator(attack_round=params.get("round"))
    if kind == WITHHOLDER:
        targets = params.get("targets")
        if targets is not None:
            targets = tuple(asset_ids[t] if isinstance(t, str) else int(t) for t in targets)
        return Withholder(targets=targets)
    if kind == INVALID_FUNDER:
        return InvalidFunder(fund_map(params.get("claim", {})), at=params.get("at", "topup"))
    if kind == SILENT:
        return Silent()
    if kind == NON_RELAYER:
        return NonRelayer()
    raise ValueError(f"unknown strategy kind {kind!r}")


STRATEGY_KINDS = (COMPLIANT, EQUIVOCATOR, WITHHOLDER, INVALID_FUNDER, SILENT, NON_RELAYER)
