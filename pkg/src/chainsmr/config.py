"""Scenario configuration: JSON in, validated runnable pieces out.

A scenario file names the assets, the game and its parameters, one entry per
agent (strategy, balances, agreed funding), the network model, and the
replica mode. Asset ids are indices into the declared asset list; agent ids
are indices into the agent list. Everything the run needs is derived here so
the engine itself never touches raw JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .core import AgentId, AssetId
from .games import GAME_KINDS, AuctionMachine, DaoMachine, SwapMachine
from .games.base import Machine, UtilityConfig
from .network import MODES, DelayRule, NetworkPolicy
from .replica import OPTIMISTIC, PESSIMISTIC
from .strategies import STRATEGY_KINDS, Strategy, build_strategy


class ConfigError(ValueError):
    """The scenario file is malformed or inconsistent."""


@dataclass
class AgentSpec:
    strategy: dict
    long: dict[AssetId, int]
    expected: dict[AssetId, int]
    topup: dict[AssetId, int] | None = None


@dataclass
class ScenarioConfig:
    name: str
    mode: str
    delta: int
    seed: int
    asset_names: tuple[str, ...]
    game: dict
    agents: list[AgentSpec]
    network: dict
    premium: dict[AssetId, int]
    leader: AgentId | None
    topup: dict | None  # {"verified": bool} when the game has a top-up round
    funding_check: str
    underfunded_policy: str
    utility: dict | None
    staked_override: tuple[AgentId, ...] | None
    raw: dict = field(repr=False, default_factory=dict)

    # -- derived ------------------------------------------------------------

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    @property
    def asset_ids(self) -> dict[str, AssetId]:
        return {name: i for i, name in enumerate(self.asset_names)}

    def asset_name(self, asset: AssetId) -> str:
        return self.asset_names[asset]

    def build_machine(self) -> Machine:
        g = self.game
        ids = self.asset_ids
        kind = g["kind"]
        if kind == "swap":
            return SwapMachine(
                party_a=g["party_a"],
                party_b=g["party_b"],
                asset_a=ids[g["asset_a"]],
                asset_b=ids[g["asset_b"]],
                amount_a=g.get("amount_a", 1),
                amount_b=g.get("amount_b", 1),
            )
        if kind == "dao":
            return DaoMachine(
                lps=tuple(g["lps"]),
                director=g["director"],
                beneficiary=g["beneficiary"],
                threshold=g["threshold"],
                token_asset=ids[g["token_asset"]],
                treasury_asset=ids[g["treasury_asset"]],
                grant=g.get("grant", 100),
                treasury=g.get("treasury", 100),
                vote_plan={int(k): v for k, v in g.get("votes", {}).items()},
            )
        if kind == "auction":
            return AuctionMachine(
                bidders=tuple(g["bidders"]),
                currency=ids[g["currency"]],
                nft=ids[g["nft"]],
                bid_plan={int(k): int(v) for k, v in g["bids"].items()},
                nonce_plan=self._nonce_plan(),
                topup_turn=self.topup is not None,
            )
        raise ConfigError(f"unknown game kind {kind!r}")

    def _nonce_plan(self) -> dict[AgentId, bytes]:
        raw = self.game.get("nonces", {})
        plan = {}
        for b in self.game.get("bidders", []):
            hexed = raw.get(str(b))
            plan[b] = bytes.fromhex(hexed) if hexed else f"n{b}".encode()
        return plan

    def build_network(self) -> NetworkPolicy:
        net = self.network
        rules = tuple(
            DelayRule(
                delay=r["delay"],
                agent=r.get("agent"),
                replica=self.asset_ids[r["replica"]] if "replica" in r else None,
                kind=r.get("kind"),
                round=r.get("round"),
            )
            for r in net.get("rules", [])
        )
        try:
            return NetworkPolicy(
                mode=net.get("mode", "uniform_random"),
                delta=self.delta,
                seed=self.seed,
                default=net.get("default"),
                rules=rules,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_strategies(self) -> dict[AgentId, Strategy]:
        out = {}
        for i, spec in enumerate(self.agents):
            try:
                out[i] = build_strategy(spec.strategy, self.asset_ids)
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"agent {i}: bad strategy: {exc}") from exc
        return out

    def expected_funding(self) -> dict[AgentId, dict[AssetId, int]]:
        return {i: dict(spec.expected) for i, spec in enumerate(self.agents)}

    def topup_round(self, machine: Machine) -> int | None:
        if self.topup is None:
            return None
        return machine.topup_round()

    def utility_config(self, machine: Machine) -> UtilityConfig:
        if self.utility is not None:
            ids = self.asset_ids
            vals = {
                int(a): {ids[name]: int(v) for name, v in m.items()}
                for a, m in self.utility.get("valuations", {}).items()
            }
            events = {
                int(a): {name: int(v) for name, v in m.items()}
                for a, m in self.utility.get("events", {}).items()
            }
            return UtilityConfig(valuations=vals, event_values=events)
        return default_utility(self, machine)

    def staked(self, machine: Machine) -> tuple[AgentId, ...]:
        if self.staked_override is not None:
            return self.staked_override
        return machine.staked_agents()

    def compliant_agents(self) -> tuple[AgentId, ...]:
        return tuple(
            i
            for i, spec in enumerate(self.agents)
            if spec.strategy.get("kind", "compliant") == "compliant"
        )


def default_utility(cfg: ScenarioConfig, machine: Machine) -> UtilityConfig:
    """Game-appropriate valuations when the scenario does not set any.

    Swap parties value the asset they receive at 2 and their own at 1; DAO
    participants value the treasury asset at 1 and a funded proposal at 1;
    auction bidders value the item above their own planned bid.
    """
    g = cfg.game
    ids = cfg.asset_ids
    kind = g["kind"]
    if kind == "swap":
        a, b = ids[g["asset_a"]], ids[g["asset_b"]]
        return UtilityConfig(
            valuations={
                g["party_a"]: {a: 1, b: 2},
                g["party_b"]: {a: 2, b: 1},
            }
        )
    if kind == "dao":
        treasury = ids[g["treasury_asset"]]
        members = sorted({*g["lps"], g["director"], g["beneficiary"]})
        return UtilityConfig(
            valuations={m: {treasury: 1} for m in members},
            event_values={m: {"proposal_funded": 1} for m in members},
        )
    if kind == "auction":
        currency, nft = ids[g["currency"]], ids[g["nft"]]
        bids = {int(k): int(v) for k, v in g["bids"].items()}
        return UtilityConfig(
            valuations={b: {currency: 1, nft: bids[b] + 5} for b in g["bidders"]}
        )
    raise ConfigError(f"unknown game kind {kind!r}")


# -- parsing / validation ----------------------------------------------------


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_scenario(data)


def parse_scenario(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")

    mode = data.get("mode", PESSIMISTIC)
    if mode not in (PESSIMISTIC, OPTIMISTIC):
        raise ConfigError(f"unknown mode {mode!r}")

    delta = data.get("delta", 10)
    if not isinstance(delta, int) or delta < 1:
        raise ConfigError("delta must be a positive integer")
    seed = data.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")

    assets = data.get("assets")
    if not isinstance(assets, list) or not assets or len(set(assets)) != len(assets):
        raise ConfigError("assets must be a non-empty list of distinct names")
    asset_names = tuple(str(a) for a in assets)
    asset_ids = {name: i for i, name in enumerate(asset_names)}

    raw_agents = data.get("agents")
    if not isinstance(raw_agents, list) or len(raw_agents) < 2:
        raise ConfigError("need at least two agents")
    n = len(raw_agents)

    game = data.get("game")
    if not isinstance(game, dict) or game.get("kind") not in GAME_KINDS:
        raise ConfigError(f"game.kind must be one of {GAME_KINDS}")
    _validate_game(game, asset_ids, n)

    topup = data.get("topup")
    if topup is not None:
        if not isinstance(topup, dict):
            raise ConfigError("topup must be an object")
        if game["kind"] != "auction":
            raise ConfigError("a top-up round is only configured for the auction game")

    premium_raw = data.get("premium", {})
    premium = {}
    for name, amount in premium_raw.items():
        if name not in asset_ids:
            raise ConfigError(f"premium names unknown asset {name!r}")
        if not isinstance(amount, int) or amount <= 0:
            raise ConfigError("premium deposits must be positive integers")
        premium[asset_ids[name]] = amount

    leader = data.get("leader")
    verified = bool(topup.get("verified")) if topup else False
    if verified:
        if leader is None:
            raise ConfigError("a verified top-up round needs a leader")
        if not isinstance(leader, int) or not 0 <= leader < n:
            raise ConfigError("leader must be an agent id")
        if mode == OPTIMISTIC:
            raise ConfigError("a verified top-up round requires pessimistic mode")
        if n < 3:
            raise ConfigError("a verified top-up round needs at least three agents")
        if (n - 2) * delta < 2:
            raise ConfigError("delta too small for the leader's defund to land in the window")
        if not premium:
            raise ConfigError("a verified top-up round needs premium deposits to slash")
    elif leader is not None:
        raise ConfigError("leader is only meaningful with a verified top-up round")

    network = data.get("network", {"mode": "uniform_random"})
    if not isinstance(network, dict) or network.get("mode", "uniform_random") not in MODES:
        raise ConfigError(f"network.mode must be one of {MODES}")

    funding_check = data.get("funding_check", "exact")
    if funding_check not in ("exact", "min"):
        raise ConfigError("funding_check must be 'exact' or 'min'")
    underfunded_policy = data.get("underfunded_policy", "abort")
    if underfunded_policy not in ("abort", "continue"):
        raise ConfigError("underfunded_policy must be 'abort' or 'continue'")

    staked_override = data.get("staked")
    if staked_override is not None:
        if not all(isinstance(a, int) and 0 <= a < n for a in staked_override):
            raise ConfigError("staked must list agent ids")
        staked_override = tuple(staked_override)

    agents = []
    defaults = _default_expected(game, asset_ids)
    for i, raw in enumerate(raw_agents):
        if not isinstance(raw, dict):
            raise ConfigError(f"agent {i} must be an object")
        strategy = raw.get("strategy", {"kind": "compliant"})
        if strategy.get("kind", "compliant") not in STRATEGY_KINDS:
            raise ConfigError(f"agent {i}: unknown strategy {strategy.get('kind')!r}")
        expected_raw = raw.get("expected")
        if expected_raw is None:
            expected = dict(defaults.get(i, {}))
        else:
            expected = _asset_map(expected_raw, asset_ids, f"agent {i} expected")
        topup_plan = raw.get("topup")
        if topup_plan is not None:
            if topup is None:
                raise ConfigError(f"agent {i}: top-up plan without a top-up round")
            topup_plan = _asset_map(topup_plan, asset_ids, f"agent {i} topup")
        long_raw = raw.get("long")
        if long_raw is None:
            long = _default_long(expected, premium, topup_plan, len(asset_names))
        else:
            long = _asset_map(long_raw, asset_ids, f"agent {i} long")
        agents.append(
            AgentSpec(strategy=dict(strategy), long=long, expected=expected, topup=topup_plan)
        )

    cfg = ScenarioConfig(
        name=str(data.get("name", "scenario")),
        mode=mode,
        delta=delta,
        seed=seed,
        asset_names=asset_names,
        game=game,
        agents=agents,
        network=network,
        premium=premium,
        leader=leader,
        topup=topup,
        funding_check=funding_check,
        underfunded_policy=underfunded_policy,
        utility=data.get("utility"),
        staked_override=staked_override,
        raw=data,
    )
    # surface machine/strategy/network construction errors at validation time
    try:
        machine = cfg.build_machine()
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad game parameters: {exc}") from exc
    cfg.build_strategies()
    cfg.build_network()
    for i, spec in enumerate(cfg.agents):
        kind = spec.strategy.get("kind", "compliant")
        if kind == "invalid_funder" and spec.strategy.get("at", "topup") == "topup":
            if cfg.topup_round(machine) is None:
                raise ConfigError(f"agent {i}: invalid_funder at topup needs a top-up round")
    return cfg


def _validate_game(game: dict, asset_ids: dict[str, AssetId], n: int) -> None:
    kind = game["kind"]

    def agent_ok(a) -> bool:
        return isinstance(a, int) and 0 <= a < n

    def need_asset(key: str) -> None:
        if game.get(key) not in asset_ids:
            raise ConfigError(f"game.{key} must name a declared asset")

    if kind == "swap":
        if not (agent_ok(game.get("party_a")) and agent_ok(game.get("party_b"))):
            raise ConfigError("swap parties must be agent ids")
        need_asset("asset_a")
        need_asset("asset_b")
        if game["asset_a"] == game["asset_b"]:
            raise ConfigError("swap needs two distinct assets")
        for key in ("amount_a", "amount_b"):
            if key in game and (not isinstance(game[key], int) or game[key] < 1):
                raise ConfigError(f"game.{key} must be a positive integer")
    elif kind == "dao":
        lps = game.get("lps")
        if not isinstance(lps, list) or not lps or not all(agent_ok(a) for a in lps):
            raise ConfigError("dao lps must be a non-empty list of agent ids")
        if len(set(lps)) != len(lps):
            raise ConfigError("dao lps must be distinct")
        if not agent_ok(game.get("director")) or not agent_ok(game.get("beneficiary")):
            raise ConfigError("dao director and beneficiary must be agent ids")
        if not isinstance(game.get("threshold"), int) or game["threshold"] <= 0:
            raise ConfigError("dao threshold must be a positive integer")
        need_asset("token_asset")
        need_asset("treasury_asset")
        tokens = game.get("tokens", {})
        if not all(int(k) in lps for k in tokens):
            raise ConfigError("dao tokens must be keyed by LP ids")
        votes = game.get("votes", {})
        if not all(int(k) in lps and v in ("yes", "no", "abstain") for k, v in votes.items()):
            raise ConfigError("dao votes must map LP ids to yes/no/abstain")
    elif kind == "auction":
        bidders = game.get("bidders")
        if not isinstance(bidders, list) or len(bidders) < 2 or not all(agent_ok(a) for a in bidders):
            raise ConfigError("auction bidders must be at least two agent ids")
        if len(set(bidders)) != len(bidders):
            raise ConfigError("auction bidders must be distinct")
        need_asset("currency")
        need_asset("nft")
        if game["currency"] == game["nft"]:
            raise ConfigError("auction currency and item must differ")
        bids = game.get("bids")
        if not isinstance(bids, dict) or set(map(int, bids)) != set(bidders):
            raise ConfigError("auction bids must cover exactly the bidders")
        if not all(isinstance(v, int) and v >= 0 for v in bids.values()):
            raise ConfigError("auction bids must be non-negative integers")


def _default_expected(game: dict, asset_ids: dict[str, AssetId]) -> dict[int, dict[AssetId, int]]:
    kind = game["kind"]
    if kind == "swap":
        return {
            game["party_a"]: {asset_ids[game["asset_a"]]: game.get("amount_a", 1)},
            game["party_b"]: {asset_ids[game["asset_b"]]: game.get("amount_b", 1)},
        }
    if kind == "dao":
        token = asset_ids[game["token_asset"]]
        tokens = {int(k): int(v) for k, v in game.get("tokens", {}).items()}
        return {lp: {token: tokens.get(lp, 0)} for lp in game["lps"]}
    if kind == "auction":
        currency = asset_ids[game["currency"]]
        bids = {int(k): int(v) for k, v in game["bids"].items()}
        return {b: {currency: bids[b]} for b in game["bidders"]}
    return {}


def _default_long(
    expected: dict[AssetId, int],
    premium: dict[AssetId, int],
    topup: dict[AssetId, int] | None,
    n_assets: int,
) -> dict[AssetId, int]:
    long = {}
    for asset in range(n_assets):
        amount = expected.get(asset, 0) + premium.get(asset, 0) + (topup or {}).get(asset, 0)
        if amount:
            long[asset] = amount
    return long


def _asset_map(raw: dict, asset_ids: dict[str, AssetId], what: str) -> dict[AssetId, int]:
    out = {}
    for name, amount in raw.items():
        if name not in asset_ids:
            raise ConfigError(f"{what}: unknown asset {name!r}")
        if not isinstance(amount, int) or amount < 0:
            raise ConfigError(f"{what}: amounts must be non-negative integers")
        out[asset_ids[name]] = amount
    return out
