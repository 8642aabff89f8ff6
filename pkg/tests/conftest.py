import dataclasses

from chainsmr import ScenarioConfig, parse_scenario
from chainsmr.cli import builtin_scenarios

_SHIPPED = None


def shipped_raw() -> dict[str, dict]:
    global _SHIPPED
    if _SHIPPED is None:
        _SHIPPED = builtin_scenarios()
    return _SHIPPED


def scenario(name: str, **overrides) -> ScenarioConfig:
    """A shipped scenario config, optionally with fields replaced."""
    cfg = parse_scenario(shipped_raw()[name])
    return dataclasses.replace(cfg, **overrides) if overrides else cfg
