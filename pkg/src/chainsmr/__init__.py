"""chainsmr: replicated exchange machines driven by untrusted agents.

One trusted, passive replica per asset executes a shared turn-based machine;
untrusted agents fund, issue signed moves, relay each other's requests, and
redeem. The package bundles the replica and agent runtimes, three example
machines (swap, token vote, sealed-bid auction), a deterministic simulator,
property checkers, and a CLI.
"""

from .config import ConfigError, ScenarioConfig, load_scenario, parse_scenario
from .sim import Engine, RunResult, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Engine",
    "RunResult",
    "ScenarioConfig",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "__version__",
]
