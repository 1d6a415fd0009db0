"""Mixed-mode runtime: profiling, compile-on-reach, unit dispatch and deoptimization."""

from .policy import MAIN, MODES, STRATEGIES, PolicyError, StrategyPolicy, base_name, parse_strategy
from .runtime import (BLACKLIST_AFTER, DEFAULT_THRESHOLD, CompileRequest, DeoptError, FlagImbalance,
                      Runtime, Stats, run_program)

__all__ = ["MAIN", "MODES", "STRATEGIES", "PolicyError", "StrategyPolicy", "base_name",
           "parse_strategy", "BLACKLIST_AFTER", "DEFAULT_THRESHOLD", "CompileRequest", "DeoptError",
           "FlagImbalance", "Runtime", "Stats", "run_program"]
