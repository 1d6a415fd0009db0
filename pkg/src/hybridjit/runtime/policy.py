"""Execution modes and per-function strategy assignment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

from ..base_language.bytecode import BytecodeProgram

MODES = ("interp", "trace", "method", "hybrid")
STRATEGIES = ("trace", "method")
MAIN = "<main>"


class PolicyError(ValueError):
    pass


def base_name(name: str) -> str:
    """Source-level name of a compiled function (``f#2`` -> ``f``)."""
    return name.split("#", 1)[0]


@dataclass
class StrategyPolicy:
    mode: str = "interp"
    overrides: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise PolicyError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        for name, strat in self.overrides.items():
            if strat not in STRATEGIES:
                raise PolicyError(f"unknown strategy {strat!r} for {name}")

    def strategy_for(self, name: str) -> Optional[str]:
        """Strategy of a code region, or None when it is only ever interpreted."""
        if self.mode == "interp":
            return None
        if self.mode == "trace":
            return "trace"
        if self.mode == "method":
            return None if name == MAIN else "method"
        if name == MAIN:
            return "trace"
        return self.overrides.get(base_name(name), "trace")

    def check(self, bytecode: BytecodeProgram) -> None:
        if self.mode != "hybrid":
            return
        known = {base_name(f.name) for f in bytecode.functions}
        for name in self.overrides:
            if name not in known:
                raise PolicyError(f"strategy names unknown function {name!r}")


def parse_strategy(text: str) -> Dict[str, str]:
    """Parse ``name = trace|method`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, strat = (p.strip() for p in line.partition("="))
        if not sep or not name or strat not in STRATEGIES:
            raise PolicyError(f"line {lineno}: expected 'function = trace|method', got {raw.strip()!r}")
        out[name] = strat
    return out
