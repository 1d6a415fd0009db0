"""Big-step AST evaluator; the ground truth every execution mode is checked against."""

from __future__ import annotations

from typing import Dict, List, Optional

from .. import _deep
from . import ast as A

DEFAULT_MAX_DEPTH = 10_000


class RecursionDepthExceeded(Exception):
    """Base-program recursion went deeper than the configured limit."""


class _Closure:
    __slots__ = ("node", "funcs")

    def __init__(self, node: A.LetRec, funcs):
        self.node = node
        self.funcs = funcs


class _Evaluator:
    def __init__(self, max_depth: int):
        self.max_depth = max_depth
        self.output: List[int] = []
        self.calls = 0

    def eval(self, node: A.Node, env: Dict[str, int], funcs: Dict[str, _Closure], depth: int):
        # unit and booleans evaluate to 0/1 so printing matches the bytecode VM
        while True:
            if isinstance(node, A.Int):
                return node.value
            if isinstance(node, A.Var):
                return env[node.name]
            if isinstance(node, A.BinOp):
                a = self.eval(node.left, env, funcs, depth)
                b = self.eval(node.right, env, funcs, depth)
                op = node.op
                if op == "+":
                    return a + b
                if op == "-":
                    return a - b
                if op == "*":
                    return a * b
                if op == "<=":
                    return int(a <= b)
                if op == "<":
                    return int(a < b)
                return int(a == b)
            if isinstance(node, A.If):
                node = node.then if self.eval(node.cond, env, funcs, depth) else node.orelse
                continue
            if isinstance(node, A.Let):
                v = self.eval(node.value, env, funcs, depth)
                if node.name is not None:
                    env = dict(env)
                    env[node.name] = v
                node = node.body
                continue
            if isinstance(node, A.LetRec):
                funcs = dict(funcs)
                clo = _Closure(node, funcs)
                funcs[node.name] = clo
                node = node.body
                continue
            if isinstance(node, A.App):
                clo = funcs[node.func]
                args = [self.eval(a, env, funcs, depth) for a in node.args]
                if depth + 1 > self.max_depth:
                    raise RecursionDepthExceeded(f"recursion depth exceeded {self.max_depth}")
                self.calls += 1
                return self.eval(clo.node.fbody, dict(zip(clo.node.params, args)), clo.funcs, depth + 1)
            if isinstance(node, A.Print):
                self.output.append(int(self.eval(node.arg, env, funcs, depth)))
                return 0
            if isinstance(node, A.Seq):
                self.eval(node.first, env, funcs, depth)
                node = node.second
                continue
            if isinstance(node, A.Bool):
                return int(node.value)
            if isinstance(node, A.Unit):
                return 0
            raise TypeError(f"unknown node {node!r}")


def run_reference(ast: A.Node, max_depth: int = DEFAULT_MAX_DEPTH) -> List[int]:
    """Evaluate ``ast`` and return the printed integers."""
    return reference_run(ast, max_depth)[0]


def reference_run(ast: A.Node, max_depth: int = DEFAULT_MAX_DEPTH):
    """Like run_reference but also returns the number of base-level calls."""
    ev = _Evaluator(max_depth)
    _deep.run_deep(ev.eval, ast, {}, {}, 0)
    return ev.output, ev.calls
