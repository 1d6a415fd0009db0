"""Method-based compilation by driving the meta-tracer over every path of a function."""

from .method import (DEFAULT_MAX_IFS, BranchBlowUp, MethodTracer, TracerCheckpoint, UnknownCallee,
                     UnstructuredLoop, call_sites, if_nodes, jit_meta_method)

__all__ = ["DEFAULT_MAX_IFS", "BranchBlowUp", "MethodTracer", "TracerCheckpoint", "UnknownCallee",
           "UnstructuredLoop", "call_sites", "if_nodes", "jit_meta_method"]
