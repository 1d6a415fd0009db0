"""Trace-based compilation by meta-tracing the interpreter definition."""

from .core import (LeftDispatchLoop, LeftTraceRegion, NonLoopingPath, Red, TraceAbort, TraceTooLong, Walker,
                   is_red)
from .meta import (DEFAULT_MAX_MERGES, DEFAULT_MAX_OPS, ExecutionContext, MetaTracer, Stepper,
                   TraceOutcome, meta_trace, resume_frames)

__all__ = ["LeftDispatchLoop", "LeftTraceRegion", "NonLoopingPath", "Red", "TraceAbort", "TraceTooLong", "Walker",
           "is_red", "DEFAULT_MAX_MERGES", "DEFAULT_MAX_OPS", "ExecutionContext", "MetaTracer",
           "Stepper", "TraceOutcome", "meta_trace", "resume_frames"]
