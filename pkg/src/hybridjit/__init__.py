"""Meta-hybrid JIT framework: trace- and method-based compilation by meta-tracing."""
