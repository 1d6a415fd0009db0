"""Benchmark corpus, measurement protocol and the ``bench`` command line."""

from .corpus import DIVERGENT, MIXED, NAMES, STRAIGHT, CorpusProgram, corpus, get_program
from .harness import (COUNTERS, CSV_COLUMNS, BenchmarkError, BenchmarkResult, BenchmarkSpec,
                      ComparisonRow, ComparisonTable, OutputMismatch, compare_modes, load_program,
                      output_hash, run_benchmark)

__all__ = ["DIVERGENT", "MIXED", "NAMES", "STRAIGHT", "CorpusProgram", "corpus", "get_program",
           "COUNTERS", "CSV_COLUMNS", "BenchmarkError", "BenchmarkResult", "BenchmarkSpec",
           "ComparisonRow", "ComparisonTable", "OutputMismatch", "compare_modes", "load_program",
           "output_hash", "run_benchmark"]
