"""opbench: a prescription-driven benchmarking harness for big-data operations."""

__version__ = "0.1.0"
