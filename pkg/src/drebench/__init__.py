"""Benchmarking harness for dialogue relation extraction with chat-completion LLMs."""

__version__ = "0.1.0"
