"""Delimiter-format fine-tuning and serving for dialogue relation extraction.

Builds input/output training pairs from a dialogue corpus, fine-tunes a
causal language model with low-rank adapters, and serves the result behind
an OpenAI-style ``/chat/completions`` endpoint.
"""

__version__ = "0.1.0"
