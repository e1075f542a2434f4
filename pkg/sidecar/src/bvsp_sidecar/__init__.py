"""Scoring and generation service behind the bvsp wire protocol.

A compact encoder-decoder transformer is pretrained once on rendered
target sequences, then frozen; per-template soft prompts (prefix parameter
blocks prepended to the encoder input) are the only trainable weights
afterwards. The HTTP surface is ``POST /score``, ``POST /generate``, and
``GET /health``.
"""

__version__ = "0.1.0"
