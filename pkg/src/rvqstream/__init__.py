"""Streaming residual-vector-quantization codec toolkit.

Modules:

* :mod:`rvqstream.rvq` - codebooks, greedy RVQ encode/decode, EMA k-means training
* :mod:`rvqstream.stream` - zero-lookahead streaming encode/decode
* :mod:`rvqstream.blocks` - block-attention masks and chunked decode scheduling
* :mod:`rvqstream.dual_track` - dual-track session loop with toy step models
* :mod:`rvqstream.latency` - discrete-event first-packet latency model
* :mod:`rvqstream.bench` - synthetic corpora and evaluation metrics
"""

__version__ = "0.1.0"
