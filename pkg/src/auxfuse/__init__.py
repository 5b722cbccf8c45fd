"""auxfuse: auxiliary-information fusion engine for person re-identification.

Subpackages cover the full desk-scale pipeline: feature stores and synthetic
data, a deterministic numeric kernel, concatenation/attention fusion heads
with hand-derived gradients, an LSTM trajectory feature extractor, retrieval
evaluation (mAP/CMC), integrated-gradients attribution, and a repeated-split
experiment harness.
"""

__version__ = "0.1.0"
