"""Hint generation and human feedback loop for localized video policy review.

The pipeline: synthesize a corpus, score it with a sliding-window model,
calibrate per-policy thresholds, cut and rank hint segments, serve them to
(simulated or real) raters, collect accept/reject/organic annotations, and
export training labels that feed the next scorer round.
"""

__version__ = "0.1.0"
