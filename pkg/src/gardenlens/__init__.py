"""Multimodal garden-scene opinion analytics.

Pipeline: ingest multi-source opinion dumps, derive per-image
perception features (element proportions, tiered scene labels), map
images into a three-level scene taxonomy, fuse lexicon and model
sentiment per record, and assemble an analysis report that doubles as
the knowledge base for a role-based agent discussion community.
"""

__version__ = "0.1.0"
