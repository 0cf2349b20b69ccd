"""Biophilic artwork classification and curation toolkit.

Trains a sigmoid-output decoder head on precomputed image embeddings,
evaluates it with multi-label metrics, generates tags / dominant labels /
a biophilic flag, explains predictions with a superpixel surrogate, and
emits curated gallery manifests.
"""

__version__ = "0.1.0"
