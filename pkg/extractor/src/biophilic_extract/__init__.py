"""Embedding extraction and augmentation companion to the biophilic toolkit.

Produces BEMB embedding files from image folders with the published
ViT-B/32 image encoder (or a deterministic offline stand-in), applies the
study's augmentation recipe, and serves embeddings over a newline-delimited
JSON protocol for the explanation pipeline.
"""

__version__ = "0.1.0"
