"""Frozen ViT patch-token embedding extractor emitting EMB1 files."""

from .backbone import DEFAULT_BACKBONE, Backbone, load_backbone
from .extract import ExtractionJob, ExtractionResult, extract, pool_patch_tokens, scan_tree

__version__ = "0.1.0"
