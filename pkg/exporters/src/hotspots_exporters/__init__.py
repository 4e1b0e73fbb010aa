"""Producers for the hotspots kit's dense-vector stores and corpus schema."""

from .embeddings import export_embeddings
from .encoders import load_encoder
from .icsi import convert_mrt
from .prosody import export_prosody

__version__ = "0.1.0"

__all__ = ["convert_mrt", "export_embeddings", "export_prosody", "load_encoder", "__version__"]
