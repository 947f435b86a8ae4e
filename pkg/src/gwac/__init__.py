"""Lossy compression of weighted adjacency matrices with line-graph filter banks."""

from .codec import Bitstream, CodecConfig, compress, decompress
from .graph import UGraph, read_edgelist

__all__ = ["Bitstream", "CodecConfig", "UGraph", "compress", "decompress", "read_edgelist"]
__version__ = "0.1.0"
