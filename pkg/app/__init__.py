"""Self-supervised multi-exposure HDR reconstruction."""

__version__ = "0.1.0"
