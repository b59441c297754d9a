"""Transfer learning for neural operators via physics-preserved optimal tensor transport."""

__version__ = "0.1.0"
