"""dstk - data selection toolkit for low-resource machine translation."""

__version__ = "0.3.0"
