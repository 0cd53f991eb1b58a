"""Core modules for dstk."""
