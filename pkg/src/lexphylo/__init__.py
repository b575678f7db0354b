"""Phylogenetic inference from cognate sets and sound correspondence patterns."""

__version__ = "0.1.0"
