"""Complexity counts, the WT1 container, run configuration and the command line."""
