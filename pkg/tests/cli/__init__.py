"""Subprocess tests for the dmflags command line."""
