"""Tests for the dmflags package."""
