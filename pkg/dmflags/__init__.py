"""Exact arithmetic for flags of ℤ/dℤ-graded differential modules over polynomial rings."""

from dmflags.coeff_ring import Field, make_ring
from dmflags.dm_core import DiffModule, DmMorphism, dm_check, homology
from dmflags.flags import FlagMorphism, FreeFlag
from dmflags.resolve import ce_resolution, degenerate_to_homology, quasiminimal

__all__ = [
    "DiffModule",
    "DmMorphism",
    "Field",
    "FlagMorphism",
    "FreeFlag",
    "ce_resolution",
    "degenerate_to_homology",
    "dm_check",
    "homology",
    "make_ring",
    "quasiminimal",
]

__version__ = "0.1.0"
