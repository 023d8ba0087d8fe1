"""Environment-driven configuration."""

from __future__ import annotations

import os


# =============================================================================
# COMPUTATION
# =============================================================================

# Worker threads for independent homology computations.
THREADS = max(1, int(os.environ.get("DMFLAGS_THREADS", "1")))

# Default bound on the length of free resolutions.
LENGTH_CAP = int(os.environ.get("DMFLAGS_LENGTH_CAP", "16"))

# Powers of δh tried by check_small beyond the total rank.
SMALL_BOUND_SLACK = int(os.environ.get("DMFLAGS_SMALL_BOUND_SLACK", "1"))


# =============================================================================
# CLI AND TESTS
# =============================================================================

LOG_LEVEL = os.environ.get("DMFLAGS_LOG_LEVEL", "WARNING").upper()

PROPERTY_CASES = int(os.environ.get("DMFLAGS_PROPERTY_CASES", "200"))

SEED = int(os.environ.get("DMFLAGS_SEED", "20240601"))
