"""Deterministic derivation of independent random streams from one master seed.

Every Monte Carlo step in the package draws from a generator derived from
the master seed plus a context label (and any integer indices), so results
are reproducible bit-for-bit and independent of evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _as_entropy(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"seed context parts must be ints or strings, got {type(part).__name__}")


def derive_seed(*parts) -> np.random.SeedSequence:
    """SeedSequence for a (master seed, label, indices...) context tuple."""
    if not parts:
        raise ValueError("at least the master seed is required")
    return np.random.SeedSequence([_as_entropy(p) for p in parts])


def derive_rng(*parts) -> np.random.Generator:
    """Generator seeded from a (master seed, label, indices...) context tuple."""
    return np.random.default_rng(derive_seed(*parts))
