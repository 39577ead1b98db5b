"""Deterministic seed derivation.

Every random quantity in the toolkit flows from one master seed through
named sub-seeds, so concurrency or evaluation order can never change
results. Derivation hashes the printable form of the label parts, which is
stable across platforms and Python versions.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: int | str) -> int:
    """Map (master_seed, label...) to a 63-bit sub-seed via SHA-256."""
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "little") >> 1
