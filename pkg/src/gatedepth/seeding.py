"""Deterministic seed derivation.

A single user-facing seed fans out to independent per-stage streams by
hashing (seed, label, ...) with SHA-256. Unlike Python's builtin ``hash``
this is stable across processes and platforms, which is what makes rerun
outputs byte-identical.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *labels) -> int:
    """Return a 63-bit seed derived from ``seed`` and a label path."""
    digest = hashlib.sha256()
    digest.update(str(int(seed)).encode())
    for label in labels:
        digest.update(b"/")
        digest.update(str(label).encode())
    return int.from_bytes(digest.digest()[:8], "big") >> 1
