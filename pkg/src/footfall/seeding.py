"""Stable per-component seeds derived from one master seed."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, is_dataclass


def derive_seed(master: int, *components) -> int:
    """A 63-bit seed from ``master`` and a path of names/ints; stable across runs and platforms."""
    key = json.dumps([int(master)] + [str(c) for c in components]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little") >> 1


def fingerprint(*configs) -> str:
    """Short hash of dataclass configs (or plain JSON-able values) for tagging outputs."""
    payload = [asdict(c) if is_dataclass(c) else c for c in configs]
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]
