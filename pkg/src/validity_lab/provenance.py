"""Run provenance: config hashing and deterministic JSON output."""

from __future__ import annotations

import hashlib
import json
import math
import os
from typing import Any


def canonical_json(config: Any) -> str:
    """Sorted keys, no whitespace; the input to :func:`config_hash`."""
    return json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)


def config_hash(config: Any) -> str:
    """SHA-256 hex digest of the canonical JSON form of ``config``."""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def _default(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _sanitize(obj):
    # JSON has no infinity; write it as null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def write_json(payload: Any, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(json.loads(json.dumps(payload, default=_default))), fh, indent=1, sort_keys=True)
        fh.write("\n")


def stamp_line(seed: int | None, digest: str) -> str:
    """Comment text embedded at the top of CSV outputs."""
    return f"seed={seed} config_hash={digest}"
