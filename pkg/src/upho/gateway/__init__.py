"""Gateway: workspaces, the analysis pipeline, the HTTP service, and the CLI."""

from __future__ import annotations

import hashlib
import json


def canonical_json(payload) -> str:
    """Deterministic serialization used for report ids and persisted files."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def content_hash(payload) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
