"""Content-addressed bundle cache: JSON files keyed by the construction inputs."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .report import canonical_json

ENV_VAR = "CASORATIA_CACHE"


def cache_dir(explicit: str | None = None) -> Path | None:
    path = explicit or os.environ.get(ENV_VAR)
    if not path:
        return None
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cache_key(**fields) -> str:
    blob = canonical_json(fields)
    return hashlib.sha256(blob.encode()).hexdigest()


def load(directory: Path | None, key: str):
    if directory is None:
        return None
    f = directory / f"{key}.json"
    if not f.exists():
        return None
    return json.loads(f.read_text())


def store(directory: Path | None, key: str, payload: dict) -> None:
    if directory is None:
        return
    text = canonical_json(payload)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, directory / f"{key}.json")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
