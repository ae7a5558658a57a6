"""Append-only JSON-lines store for orbits, experiments and certificates.

Each line is one envelope ``{schema_version, kind, id, created,
config_hash, payload}`` validated against ``schemas/record.schema.json``
before it is written.  Lines are never rewritten.
"""

from __future__ import annotations

import fcntl
import json
import os
import uuid
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

SCHEMA_VERSION = 1
ENV_VAR = "POINCARE_JETS_DB"
DEFAULT_PATH = "poincare_jets.jsonl"


@lru_cache(maxsize=None)
def record_schema():
    text = resources.files("poincare_jets").joinpath("schemas/record.schema.json").read_text()
    return json.loads(text)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def default_path():
    return os.environ.get(ENV_VAR, DEFAULT_PATH)


def make_envelope(kind, payload, config_hash=None, ident=None):
    payload = _plain(payload)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "id": ident or payload.get("id") or uuid.uuid4().hex,
        "created": payload.get("created") or datetime.now(timezone.utc).isoformat(),
        "config_hash": config_hash,
        "payload": payload,
    }


def validate(envelope):
    jsonschema.validate(envelope, record_schema())


class OrbitDatabase:
    def __init__(self, path=None):
        self.path = Path(path or default_path())

    def append(self, kind, payload, config_hash=None, ident=None):
        env = make_envelope(kind, payload, config_hash, ident)
        validate(env)
        line = json.dumps(env, sort_keys=True, allow_nan=False)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(line + "\n")
                fh.flush()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        return env

    def records(self, kind=None):
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                env = json.loads(line)
                if kind is None or env["kind"] == kind:
                    out.append(env)
        return out

    def find(self, ident):
        for env in self.records():
            if env["id"] == ident:
                return env
        return None
