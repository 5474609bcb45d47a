"""Run-directory bookkeeping: staged atomic writes and the run manifest."""

from __future__ import annotations

import hashlib
import json
import math
import os
import platform
import shutil
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__

MANIFEST = "manifest.json"
RESOLVED_CONFIG = "config.resolved.json"
_STAGING_PREFIX = ".staging-"


def _strict(obj):
    # Non-finite floats become null so every artifact is strict JSON.
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _strict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(v) for v in obj]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_strict(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import numba
    import scipy

    return {
        "nordepf": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


class Stage:
    """Files written under ``staging`` are moved into the run directory only on success."""

    def __init__(self, root: Path, name: str):
        self.root = root
        self.name = name
        self.staging = root / f"{_STAGING_PREFIX}{name}"

    def path(self, relative: str) -> Path:
        p = self.staging / relative
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def write_text(self, relative: str, text: str) -> Path:
        p = self.path(relative)
        p.write_text(text)
        return p

    def write_json(self, relative: str, obj) -> Path:
        return self.write_text(relative, canonical_json(obj))

    def write_csv(self, relative: str, frame: pd.DataFrame, **kw) -> Path:
        p = self.path(relative)
        kw.setdefault("index", False)
        kw.setdefault("float_format", "%.10g")
        frame.to_csv(p, **kw)
        return p

    def commit(self) -> list[str]:
        moved = []
        for src in sorted(self.staging.rglob("*")):
            if src.is_dir():
                continue
            rel = src.relative_to(self.staging)
            dst = self.root / rel
            dst.parent.mkdir(parents=True, exist_ok=True)
            os.replace(src, dst)
            moved.append(rel.as_posix())
        shutil.rmtree(self.staging, ignore_errors=True)
        return moved

    def abort(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)


def _load_manifest(root: Path) -> dict:
    p = root / MANIFEST
    if p.exists():
        try:
            return json.loads(p.read_text())
        except json.JSONDecodeError:
            pass
    return {"stages": {}}


def _inventory(root: Path) -> list[dict]:
    files = []
    for p in sorted(root.rglob("*")):
        if p.is_dir() or any(part.startswith(_STAGING_PREFIX) for part in p.relative_to(root).parts):
            continue
        rel = p.relative_to(root).as_posix()
        if rel == MANIFEST:
            continue
        files.append({"path": rel, "bytes": p.stat().st_size, "sha256": sha256_file(p)})
    # The manifest lists itself; its own digest cannot be known in advance.
    files.append({"path": MANIFEST, "bytes": None, "sha256": None})
    return sorted(files, key=lambda f: f["path"])


def update_manifest(root: Path, config: dict, stage: str, status: str, wall_time: float, error: str = "") -> None:
    root.mkdir(parents=True, exist_ok=True)
    manifest = _load_manifest(root)
    h = config_hash(config)
    if manifest.get("config_hash") not in (None, h):
        manifest["previous_config_hash"] = manifest["config_hash"]
    manifest["config_hash"] = h
    manifest["versions"] = versions()
    entry = {"status": status, "wall_time_s": round(wall_time, 3)}
    if error:
        entry["error"] = error
    manifest.setdefault("stages", {})[stage] = entry
    manifest["files"] = _inventory(root)
    tmp = root / f".{MANIFEST}.tmp"
    tmp.write_text(canonical_json(manifest))
    os.replace(tmp, root / MANIFEST)


@contextmanager
def stage(root, name: str, config: dict):
    """Open a staged write for command ``name``; commit and record it on success."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    st = Stage(root, name)
    st.abort()
    st.staging.mkdir(parents=True)
    t0 = time.perf_counter()
    try:
        yield st
    except BaseException as exc:
        st.abort()
        update_manifest(root, config, name, "failed", time.perf_counter() - t0, f"{type(exc).__name__}: {exc}")
        raise
    st.write_json(RESOLVED_CONFIG, config)
    st.commit()
    update_manifest(root, config, name, "ok", time.perf_counter() - t0)
