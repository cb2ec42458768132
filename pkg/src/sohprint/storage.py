"""On-disk layout for datasets, sessions and models; all writes are atomic.

A dataset directory holds ``dataset.json`` (battery spec plus one entry per
cycle), ``traces/cycle_NNNNN.csv`` and, for simulated data, ``truth.json``.
"""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Optional

from .errors import SchemaError
from .preprocessing import CycleDataset
from .trace import BatterySpec, ChargeProfile, CycleRecord, format_trace, parse_trace

SCHEMA_VERSION = 1


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def save_dataset(ds: CycleDataset, directory, truth: Optional[dict] = None) -> Path:
    root = Path(directory)
    entries = []
    for rec in ds:
        name = f"traces/cycle_{rec.cycle_index:05d}.csv"
        write_atomic(root / name, format_trace(rec.relax_trace))
        entries.append({"cycle_index": rec.cycle_index, "soh": rec.soh, "synthetic": rec.synthetic,
                        "profile": asdict(rec.profile), "trace": name,
                        "sample_interval": rec.relax_trace.sample_interval})
    doc = {"schema": SCHEMA_VERSION, "spec": asdict(ds.spec), "records": entries}
    write_atomic(root / "dataset.json", dump_json(doc))
    if truth is not None:
        write_atomic(root / "truth.json", dump_json(truth))
    return root


def load_dataset(directory) -> CycleDataset:
    root = Path(directory)
    doc = json.loads((root / "dataset.json").read_text(encoding="utf-8"))
    if doc.get("schema") != SCHEMA_VERSION:
        raise SchemaError(f"dataset schema {doc.get('schema')!r} not supported")
    recs = []
    for e in doc["records"]:
        tr = parse_trace((root / e["trace"]).read_text(encoding="utf-8"), e.get("sample_interval", 1.0))
        recs.append(CycleRecord(tr, float(e["soh"]), int(e["cycle_index"]),
                                ChargeProfile(**e["profile"]), bool(e.get("synthetic", False))))
    return CycleDataset(tuple(recs), BatterySpec(**doc["spec"]))


def load_truth(directory) -> Optional[dict]:
    p = Path(directory) / "truth.json"
    return json.loads(p.read_text(encoding="utf-8")) if p.exists() else None
