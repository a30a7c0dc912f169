"""Knowledgebase persistence.

A trained system travels as one auditable file: flow descriptors, engine
parameter blobs, transform and optimizer constants, the training-data
fingerprint, and per-flow per-class confusion counts for both the train
and holdout splits. Effectiveness tables are pure projections of the
stored counts under a chosen metric.

Container layout (all integers little-endian):

    magic "PFKB" | u32 format version
    u64 length + payload, three times: meta JSON, engine blobs, counts
    sha256 checksum of everything above (32 bytes)

The meta JSON is dumped with sorted keys and the engine/counts sections
are written in sorted key order, so saving the same knowledgebase twice
produces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import (
    CorruptKbError,
    KbIoError,
    MissingCountsError,
    UnsupportedVersionError,
)
from .fusion import EffectivenessTable, FlowDescriptor
from .metrics import ConfusionCounts, metric
from .transforms import PropertyId

KB_MAGIC = b"PFKB"
KB_VERSION = 1

SPLITS = ("train", "holdout")


@dataclass(frozen=True)
class KnowledgeBase:
    """Everything needed to replay a trained system.

    `counts[split]` is a float64 array of shape (flows, classes, 4)
    holding tp, tn, fp, fn; training writes whole numbers, fixture
    injection may supply proportions. `engines` maps each flow's
    engine_ref to its parameter blob (absent for injected fixtures).
    """

    class_names: Tuple[str, ...]
    flows: Tuple[FlowDescriptor, ...]
    engines: Dict[str, bytes] = field(default_factory=dict)
    counts: Dict[str, np.ndarray] = field(default_factory=dict)
    dataset_fingerprint: str = ""
    config: dict = field(default_factory=dict)
    version: int = KB_VERSION

    def __post_init__(self):
        for split, table in self.counts.items():
            if table.shape != (len(self.flows), len(self.class_names), 4):
                raise ValueError(
                    f"counts[{split!r}] shape {table.shape} != "
                    f"({len(self.flows)}, {len(self.class_names)}, 4)"
                )
        for flow in self.flows:
            if flow.engine_ref and flow.engine_ref not in self.engines:
                # Fixture flows carry no engine; an empty ref marks that.
                raise ValueError(f"flow {flow.flow_id} references missing engine "
                                 f"{flow.engine_ref!r}")

    def cell_counts(self, split: str, flow_id: int, class_id: int) -> ConfusionCounts:
        table = self._split_table(split)
        tp, tn, fp, fn = table[flow_id, class_id]
        return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)

    def _split_table(self, split: str) -> np.ndarray:
        if split not in self.counts:
            raise MissingCountsError(
                f"no counts stored for split {split!r}; have {sorted(self.counts)}"
            )
        return self.counts[split]


def effectiveness_table(
    kb: KnowledgeBase, metric_id: str, split: str = "holdout"
) -> EffectivenessTable:
    """Project the stored counts of one split through a metric.

    Cells whose four counts are all zero (a flow that never saw the class)
    evaluate to zero rather than erroring, matching the convention that
    degenerate flows get no weight.
    """
    table = kb._split_table(split)
    values = np.zeros(table.shape[:2])
    for j in range(table.shape[0]):
        for d in range(table.shape[1]):
            cell = kb.cell_counts(split, j, d)
            values[j, d] = 0.0 if cell.total == 0 else metric(metric_id, cell)
    return EffectivenessTable(values=values, metric_id=metric_id)


def _meta_payload(kb: KnowledgeBase) -> bytes:
    meta = {
        "class_names": list(kb.class_names),
        "config": kb.config,
        "dataset_fingerprint": kb.dataset_fingerprint,
        "flows": [
            {
                "flow_id": f.flow_id,
                "property": f.property.value,
                "x_weight": f.x_weight,
                "engine_ref": f.engine_ref,
            }
            for f in kb.flows
        ],
    }
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()


def _engines_payload(kb: KnowledgeBase) -> bytes:
    chunks = [struct.pack("<I", len(kb.engines))]
    for ref in sorted(kb.engines):
        blob = kb.engines[ref]
        encoded = ref.encode()
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<Q", len(blob)))
        chunks.append(blob)
    return b"".join(chunks)


def _counts_payload(kb: KnowledgeBase) -> bytes:
    chunks = [struct.pack("<I", len(kb.counts))]
    for split in sorted(kb.counts):
        table = np.ascontiguousarray(kb.counts[split], dtype="<f8")
        encoded = split.encode()
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<II", table.shape[0], table.shape[1]))
        chunks.append(table.tobytes())
    return b"".join(chunks)


def to_bytes(kb: KnowledgeBase) -> bytes:
    """Canonical byte form; identical inputs give identical bytes."""
    body = KB_MAGIC + struct.pack("<I", kb.version)
    for payload in (_meta_payload(kb), _engines_payload(kb), _counts_payload(kb)):
        body += struct.pack("<Q", len(payload)) + payload
    return body + hashlib.sha256(body).digest()


def save(kb: KnowledgeBase, destination) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    data = to_bytes(kb)
    destination = os.fspath(destination)
    directory = os.path.dirname(destination) or "."
    try:
        fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".kb-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp_path, destination)
        except BaseException:
            os.unlink(tmp_path)
            raise
    except OSError as exc:
        raise KbIoError(f"cannot write knowledgebase to {destination}: {exc}") from exc


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptKbError(
                f"container ends at byte {len(self.data)}, "
                f"needed {self.pos + n}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def from_bytes(data: bytes) -> KnowledgeBase:
    if len(data) < 40:
        raise CorruptKbError(f"{len(data)} bytes is too short for a knowledgebase")
    body, checksum = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise CorruptKbError("checksum mismatch; file is corrupt or tampered")

    r = _Reader(body)
    if r.take(4) != KB_MAGIC:
        raise CorruptKbError("bad magic; not a knowledgebase file")
    version = r.u32()
    if version > KB_VERSION:
        raise UnsupportedVersionError(
            f"format version {version} is newer than supported {KB_VERSION}"
        )

    sections = []
    for _ in range(3):
        length = r.u64()
        sections.append(_Reader(r.take(length)))
    if r.pos != len(body):
        raise CorruptKbError("trailing bytes after the last section")

    try:
        meta = json.loads(sections[0].data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptKbError(f"meta section is not valid JSON: {exc}") from exc

    engines = {}
    er = sections[1]
    for _ in range(er.u32()):
        ref = er.take(er.u16()).decode()
        engines[ref] = er.take(er.u64())

    counts = {}
    cr = sections[2]
    for _ in range(cr.u32()):
        split = cr.take(cr.u16()).decode()
        j, d = cr.u32(), cr.u32()
        raw = cr.take(j * d * 4 * 8)
        counts[split] = np.frombuffer(raw, dtype="<f8").reshape(j, d, 4).copy()

    flows = tuple(
        FlowDescriptor(
            flow_id=f["flow_id"],
            property=PropertyId(f["property"]),
            x_weight=f["x_weight"],
            engine_ref=f["engine_ref"],
        )
        for f in meta["flows"]
    )
    return KnowledgeBase(
        class_names=tuple(meta["class_names"]),
        flows=flows,
        engines=engines,
        counts=counts,
        dataset_fingerprint=meta["dataset_fingerprint"],
        config=meta["config"],
        version=version,
    )


def load(source) -> KnowledgeBase:
    try:
        with open(source, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise KbIoError(f"cannot read knowledgebase from {source}: {exc}") from exc
    return from_bytes(data)


def export_text(kb: KnowledgeBase) -> str:
    """Human-readable companion form for inspection and fixtures."""
    doc = {
        "version": kb.version,
        "class_names": list(kb.class_names),
        "dataset_fingerprint": kb.dataset_fingerprint,
        "config": kb.config,
        "flows": [
            {
                "flow_id": f.flow_id,
                "property": f.property.value,
                "x_weight": f.x_weight,
                "engine_ref": f.engine_ref,
                "engine_bytes": len(kb.engines.get(f.engine_ref, b"")),
            }
            for f in kb.flows
        ],
        "counts": {
            split: {
                str(j): {
                    kb.class_names[d]: dict(
                        zip(("tp", "tn", "fp", "fn"), table[j, d].tolist())
                    )
                    for d in range(table.shape[1])
                }
                for j in range(table.shape[0])
            }
            for split, table in sorted(kb.counts.items())
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True)
