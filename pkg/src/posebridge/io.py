"""JSONL dataset records, CSV reports and run manifests."""
import csv
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics
from .skeleton import H36M_16

_CORE_FIELDS = ("id", "camera", "joints3d", "joints2d", "rel_pose3d", "frame_index", "sequence_id")


class RecordError(ValueError):
    """A dataset record is malformed or lacks a field a command needs."""


def _array(value, dim, name, rid):
    if value is None:
        return None
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (H36M_16.n_joints, dim):
        raise RecordError(f"record {rid!r}: {name} must be {H36M_16.n_joints}x{dim}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RecordError(f"record {rid!r}: {name} has non-finite values")
    return arr


@dataclass
class DatasetRecord:
    id: str
    camera: CameraIntrinsics = None
    joints3d: np.ndarray = None
    joints2d: np.ndarray = None
    rel_pose3d: np.ndarray = None
    frame_index: int = None
    sequence_id: str = None
    # any other keys (pseudo-labels, diagnostics, ...) round-trip untouched
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d):
        rid = d.get("id")
        if rid is None:
            raise RecordError("record has no id")
        joints3d = _array(d.get("joints3d"), 3, "joints3d", rid)
        joints2d = _array(d.get("joints2d"), 2, "joints2d", rid)
        if joints3d is None and joints2d is None:
            raise RecordError(f"record {rid!r}: needs joints3d or joints2d")
        cam = d.get("camera")
        return cls(
            id=str(rid),
            camera=CameraIntrinsics.from_dict(cam) if cam is not None else None,
            joints3d=joints3d,
            joints2d=joints2d,
            rel_pose3d=_array(d.get("rel_pose3d"), 3, "rel_pose3d", rid),
            frame_index=d.get("frame_index"),
            sequence_id=d.get("sequence_id"),
            extra={k: v for k, v in d.items() if k not in _CORE_FIELDS},
        )

    def to_dict(self):
        d = {"id": self.id}
        if self.camera is not None:
            d["camera"] = self.camera.to_dict()
        for name in ("joints3d", "joints2d", "rel_pose3d"):
            value = getattr(self, name)
            if value is not None:
                d[name] = np.asarray(value, dtype=np.float64).tolist()
        if self.frame_index is not None:
            d["frame_index"] = int(self.frame_index)
        if self.sequence_id is not None:
            d["sequence_id"] = self.sequence_id
        d.update(self.extra)
        return d

    def require(self, *names):
        missing = [n for n in names if getattr(self, n, None) is None and n not in self.extra]
        if missing:
            raise RecordError(f"record {self.id!r}: missing {', '.join(missing)}")


def dumps_record(d):
    return json.dumps(d, separators=(",", ":"), allow_nan=False)


def read_jsonl(path):
    """Read raw dicts; blank lines are ignored."""
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_records(path):
    return [DatasetRecord.from_dict(d) for d in read_jsonl(path)]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            if isinstance(row, DatasetRecord):
                row = row.to_dict()
            fh.write(dumps_record(row))
            fh.write("\n")


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_csv(path, rows, fieldnames):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fieldnames})


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(output):
    return os.fspath(output) + ".manifest.json"
