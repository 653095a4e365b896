"""Bit-exact file formats: CVOL volumes, JSON manifests, checkpoints, motion files.

CVOL container: 8-byte magic ``CVOL\\0\\0\\0\\1``, a little-endian u64 header
length, a UTF-8 JSON header, then the raw little-endian payload with x varying
fastest, then y, then z, then channel/time slowest. Checkpoints use the same
container idea (magic ``CKPT\\0\\0\\0\\1``) with a JSON header describing the
architecture followed by raw parameter and optimizer-state blobs concatenated
in layer order. All writers are atomic (temp file + rename) and deterministic:
identical inputs produce identical bytes.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .core import Atlas, GridMeta, MultiChannelVolume, TimeSeriesVolume, Volume3D
from .errors import (
    ArchitectureMismatch,
    BadLabel,
    DimensionError,
    DuplicateSubject,
    FormatError,
    NonFiniteError,
)

CVOL_MAGIC = b"CVOL\x00\x00\x00\x01"
CKPT_MAGIC = b"CKPT\x00\x00\x00\x01"

_DTYPES = {
    "f32le": np.dtype("<f4"),
    "f64le": np.dtype("<f8"),
    "i32le": np.dtype("<i4"),
}


def _dtype_tag(dtype: np.dtype) -> str:
    for tag, dt in _DTYPES.items():
        if np.dtype(dtype) == dt:
            return tag
    raise FormatError(f"unsupported dtype {dtype}")


def atomic_write_bytes(path, payload: bytes) -> None:
    """Write bytes to ``path`` via a temp file + rename so readers never see partials."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dump_json(obj) -> str:
    """Deterministic JSON: sorted keys, compact separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _container_bytes(magic: bytes, header: dict, blobs) -> bytes:
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [magic, struct.pack("<Q", len(hdr)), hdr]
    parts.extend(blobs)
    return b"".join(parts)


def _read_container(path, magic: bytes):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(magic) + 8 or raw[: len(magic)] != magic:
        raise FormatError(f"{path}: bad magic")
    (hlen,) = struct.unpack_from("<Q", raw, len(magic))
    start = len(magic) + 8
    if start + hlen > len(raw):
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: header is not valid JSON: {e}") from e
    if not isinstance(header, dict):
        raise FormatError(f"{path}: header must be a JSON object")
    return header, raw[start + hlen :]


# ---------------------------------------------------------------------------
# CVOL volumes
# ---------------------------------------------------------------------------

def _canonical_payload(obj) -> tuple[dict, np.ndarray]:
    """Header dict + flat payload in canonical order (x fastest, c/t slowest)."""
    if isinstance(obj, TimeSeriesVolume):
        header = {
            "kind": "ts4d",
            "dims": list(obj.meta.dims),
            "voxel_size_mm": list(obj.meta.voxel_size_mm),
            "tr_s": obj.meta.tr_s,
            "frames": obj.frames,
            "dtype": _dtype_tag(obj.data.dtype),
        }
        flat = obj.data.ravel(order="F")  # (x,y,z,t) F-order: x fastest, t slowest
    elif isinstance(obj, MultiChannelVolume):
        header = {
            "kind": "multichannel",
            "dims": list(obj.meta.dims),
            "voxel_size_mm": list(obj.meta.voxel_size_mm),
            "channels": obj.channels,
            "dtype": _dtype_tag(obj.data.dtype),
        }
        flat = np.moveaxis(obj.data, 0, -1).ravel(order="F")
    elif isinstance(obj, Atlas):
        header = {
            "kind": "atlas",
            "dims": list(obj.meta.dims),
            "voxel_size_mm": list(obj.meta.voxel_size_mm),
            "roi_count": obj.roi_count,
            "dtype": "i32le",
        }
        flat = obj.labels.ravel(order="F")
    elif isinstance(obj, Volume3D):
        header = {
            "kind": "vol3d",
            "dims": list(obj.meta.dims),
            "voxel_size_mm": list(obj.meta.voxel_size_mm),
            "dtype": _dtype_tag(obj.data.dtype),
        }
        flat = obj.data.ravel(order="F")
    else:
        raise FormatError(f"cannot serialize object of type {type(obj).__name__}")
    return header, np.ascontiguousarray(flat, dtype=flat.dtype.newbyteorder("<"))


def write_volume(obj, path, extra_header: dict | None = None) -> None:
    """Serialize a volume/atlas to a CVOL file (deterministic bytes)."""
    header, flat = _canonical_payload(obj)
    if extra_header:
        overlap = set(extra_header) & set(header)
        if overlap:
            raise FormatError(f"extra header keys collide with reserved keys: {sorted(overlap)}")
        header.update(extra_header)
    atomic_write_bytes(path, _container_bytes(CVOL_MAGIC, header, [flat.tobytes()]))


def read_volume(path):
    """Read a CVOL file into the in-memory type named by its header ``kind``."""
    header, payload = _read_container(path, CVOL_MAGIC)
    kind = header.get("kind")
    if kind not in ("ts4d", "vol3d", "multichannel", "atlas"):
        raise FormatError(f"{path}: unknown kind {kind!r}")
    try:
        dims = tuple(int(d) for d in header["dims"])
        vox = tuple(float(v) for v in header["voxel_size_mm"])
        dtag = header["dtype"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed header: {e}") from e
    if dtag not in _DTYPES:
        raise FormatError(f"{path}: unknown dtype {dtag!r}")
    if kind == "atlas" and dtag != "i32le":
        raise FormatError(f"{path}: atlas payload must be i32le, got {dtag}")
    if kind != "atlas" and dtag == "i32le":
        raise FormatError(f"{path}: {kind} payload must be floating point")
    dt = _DTYPES[dtag]
    n_vox = int(np.prod(dims))
    if kind == "ts4d":
        frames = int(header.get("frames", 0))
        expected = n_vox * frames
    elif kind == "multichannel":
        channels = int(header.get("channels", 0))
        expected = n_vox * channels
    else:
        expected = n_vox
    if len(payload) != expected * dt.itemsize:
        raise DimensionError(
            f"{path}: payload has {len(payload)} bytes, header implies {expected * dt.itemsize}"
        )
    flat = np.frombuffer(payload, dtype=dt)
    if kind != "atlas" and not np.isfinite(flat).all():
        raise NonFiniteError(f"{path}: non-finite values in payload")

    if kind == "vol3d":
        meta = GridMeta(dims, vox)
        return Volume3D(meta, flat.reshape(dims, order="F"))
    if kind == "ts4d":
        tr = header.get("tr_s")
        if tr is None:
            raise FormatError(f"{path}: ts4d header missing tr_s")
        meta = GridMeta(dims, vox, float(tr))
        return TimeSeriesVolume(meta, flat.reshape(dims + (frames,), order="F"))
    if kind == "multichannel":
        meta = GridMeta(dims, vox)
        data = np.moveaxis(flat.reshape(dims + (channels,), order="F"), -1, 0)
        return MultiChannelVolume(meta, data)
    # atlas
    meta = GridMeta(dims, vox)
    labels = flat.reshape(dims, order="F")
    roi_count = int(header.get("roi_count", labels.max(initial=0)))
    return Atlas(meta, labels, roi_count)


def read_volume_header(path) -> dict:
    header, _ = _read_container(path, CVOL_MAGIC)
    return header


# ---------------------------------------------------------------------------
# Dataset manifests
# ---------------------------------------------------------------------------

_ENTRY_KEYS = {"subject_id", "label", "timeseries_path", "fingerprint_path", "motion_params_path", "site"}


@dataclass
class ManifestEntry:
    subject_id: str
    label: int
    timeseries_path: str | None = None
    fingerprint_path: str | None = None
    motion_params_path: str | None = None
    site: str | None = None

    def to_dict(self) -> dict:
        d = {"subject_id": self.subject_id, "label": self.label}
        for k in ("timeseries_path", "fingerprint_path", "motion_params_path", "site"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.subject_id in seen:
                raise DuplicateSubject(f"duplicate subject_id {e.subject_id!r}")
            seen.add(e.subject_id)
            if e.label not in (0, 1):
                raise BadLabel(f"subject {e.subject_id!r}: label must be 0 or 1, got {e.label!r}")

    @property
    def subject_ids(self) -> list:
        return [e.subject_id for e in self.entries]

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def validate_for_training(self) -> None:
        labels = {e.label for e in self.entries}
        if labels != {0, 1}:
            raise BadLabel("training manifest needs at least one entry per class")


def write_manifest(manifest: DatasetManifest, path) -> None:
    doc = {"entries": [e.to_dict() for e in manifest.entries]}
    # entry order is meaningful; keys inside entries are sorted for determinism
    atomic_write_text(path, json.dumps(doc, sort_keys=True, separators=(",", ":"), indent=1) + "\n")


def read_manifest(path) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise FormatError(f"{path}: manifest must be an object with an 'entries' list")
    entries = []
    for i, raw in enumerate(doc["entries"]):
        if not isinstance(raw, dict):
            raise FormatError(f"{path}: entry {i} is not an object")
        unknown = set(raw) - _ENTRY_KEYS
        if unknown:
            raise FormatError(f"{path}: entry {i} has unknown keys {sorted(unknown)}")
        if "subject_id" not in raw or "label" not in raw:
            raise FormatError(f"{path}: entry {i} needs subject_id and label")
        label = raw["label"]
        if not isinstance(label, int) or isinstance(label, bool) or label not in (0, 1):
            raise BadLabel(f"{path}: entry {i}: label must be 0 or 1, got {label!r}")
        entries.append(
            ManifestEntry(
                subject_id=str(raw["subject_id"]),
                label=label,
                timeseries_path=raw.get("timeseries_path"),
                fingerprint_path=raw.get("fingerprint_path"),
                motion_params_path=raw.get("motion_params_path"),
                site=raw.get("site"),
            )
        )
    return DatasetManifest(entries)


def resolve_path(manifest_path, rel) -> str:
    """Resolve a manifest-relative path against the manifest's directory."""
    if os.path.isabs(rel):
        return rel
    return os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(manifest_path)), rel))


# ---------------------------------------------------------------------------
# Motion parameter files: one line per frame, 6 whitespace-separated reals
# (dx, dy, dz in mm; rx, ry, rz in radians)
# ---------------------------------------------------------------------------

def read_motion(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 values, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from e
    if not rows:
        raise FormatError(f"{path}: empty motion file")
    arr = np.array(rows, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{path}: non-finite motion parameters")
    return arr


def write_motion(motion: np.ndarray, path) -> None:
    motion = np.asarray(motion, dtype=np.float64)
    if motion.ndim != 2 or motion.shape[1] != 6:
        raise FormatError(f"motion array must be (T, 6), got {motion.shape}")
    lines = [" ".join(repr(float(v)) for v in row) for row in motion]
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    """Model architecture + parameter/optimizer arrays + training config.

    ``params`` and ``opt_state`` are ordered lists of (name, ndarray); the
    header records names, shapes and dtypes so loading validates blob sizes.
    """

    family: str
    architecture: list
    config: dict
    params: list
    opt_state: list
    atlas_id: str = ""
    epoch: int = 0
    train_subject_ids: list = field(default_factory=list)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    def describe(pairs):
        return [
            {"name": name, "shape": list(arr.shape), "dtype": _dtype_tag(arr.dtype)}
            for name, arr in pairs
        ]

    header = {
        "family": ckpt.family,
        "architecture": ckpt.architecture,
        "config": ckpt.config,
        "atlas_id": ckpt.atlas_id,
        "epoch": ckpt.epoch,
        "train_subject_ids": list(ckpt.train_subject_ids),
        "params": describe(ckpt.params),
        "opt_state": describe(ckpt.opt_state),
    }
    blobs = []
    for _, arr in list(ckpt.params) + list(ckpt.opt_state):
        blobs.append(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())
    atomic_write_bytes(path, _container_bytes(CKPT_MAGIC, header, blobs))


def load_checkpoint(path) -> Checkpoint:
    header, payload = _read_container(path, CKPT_MAGIC)
    for key in ("family", "architecture", "config", "params", "opt_state"):
        if key not in header:
            raise FormatError(f"{path}: checkpoint header missing {key!r}")

    def restore(descs, offset):
        out = []
        for d in descs:
            try:
                shape = tuple(int(s) for s in d["shape"])
                dt = _DTYPES[d["dtype"]]
                name = d["name"]
            except (KeyError, TypeError, ValueError) as e:
                raise FormatError(f"{path}: malformed blob descriptor: {e}") from e
            nbytes = int(np.prod(shape)) * dt.itemsize
            if offset + nbytes > len(payload):
                raise ArchitectureMismatch(
                    f"{path}: blob {name!r} needs {nbytes} bytes beyond payload end"
                )
            arr = np.frombuffer(payload, dtype=dt, count=int(np.prod(shape)), offset=offset)
            out.append((name, arr.reshape(shape).copy()))
            offset += nbytes
        return out, offset

    params, offset = restore(header["params"], 0)
    opt_state, offset = restore(header["opt_state"], offset)
    if offset != len(payload):
        raise ArchitectureMismatch(
            f"{path}: {len(payload) - offset} trailing payload bytes not covered by header"
        )
    return Checkpoint(
        family=header["family"],
        architecture=header["architecture"],
        config=header["config"],
        params=params,
        opt_state=opt_state,
        atlas_id=header.get("atlas_id", ""),
        epoch=int(header.get("epoch", 0)),
        train_subject_ids=list(header.get("train_subject_ids", [])),
    )
