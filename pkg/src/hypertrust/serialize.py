"""File formats for checkpoints, embeddings, rankings, graphs and run metadata.

Checkpoint (all integers little-endian)::

    b"HTCKPT\\0\\0"              8-byte magic
    uint32 version              currently 1
    32 bytes                    SHA-256 of the canonical config JSON
    uint32 len + bytes          canonical config JSON (utf-8)
    uint32 tensor count
    per tensor:  uint16 name length, name (utf-8), uint32 ndim, uint64 dims...
    per tensor, same order: float64 values, row-major
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .data import atomic_write_bytes, atomic_write_text, csv_text
from .hypergraph import Hypergraph, Hyperedge, RelationKind
from .model import HgnnParams
from .trust import TrustRanking

MAGIC = b"HTCKPT\x00\x00"
VERSION = 1


class FormatError(ValueError):
    pass


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def fmt_float(v: float) -> str:
    return format(float(v), ".17g")


# --- checkpoint ------------------------------------------------------------------------


def checkpoint_bytes(params: HgnnParams, config: dict) -> bytes:
    cfg = canonical_json(config).encode()
    tensors = params.as_dict()
    out = [MAGIC, struct.pack("<I", VERSION), hashlib.sha256(cfg).digest(), struct.pack("<I", len(cfg)), cfg]
    out.append(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode()
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    for arr in tensors.values():
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def save_checkpoint(path, params: HgnnParams, config: dict) -> None:
    atomic_write_bytes(path, checkpoint_bytes(params, config))


def load_checkpoint(path) -> tuple[HgnnParams, dict]:
    buf = Path(path).read_bytes()
    try:
        return _parse_checkpoint(path, buf)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None


def _parse_checkpoint(path, buf: bytes) -> tuple[HgnnParams, dict]:
    if buf[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    (version,) = struct.unpack_from("<I", buf, 8)
    if version != VERSION:
        raise FormatError(f"{path}: checkpoint version {version}, expected {VERSION}")
    digest = buf[12:44]
    (clen,) = struct.unpack_from("<I", buf, 44)
    pos = 48
    cfg_raw = buf[pos:pos + clen]
    pos += clen
    if hashlib.sha256(cfg_raw).digest() != digest:
        raise FormatError(f"{path}: config hash mismatch")
    config = json.loads(cfg_raw)
    (count,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    shapes = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        dims = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        shapes.append((name, dims))
    tensors = {}
    for name, dims in shapes:
        size = int(np.prod(dims))
        arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(dims).astype(np.float64)
        pos += 8 * size
        tensors[name] = arr
    if pos != len(buf):
        raise FormatError(f"{path}: {len(buf) - pos} trailing bytes")
    return HgnnParams.from_dict(tensors, config.get("activation", "relu")), config


# --- embeddings ----------------------------------------------------------------------------


def save_embeddings(path, x: np.ndarray) -> None:
    x = np.asarray(x, dtype=np.float64)
    header = ["device_id"] + [f"e{k}" for k in range(x.shape[1])]
    rows = [[i] + [fmt_float(v) for v in row] for i, row in enumerate(x)]
    atomic_write_text(path, csv_text(header, rows))


def load_embeddings(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    if [int(r[0]) for r in body] != list(range(len(body))):
        raise FormatError(f"{path}: device ids must be 0..n-1 in order")
    x = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64)
    if not np.isfinite(x).all():
        raise FormatError(f"{path}: non-finite embedding value")
    return x


# --- rankings ------------------------------------------------------------------------


def ranking_csv(rankings: list[TrustRanking], top: int | None = None) -> str:
    rows = []
    for r in rankings:
        for pos, (dev, t) in enumerate(r.entries[:top] if top else r.entries, start=1):
            rows.append((r.initiator, pos, dev, fmt_float(t)))
    return csv_text(("initiator", "rank", "device_id", "trust"), rows)


def save_rankings(path, rankings: list[TrustRanking], top: int | None = None) -> None:
    atomic_write_text(path, ranking_csv(rankings, top))


def load_rankings(path) -> list[TrustRanking]:
    by_init: dict[int, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_init.setdefault(int(row["initiator"]), []).append((int(row["device_id"]), float(row["trust"])))
    return [TrustRanking(i, e) for i, e in by_init.items()]


def save_rankings_json(path, rankings: list[TrustRanking], metadata: dict, top: int | None = None) -> None:
    doc = {
        "metadata": metadata,
        "rankings": [
            {
                "initiator": r.initiator,
                "entries": [{"device_id": d, "trust": t} for d, t in (r.entries[:top] if top else r.entries)],
            }
            for r in rankings
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --- hypergraph --------------------------------------------------------------------------


def graph_to_dict(g: Hypergraph) -> dict:
    return {
        "num_devices": g.num_devices,
        "hyperedges": [{"members": list(e.members), "weight": e.weight, "kind": e.kind.value} for e in g.hyperedges],
    }


def graph_from_dict(doc: dict) -> Hypergraph:
    edges = [Hyperedge(tuple(e["members"]), float(e["weight"]), RelationKind(e["kind"])) for e in doc["hyperedges"]]
    return Hypergraph(int(doc["num_devices"]), edges)


def save_graph(path, g: Hypergraph) -> None:
    atomic_write_text(path, json.dumps(graph_to_dict(g), sort_keys=True) + "\n")


def load_graph(path) -> Hypergraph:
    return graph_from_dict(json.loads(Path(path).read_text()))


# --- metadata ---------------------------------------------------------------------------


def save_metadata(path, metadata: dict) -> None:
    atomic_write_text(path, json.dumps(metadata, indent=2, sort_keys=True) + "\n")


def load_metadata(path) -> dict:
    return json.loads(Path(path).read_text())


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
