"""Device dataset: schema, CSV load/save, synthetic generator.

Directory layout (all files have a header row)::

    nodes.csv           id,x,y,device_type
    links.csv           src,dst
    friendships.csv     src,dst
    interests.csv       node_id,interest_id
    collaborations.csv  task_id,members,success   (members ';'-separated, success 0|1)
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rng import make_rng

FILES = ("nodes.csv", "links.csv", "friendships.csv", "interests.csv", "collaborations.csv")


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    positions: np.ndarray
    device_types: list[str]
    links: list[tuple[int, int]] = field(default_factory=list)
    friendships: list[tuple[int, int]] = field(default_factory=list)
    interests: dict[int, set[int]] = field(default_factory=dict)
    collaborations: list[tuple[tuple[int, ...], bool]] = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.device_types = [str(t) for t in self.device_types]
        self.links = [(int(a), int(b)) for a, b in self.links]
        self.friendships = [(int(a), int(b)) for a, b in self.friendships]
        interests = {i: set() for i in range(self.num_devices)}
        for k, v in self.interests.items():
            interests[int(k)] = {int(b) for b in v}
        self.interests = interests
        self.collaborations = [(tuple(sorted(int(m) for m in ms)), bool(ok)) for ms, ok in self.collaborations]

    @property
    def num_devices(self) -> int:
        return len(self.positions)

    @property
    def interest_total(self) -> int:
        ids = [b for v in self.interests.values() for b in v]
        return max(ids) + 1 if ids else 0

    def validate(self) -> None:
        n = self.num_devices
        if len(self.device_types) != n:
            raise DatasetError(f"{len(self.device_types)} device types for {n} devices")
        if n and (not np.isfinite(self.positions).all() or self.positions.min() < 0 or self.positions.max() > 1):
            raise DatasetError("positions must lie in [0, 1]^2")
        for label, pairs in (("links", self.links), ("friendships", self.friendships)):
            for a, b in pairs:
                if a == b:
                    raise DatasetError(f"{label}: self-loop ({a}, {b})")
                if not (0 <= a < n and 0 <= b < n):
                    raise DatasetError(f"{label}: pair ({a}, {b}) references an unknown device")
        for dev, ints in self.interests.items():
            if not 0 <= dev < n:
                raise DatasetError(f"interests: unknown device {dev}")
            if any(b < 0 for b in ints):
                raise DatasetError(f"interests: negative interest id for device {dev}")
        for members, _ in self.collaborations:
            if len(set(members)) < 2:
                raise DatasetError(f"collaboration {members} has fewer than 2 members")
            if any(not 0 <= m < n for m in members):
                raise DatasetError(f"collaboration {members} references an unknown device")

    def subset(self, size: int) -> "Dataset":
        """First ``size`` devices by id, with every record restricted to them."""
        keep = lambda pairs: [(a, b) for a, b in pairs if a < size and b < size]  # noqa: E731
        collabs = []
        for members, ok in self.collaborations:
            kept = tuple(m for m in members if m < size)
            if len(kept) >= 2:
                collabs.append((kept, ok))
        return Dataset(
            self.positions[:size].copy(),
            self.device_types[:size],
            keep(self.links),
            keep(self.friendships),
            {i: set(self.interests.get(i, ())) for i in range(size)},
            collabs,
        )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.positions, other.positions)
            and self.device_types == other.device_types
            and self.links == other.links
            and self.friendships == other.friendships
            and self.interests == other.interests
            and self.collaborations == other.collaborations
        )


# --- CSV I/O -----------------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def save_dataset(ds: Dataset, directory) -> None:
    d = Path(directory)
    nodes = [(i, repr(float(x)), repr(float(y)), t) for i, ((x, y), t) in enumerate(zip(ds.positions, ds.device_types))]
    interests = [(i, b) for i in sorted(ds.interests) for b in sorted(ds.interests[i])]
    collabs = [(t, ";".join(map(str, m)), int(ok)) for t, (m, ok) in enumerate(ds.collaborations)]
    atomic_write_text(d / "nodes.csv", csv_text(("id", "x", "y", "device_type"), nodes))
    atomic_write_text(d / "links.csv", csv_text(("src", "dst"), ds.links))
    atomic_write_text(d / "friendships.csv", csv_text(("src", "dst"), ds.friendships))
    atomic_write_text(d / "interests.csv", csv_text(("node_id", "interest_id"), interests))
    atomic_write_text(d / "collaborations.csv", csv_text(("task_id", "members", "success"), collabs))


def _read(path: Path, header: tuple[str, ...]):
    if not path.exists():
        raise DatasetError(f"{path}: missing file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(c.strip() for c in rows[0]) != header:
        raise DatasetError(f"{path}:1: expected header {','.join(header)}")
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, [c.strip() for c in row]


def _int(path, lineno, text) -> int:
    try:
        return int(text)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: not an integer: {text!r}") from None


def load_dataset(directory) -> Dataset:
    d = Path(directory)
    if not d.is_dir():
        raise DatasetError(f"{d}: not a directory")

    p = d / "nodes.csv"
    nodes = {}
    for ln, (i, x, y, t) in _read(p, ("id", "x", "y", "device_type")):
        idx = _int(p, ln, i)
        try:
            xy = (float(x), float(y))
        except ValueError:
            raise DatasetError(f"{p}:{ln}: malformed position ({x!r}, {y!r})") from None
        if not all(np.isfinite(xy)) or not all(0.0 <= c <= 1.0 for c in xy):
            raise DatasetError(f"{p}:{ln}: position {xy} outside [0, 1]^2")
        if idx in nodes:
            raise DatasetError(f"{p}:{ln}: duplicate device id {idx}")
        nodes[idx] = (xy, t)
    n = len(nodes)
    if sorted(nodes) != list(range(n)):
        raise DatasetError(f"{p}: device ids must be dense 0..{n - 1}")

    def check_id(path, ln, v):
        if not 0 <= v < n:
            raise DatasetError(f"{path}:{ln}: unknown device id {v}")
        return v

    def pairs(name):
        path = d / name
        out = []
        for ln, (a, b) in _read(path, ("src", "dst")):
            a, b = check_id(path, ln, _int(path, ln, a)), check_id(path, ln, _int(path, ln, b))
            if a == b:
                raise DatasetError(f"{path}:{ln}: self-loop ({a}, {b})")
            out.append((a, b))
        return out

    links, friendships = pairs("links.csv"), pairs("friendships.csv")

    p = d / "interests.csv"
    interests: dict[int, set[int]] = {i: set() for i in range(n)}
    for ln, (node, b) in _read(p, ("node_id", "interest_id")):
        node, b = check_id(p, ln, _int(p, ln, node)), _int(p, ln, b)
        if b < 0:
            raise DatasetError(f"{p}:{ln}: negative interest id {b}")
        interests[node].add(b)

    p = d / "collaborations.csv"
    collabs = []
    for ln, (_, members, ok) in _read(p, ("task_id", "members", "success")):
        ms = tuple(check_id(p, ln, _int(p, ln, m)) for m in members.split(";") if m.strip())
        if len(set(ms)) < 2:
            raise DatasetError(f"{p}:{ln}: collaboration needs at least 2 members")
        if ok not in ("0", "1"):
            raise DatasetError(f"{p}:{ln}: success must be 0 or 1, got {ok!r}")
        collabs.append((ms, ok == "1"))

    positions = np.array([nodes[i][0] for i in range(n)], dtype=np.float64).reshape(-1, 2)
    ds = Dataset(positions, [nodes[i][1] for i in range(n)], links, friendships, interests, collabs)
    ds.validate()
    return ds


# --- synthetic generator -------------------------------------------------------------


@dataclass
class SynthKnobs:
    friend_prob: float = 0.06
    link_prob: float = 0.05
    n_interests: int = 20
    interests_per_device: int = 2
    n_collabs: int = 120
    collab_success_rate: float = 0.8
    n_types: int = 3
    friend_bias: float = 4.0  # extra selection weight for friends of current members
    n_communities: int | None = None  # None: max(2, round(sqrt(n))), the proximity-cluster rule
    homophily: float = 0.8  # 0: plain Erdos-Renyi; 1: no cross-community pairs


def communities_of(positions: np.ndarray, n_communities: int | None, seed: int) -> np.ndarray:
    """Spatial k-means clusters of the device positions: friends and links favour nearby devices."""
    from .relations import default_cluster_count, kmeans

    k = default_cluster_count(len(positions)) if n_communities is None else min(n_communities, len(positions))
    return kmeans(positions, k, seed=seed).labels


def _er_pairs(n: int, p: float, rng, community=None, homophily: float = 0.0) -> list[tuple[int, int]]:
    """Random undirected pairs; with communities, same-community pairs get
    ``p * (1 + h (C - 1))`` and others ``p * (1 - h)``."""
    iu, ju = np.triu_indices(n, k=1)
    probs = np.full(iu.size, p)
    if community is not None and homophily > 0:
        c = int(community.max()) + 1
        same = community[iu] == community[ju]
        probs = np.where(same, p * (1.0 + homophily * (c - 1)), p * (1.0 - homophily))
    keep = rng.random(iu.size) < np.minimum(probs, 1.0)
    return [(int(a), int(b)) for a, b in zip(iu[keep], ju[keep])]


def generate_synthetic(n: int = 76, seed: int = 0, knobs: SynthKnobs | None = None) -> Dataset:
    """Schema-complete random dataset; every sampling decision uses integer-seeded Philox streams."""
    k = knobs or SynthKnobs()
    if n < 2:
        raise ValueError("need at least 2 devices")
    for name in ("friend_prob", "link_prob", "collab_success_rate"):
        if not 0.0 <= getattr(k, name) <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if k.interests_per_device > k.n_interests:
        raise ValueError("interests_per_device exceeds n_interests")
    if not 0.0 <= k.homophily <= 1.0 or (k.n_communities is not None and k.n_communities < 1):
        raise ValueError("homophily must lie in [0, 1] and n_communities be >= 1")

    positions = make_rng(seed, "positions").random((n, 2))
    types = [f"type{t}" for t in make_rng(seed, "types").integers(0, k.n_types, size=n)]
    community = communities_of(positions, k.n_communities, seed)
    friendships = _er_pairs(n, k.friend_prob, make_rng(seed, "friendships"), community, k.homophily)
    links = _er_pairs(n, k.link_prob, make_rng(seed, "links"), community, k.homophily)

    rng = make_rng(seed, "interests")
    interests = {
        i: {int(b) for b in rng.choice(k.n_interests, size=k.interests_per_device, replace=False)}
        for i in range(n)
    }

    friends = [set() for _ in range(n)]
    for a, b in friendships:
        friends[a].add(b)
        friends[b].add(a)
    rng = make_rng(seed, "collaborations")
    collabs = []
    for _ in range(k.n_collabs):
        size = int(rng.integers(2, min(4, n) + 1))
        members = [int(rng.integers(n))]
        while len(members) < size:
            w = np.ones(n)
            for m in members:
                for f in friends[m]:
                    w[f] = 1.0 + k.friend_bias
            w[members] = 0.0
            members.append(int(rng.choice(n, p=w / w.sum())))
        collabs.append((tuple(sorted(members)), bool(rng.random() < k.collab_success_rate)))

    return Dataset(positions, types, links, friendships, interests, collabs)
