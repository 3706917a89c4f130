"""Simulated message layer: spanning trees, deterministic delivery, byte ledger.

No channel realism is modeled (no loss, latency, or bandwidth); the job of
this layer is to account for what would cross the wire. Payloads use the
fixed binary layouts below, so message sizes in the ledger are exact.

Wire layouts (little-endian):

  detection-counts  header  <BIIHH  kind, round, start_step, H, M   (13 bytes)
                    body    M*H uint16 counts, target-major

  local-pdf /       header  <BIHiHH kind, round, target, start_step,
  fused-pdf                         H, contributor_count            (15 bytes)
                    body    2H float64 means, then 3H float64 block entries
                            (xx, yy, xy per step)

  plan-broadcast    header  <BIHH   kind, round, sensor, H          (9 bytes)
                    body    2H float64 controls (accel, turn per step)
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ProtocolError, RoutingError
from .gp import TrajectoryGaussian

KIND_LOCAL_PDF = "local-pdf"
KIND_FUSED_PDF = "fused-pdf"
KIND_DETECTION_COUNTS = "detection-counts"
KIND_PLAN = "plan-broadcast"

_KIND_CODES = {KIND_LOCAL_PDF: 1, KIND_FUSED_PDF: 2,
               KIND_DETECTION_COUNTS: 3, KIND_PLAN: 4}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class TreeTopology:
    """Rooted spanning tree over sensor ids."""

    nodes: tuple
    parent: dict
    root: int
    derivation: str = "static-config"

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes))
        object.__setattr__(self, "nodes", nodes)
        if self.root not in nodes:
            raise ProtocolError("root is not among the nodes")
        roots = [n for n in nodes if self.parent.get(n) is None]
        if roots != [self.root]:
            raise ProtocolError("tree must have exactly one root")
        for n in nodes:
            seen = set()
            cur = n
            while cur is not None:
                if cur in seen:
                    raise ProtocolError("parent map contains a cycle")
                seen.add(cur)
                if cur not in self.parent:
                    raise ProtocolError(f"node {cur} missing from parent map")
                cur = self.parent[cur]
            if self.root not in seen:
                raise ProtocolError(f"node {n} is not connected to the root")

    def children(self, node) -> list:
        return sorted(n for n in self.nodes if self.parent[n] == node)

    def edges(self) -> list:
        return [(self.parent[n], n) for n in self.nodes if n != self.root]

    def adjacency(self) -> dict:
        adj = {n: set() for n in self.nodes}
        for p, c in self.edges():
            adj[p].add(c)
            adj[c].add(p)
        return adj

    def is_adjacent(self, a, b) -> bool:
        return self.parent.get(a) == b or self.parent.get(b) == a

    def path(self, src, dst) -> list:
        """Node sequence from src to dst along the tree."""
        up_src = [src]
        while self.parent[up_src[-1]] is not None:
            up_src.append(self.parent[up_src[-1]])
        up_dst = [dst]
        while self.parent[up_dst[-1]] is not None:
            up_dst.append(self.parent[up_dst[-1]])
        anc = set(up_src)
        meet = next(n for n in up_dst if n in anc)
        a = up_src[:up_src.index(meet) + 1]
        b = up_dst[:up_dst.index(meet)]
        return a + b[::-1]


def build_topology(positions: dict, mode: str = "proximity",
                   static_parent: dict | None = None,
                   static_root: int | None = None,
                   connectivity_radius: float | None = None) -> TreeTopology:
    """Build the communication tree for one round.

    proximity mode computes the minimum spanning tree over pairwise sensor
    distances (deterministic tie-breaking by id) rooted at the lowest id;
    static mode wraps a configured parent map. A connectivity radius, when
    given, rejects proximity trees that would need a longer edge.
    """
    ids = sorted(positions)
    if not ids:
        raise ProtocolError("at least one sensor is required")
    if mode == "static":
        if static_parent is None:
            raise ProtocolError("static topology requires a parent map")
        root = static_root
        if root is None:
            roots = [n for n, p in static_parent.items() if p is None]
            if len(roots) != 1:
                raise ProtocolError("static parent map must define one root")
            root = roots[0]
        return TreeTopology(tuple(ids), dict(static_parent), root, "static-config")
    if mode != "proximity":
        raise ProtocolError(f"unknown topology mode {mode!r}")
    if len(ids) == 1:
        return TreeTopology((ids[0],), {ids[0]: None}, ids[0], "proximity-MST")

    pts = {i: np.asarray(positions[i], dtype=float) for i in ids}
    edges = sorted(
        (float(np.linalg.norm(pts[a] - pts[b])), a, b)
        for i, a in enumerate(ids) for b in ids[i + 1:])
    comp = {i: i for i in ids}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    chosen = []
    for d, a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            if connectivity_radius is not None and d > connectivity_radius:
                raise ProtocolError(
                    f"sensors are not connectable within radius "
                    f"{connectivity_radius}")
            comp[ra] = rb
            chosen.append((a, b))
            if len(chosen) == len(ids) - 1:
                break

    adj = {i: set() for i in ids}
    for a, b in chosen:
        adj[a].add(b)
        adj[b].add(a)
    root = ids[0]
    parent = {root: None}
    stack = [root]
    while stack:
        node = stack.pop()
        for nb in sorted(adj[node], reverse=True):
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    return TreeTopology(tuple(ids), parent, root, "proximity-MST")


@dataclass(frozen=True)
class MessageRecord:
    round: int
    src: int
    dst: int
    kind: str
    payload_bytes: int


@dataclass
class MessageLedger:
    """Append-only record of every message, for byte accounting."""

    records: list = field(default_factory=list)

    def send(self, round_id: int, src: int, dst: int, kind: str,
             payload: bytes, topology: TreeTopology) -> MessageRecord:
        if not topology.is_adjacent(src, dst):
            raise RoutingError(f"{src} and {dst} are not adjacent in the tree")
        rec = MessageRecord(round_id, src, dst, kind, len(payload))
        self.records.append(rec)
        return rec

    def route(self, round_id: int, src: int, dst: int, kind: str,
              payload: bytes, topology: TreeTopology) -> list:
        """Multi-hop delivery as successive edge messages with the same payload."""
        nodes = topology.path(src, dst)
        return [self.send(round_id, a, b, kind, payload, topology)
                for a, b in zip(nodes[:-1], nodes[1:])]

    def query(self, round_id: int | None = None, kind: str | None = None) -> dict:
        recs = [r for r in self.records
                if (round_id is None or r.round == round_id)
                and (kind is None or r.kind == kind)]
        return {"messages": len(recs),
                "bytes": sum(r.payload_bytes for r in recs)}

    def records_for(self, round_id: int | None = None,
                    kind: str | None = None) -> list:
        return [r for r in self.records
                if (round_id is None or r.round == round_id)
                and (kind is None or r.kind == kind)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "from", "to", "kind", "bytes"])
            for r in self.records:
                w.writerow([r.round, r.src, r.dst, r.kind, r.payload_bytes])


# -- serializers ------------------------------------------------------------


def encode_detection_counts(round_id: int, start_step: int,
                            counts: np.ndarray) -> bytes:
    c = np.asarray(counts)
    if c.ndim != 2:
        raise ValueError("counts must be an (M, H) array")
    m, h = c.shape
    head = struct.pack("<BIIHH", _KIND_CODES[KIND_DETECTION_COUNTS],
                       round_id, start_step, h, m)
    body = c.astype("<u2").tobytes()
    return head + body


def decode_detection_counts(payload: bytes):
    kind, round_id, start_step, h, m = struct.unpack_from("<BIIHH", payload)
    if _CODE_KINDS[kind] != KIND_DETECTION_COUNTS:
        raise ValueError("payload is not a detection-counts message")
    body = np.frombuffer(payload, dtype="<u2", offset=13, count=m * h)
    return round_id, start_step, body.reshape(m, h).astype(np.int64)


def encode_trajectory(kind: str, round_id: int, target_id: int,
                      tg: TrajectoryGaussian, contributor_count: int) -> bytes:
    if kind not in (KIND_LOCAL_PDF, KIND_FUSED_PDF):
        raise ValueError("trajectory payloads must be local-pdf or fused-pdf")
    h = tg.horizon
    head = struct.pack("<BIHiHH", _KIND_CODES[kind], round_id, target_id,
                       tg.start_step, h, contributor_count)
    blocks = tg.scaled_blocks
    tri = np.column_stack([blocks[:, 0, 0], blocks[:, 1, 1], blocks[:, 0, 1]])
    return head + tg.mean.astype("<f8").tobytes() + tri.astype("<f8").ravel().tobytes()


def decode_trajectory(payload: bytes):
    kind, round_id, target_id, start_step, h, n_contrib = struct.unpack_from(
        "<BIHiHH", payload)
    mean = np.frombuffer(payload, dtype="<f8", offset=15, count=2 * h)
    tri = np.frombuffer(payload, dtype="<f8", offset=15 + 16 * h,
                        count=3 * h).reshape(h, 3)
    blocks = np.zeros((h, 2, 2))
    blocks[:, 0, 0] = tri[:, 0]
    blocks[:, 1, 1] = tri[:, 1]
    blocks[:, 0, 1] = tri[:, 2]
    blocks[:, 1, 0] = tri[:, 2]
    tg = TrajectoryGaussian(start_step, mean.copy(), blocks)
    return _CODE_KINDS[kind], round_id, target_id, tg, n_contrib


def encode_plan(round_id: int, sensor_id: int, controls: np.ndarray) -> bytes:
    c = np.asarray(controls, dtype=float)
    if c.ndim != 2 or c.shape[1] != 2:
        raise ValueError("controls must be an (H, 2) array")
    head = struct.pack("<BIHH", _KIND_CODES[KIND_PLAN], round_id, sensor_id,
                       c.shape[0])
    return head + c.astype("<f8").tobytes()


def decode_plan(payload: bytes):
    kind, round_id, sensor_id, h = struct.unpack_from("<BIHH", payload)
    if _CODE_KINDS[kind] != KIND_PLAN:
        raise ValueError("payload is not a plan-broadcast message")
    c = np.frombuffer(payload, dtype="<f8", offset=9, count=2 * h).reshape(h, 2)
    return round_id, sensor_id, c.copy()
