import itertools

import numpy as np
import pytest

from conftest import random_trajectory_gaussian
from resin.errors import ProtocolError, RoutingError
from resin.network import (KIND_DETECTION_COUNTS, KIND_FUSED_PDF,
                           KIND_LOCAL_PDF, KIND_PLAN, MessageLedger,
                           TreeTopology, build_topology,
                           decode_detection_counts, decode_plan,
                           decode_trajectory, encode_detection_counts,
                           encode_plan, encode_trajectory)


def brute_force_mst_weight(positions):
    """Minimum spanning tree weight by enumerating all spanning trees."""
    ids = sorted(positions)
    n = len(ids)
    all_edges = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1:]]
    best = np.inf
    for combo in itertools.combinations(all_edges, n - 1):
        parent = {i: i for i in ids}

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for a, b in combo:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            w = sum(np.linalg.norm(np.subtract(positions[a], positions[b]))
                    for a, b in combo)
            best = min(best, w)
    return best


class TestTopology:
    def test_single_sensor(self):
        t = build_topology({4: (1.0, 1.0)}, "proximity")
        assert t.root == 4 and t.nodes == (4,)
        assert t.parent == {4: None}

    def test_collinear_chain(self):
        t = build_topology({0: (0.0, 0.0), 1: (1.0, 0.0), 2: (10.0, 0.0)},
                           "proximity")
        assert set(map(frozenset, t.edges())) == {frozenset({0, 1}),
                                                  frozenset({1, 2})}
        weight = sum(np.linalg.norm(np.subtract((0, 0), (1, 0)))
                     for _ in [0]) + 9.0
        assert brute_force_mst_weight(
            {0: (0, 0), 1: (1, 0), 2: (10, 0)}) == pytest.approx(weight)

    def test_square_mst_minimal(self):
        positions = {0: (0.0, 0.0), 1: (1.0, 0.0), 2: (1.0, 1.0),
                     3: (0.0, 1.0)}
        t = build_topology(positions, "proximity")
        assert len(t.edges()) == 3
        got = sum(np.linalg.norm(np.subtract(positions[a], positions[b]))
                  for a, b in t.edges())
        assert got == pytest.approx(brute_force_mst_weight(positions))

    def test_random_layouts_match_brute_force(self, rng):
        for _ in range(5):
            positions = {i: tuple(rng.uniform(0, 10, 2)) for i in range(5)}
            t = build_topology(positions, "proximity")
            got = sum(np.linalg.norm(np.subtract(positions[a], positions[b]))
                      for a, b in t.edges())
            assert got == pytest.approx(brute_force_mst_weight(positions))

    def test_static_mode(self):
        t = build_topology({0: (0, 0), 1: (1, 0), 2: (2, 0)}, "static",
                           static_parent={0: None, 1: 0, 2: 0})
        assert t.root == 0 and t.children(0) == [1, 2]
        assert t.derivation == "static-config"

    def test_static_not_spanning_rejected(self):
        with pytest.raises(ProtocolError):
            build_topology({0: (0, 0), 1: (1, 0), 2: (2, 0)}, "static",
                           static_parent={0: None, 1: 0, 2: 5})

    def test_cycle_rejected(self):
        with pytest.raises(ProtocolError):
            TreeTopology((0, 1, 2), {0: None, 1: 2, 2: 1}, 0)

    def test_connectivity_radius_enforced(self):
        with pytest.raises(ProtocolError):
            build_topology({0: (0, 0), 1: (100, 0)}, "proximity",
                           connectivity_radius=5.0)

    def test_path_routing(self):
        t = build_topology({j: (float(j), 0.0) for j in range(5)},
                           "proximity")
        assert t.path(0, 4) == [0, 1, 2, 3, 4]
        assert t.path(3, 1) == [3, 2, 1]
        assert t.path(2, 2) == [2]


class TestLedger:
    def _tree(self):
        return build_topology({j: (float(j), 0.0) for j in range(4)},
                              "proximity")

    def test_adjacent_send_recorded(self):
        led = MessageLedger()
        rec = led.send(1, 0, 1, KIND_DETECTION_COUNTS, b"xyz", self._tree())
        assert rec.payload_bytes == 3
        assert led.query() == {"messages": 1, "bytes": 3}

    def test_non_adjacent_send_rejected(self):
        led = MessageLedger()
        with pytest.raises(RoutingError):
            led.send(0, 0, 3, KIND_DETECTION_COUNTS, b"x", self._tree())

    def test_route_multi_hop(self):
        led = MessageLedger()
        recs = led.route(0, 0, 3, KIND_PLAN, b"abcd", self._tree())
        assert [(r.src, r.dst) for r in recs] == [(0, 1), (1, 2), (2, 3)]
        assert all(r.payload_bytes == 4 for r in recs)

    def test_totals_are_sum_of_records(self, rng):
        led = MessageLedger()
        tree = self._tree()
        total = 0
        for k in range(20):
            size = int(rng.integers(1, 50))
            led.send(k % 3, 1, 2, KIND_LOCAL_PDF, bytes(size), tree)
            total += size
        q = led.query()
        assert q["bytes"] == total == sum(r.payload_bytes for r in led.records)
        per_round = sum(led.query(round_id=r)["bytes"] for r in range(3))
        assert per_round == total

    def test_csv_export(self, tmp_path):
        led = MessageLedger()
        led.send(0, 0, 1, KIND_FUSED_PDF, b"abc", self._tree())
        path = tmp_path / "messages.csv"
        led.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "round,from,to,kind,bytes"
        assert lines[1] == "0,0,1,fused-pdf,3"


class TestSerialization:
    def test_detection_counts_layout(self, rng):
        counts = rng.integers(0, 9, size=(8, 5))
        payload = encode_detection_counts(3, 12, counts)
        assert len(payload) == 13 + 2 * 8 * 5
        rid, k, back = decode_detection_counts(payload)
        assert (rid, k) == (3, 12)
        assert np.array_equal(back, counts)

    def test_trajectory_roundtrip(self, rng):
        tg = random_trajectory_gaussian(rng, horizon=5)
        payload = encode_trajectory(KIND_FUSED_PDF, 7, 2, tg, 3)
        assert len(payload) == 15 + 40 * 5
        kind, rid, tid, back, ncontrib = decode_trajectory(payload)
        assert (kind, rid, tid, ncontrib) == (KIND_FUSED_PDF, 7, 2, 3)
        assert np.allclose(back.mean, tg.mean)
        assert np.allclose(back.cov_blocks, tg.cov_blocks)

    def test_pdf_size_grows_with_horizon_not_contributors(self, rng):
        a = encode_trajectory(KIND_LOCAL_PDF, 0, 0,
                              random_trajectory_gaussian(rng, horizon=5), 1)
        b = encode_trajectory(KIND_LOCAL_PDF, 0, 0,
                              random_trajectory_gaussian(rng, horizon=5), 16)
        c = encode_trajectory(KIND_LOCAL_PDF, 0, 0,
                              random_trajectory_gaussian(rng, horizon=9), 1)
        assert len(a) == len(b)
        assert len(c) == len(a) + 40 * 4

    def test_plan_roundtrip(self, rng):
        controls = rng.uniform(-1, 1, size=(5, 2))
        payload = encode_plan(4, 2, controls)
        assert len(payload) == 9 + 16 * 5
        rid, sid, back = decode_plan(payload)
        assert (rid, sid) == (4, 2)
        assert np.array_equal(back, controls)
