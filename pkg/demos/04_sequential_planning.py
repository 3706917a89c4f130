"""Walk through one sequential planning round and its constant-size messages.

Three sensors plan in sequence over two predicted target tracks. The script
prints each sensor's objective value, how the detection counts evolve, and
the byte size of every message that would cross the network.
"""

import numpy as np

from resin.fusion import FusedTrajectory
from resin.gp import TrajectoryGaussian
from resin.network import MessageLedger, build_topology
from resin.planner import sequential_round
from resin.world import SensorState

H = 5
tracks = {
    0: np.array([[4.0 + 0.8 * t, 6.0] for t in range(1, H + 1)]),
    1: np.array([[12.0, 2.0 + 0.6 * t] for t in range(1, H + 1)]),
}
fused = {i: FusedTrajectory(
    TrajectoryGaussian(0, pts.ravel(), np.stack([0.8 * np.eye(2)] * H)),
    frozenset([0, 1, 2])) for i, pts in tracks.items()}

sensors = {
    0: SensorState(np.array([2.0, 4.0]), 0.0, 1.0, 5.0),
    1: SensorState(np.array([6.0, 4.0]), 0.0, 1.0, 5.0),
    2: SensorState(np.array([10.0, 4.0]), 0.0, 1.0, 5.0),
}
topo = build_topology({j: s.position for j, s in sensors.items()},
                      "proximity")
ledger = MessageLedger()

plans = sequential_round(sensors, fused, [0, 1, 2], dt=0.5,
                         noise_cov=0.01 * np.eye(2), budget=300, seed=7,
                         topology=topo, ledger=ledger, round_id=0)

for j, plan in sorted(plans.items()):
    path = " -> ".join(f"({s.position[0]:.1f},{s.position[1]:.1f})"
                       for s in plan.states)
    print(f"sensor {j}: objective {plan.value:6.3f}  "
          f"({plan.evaluations} evaluations)\n  path {path}")

print("\nmessages (payload is always the full M x H count table):")
for rec in ledger.records:
    print(f"  round {rec.round}: {rec.src} -> {rec.dst}  "
          f"{rec.kind:17s} {rec.payload_bytes} bytes")
