"""Draw one target path per motion pattern kind.

Each pattern is an analytic velocity field; the drawn curves come from the
closed-form positions, and the dots show a midpoint-integrated rollout to
confirm the two agree.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from resin.world import TrajectoryGenerator, spawn_target, step_target

PATTERNS = [
    ("circle", {"center": [5, 5], "radius": 3, "angular_rate": 0.3}),
    ("figure-eight", {"center": [5, 5], "ax": 3.5, "ay": 2.5,
                      "angular_rate": 0.25}),
    ("sine-lane", {"start": [1, 5], "direction": 0.0, "length": 8,
                   "rate": 0.25, "amplitude": 1.2, "wiggle_rate": 0.9}),
    ("straight-bounce", {"start": [2, 2], "direction": 0.9, "length": 7,
                         "rate": 0.3}),
    ("spiral", {"center": [5, 5], "radius": 2.0, "radius_swing": 1.3,
                "swing_rate": 0.22, "angular_rate": 0.5}),
    ("random-waypoint", {"seed": 11, "count": 6, "low": [1, 1],
                         "high": [9, 9], "cruise_speed": 1.0}),
]

fig, axes = plt.subplots(2, 3, figsize=(12, 8))
dt = 0.5
for ax, (kind, params) in zip(axes.ravel(), PATTERNS):
    gen = TrajectoryGenerator(kind, params)
    ts = np.linspace(0, 40, 600)
    path = np.array([gen.position(t) for t in ts])
    ax.plot(path[:, 0], path[:, 1], "-", lw=1.2)

    state = spawn_target(gen, 0, dt)
    pts = [state.position.copy()]
    for k in range(80):
        state = step_target(gen, state, k * dt, dt)
        pts.append(state.position.copy())
    pts = np.array(pts)
    ax.plot(pts[:, 0], pts[:, 1], ".", ms=2.5, alpha=0.6)
    ax.set_title(kind)
    ax.set_aspect("equal")
    ax.set_xlim(0, 10)
    ax.set_ylim(0, 10)
fig.suptitle("target motion patterns: analytic curve vs stepped rollout")
fig.tight_layout()
fig.savefig("target_patterns.png", dpi=130)
print("wrote target_patterns.png")
