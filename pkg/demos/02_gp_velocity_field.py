"""Learn a circling target's velocity field from noisy observations.

A single sensor watches a circular target, feeding position/time -> velocity
pairs into a GP. The script prints how the hyperparameter fit and the
prediction error evolve, then plots the learned field against the truth.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from resin.gp import (GpModel, KernelParams, fit_hyperparameters, gp_predict,
                      ingest, nominal_path)
from resin.world import Measurement, TrajectoryGenerator, spawn_target, \
    step_target

rng = np.random.default_rng(3)
dt = 0.5
gen = TrajectoryGenerator("circle",
                          {"center": [5, 5], "radius": 3, "angular_rate": 0.35})
model = GpModel(0, 0, KernelParams(1.0, 2.0, 6.0, 0.1), window_cap=120)

state = spawn_target(gen, 0, dt)
for k in range(60):
    noisy = state.velocity + rng.normal(0, 0.1, 2)
    model = ingest(model, Measurement(0, 0, k, state.position, noisy), dt)
    if k > 0 and k % 15 == 0:
        model = GpModel(0, 0, fit_hyperparameters(model), model.inputs,
                        model.outputs, model.window_cap)
        pred = gp_predict(model, (state.position, k * dt))
        err = np.linalg.norm(pred.mean - state.velocity)
        print(f"step {k:3d}: fitted {model.params.signal_std:.2f} / "
              f"{model.params.length_space:.2f} / "
              f"{model.params.length_time:.2f}, "
              f"velocity error {err:.3f} m/s, var {pred.variance:.4f}")
    state = step_target(gen, state, k * dt, dt)

# learned field on a grid at the final time, against the analytic field
t_now = 60 * dt
xs = np.linspace(1, 9, 15)
fig, ax = plt.subplots(figsize=(7, 7))
for x in xs:
    for y in xs:
        pred = gp_predict(model, (np.array([x, y]), t_now))
        if pred.variance < 0.9:  # show only where the model has data
            ax.arrow(x, y, pred.mean[0] * 0.6, pred.mean[1] * 0.6,
                     head_width=0.08, color="tab:blue", alpha=0.8)

ts = np.linspace(0, 2 * np.pi / 0.35, 200)
path = np.array([gen.position(t) for t in ts])
ax.plot(path[:, 0], path[:, 1], "k--", alpha=0.4, label="target path")

H = 8
future = nominal_path(model, state.position, 60, H, dt)
ax.plot(future[:, 0], future[:, 1], "r.-", label=f"{H}-step rollout")
ax.plot(*state.position, "r*", ms=14)
ax.set_aspect("equal")
ax.legend()
ax.set_title("learned velocity field (arrows) and mean rollout")
fig.tight_layout()
fig.savefig("gp_velocity_field.png", dpi=130)
print("wrote gp_velocity_field.png")
