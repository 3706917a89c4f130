"""Small-scale planner comparison on the shipped mobile scenario.

Runs two seeds of each planner on the builtin mobile config (shortened for a
quick demo), prints the per-seed mean prediction errors, and writes the full
outputs of one run for plotting with demos/plot_tracking.py.
"""

from dataclasses import replace

import numpy as np

from resin.bench import emit_outputs, run_experiment, run_scenario
from resin.config import builtin_config

cfg = replace(builtin_config("mobile_planning"), steps=25)
seeds = [0, 1]
planners = ["resin", "nearest-target", "random"]

print(f"scenario {cfg.name!r}: {len(cfg.targets)} targets, "
      f"{cfg.random_sensors.count} sensors, {cfg.steps} steps\n")
results = run_experiment(cfg, seeds, planners)
for p in planners:
    vals = results[p]
    print(f"{p:>14}: per-seed error {[round(v, 3) for v in vals]}  "
          f"mean {np.mean(vals):.3f} m")

res = run_scenario(replace(cfg, planner="resin", seed=0))
paths = emit_outputs(res, "demo_out")
print(f"\nwrote {', '.join(paths.values())}")
print("render with: python demos/plot_tracking.py demo_out/trajectories.csv")
