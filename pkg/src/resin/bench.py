"""Scenario execution, baseline planners, metrics, and file outputs.

A scenario steps the world, feeds measurements to per-sensor GP models,
fuses trajectory predictions over the communication tree, plans (for mobile
sensors) under the configured strategy, actuates, and records per-step
prediction errors plus every message that crossed the simulated network.
Everything downstream of the seed is deterministic.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import __version__, network, planner as planner_mod
from .config import ScenarioConfig, config_hash
from .errors import ConfigError
from .fusion import (FusedTrajectory, beta_weight, prior_trajectory_entropy,
                     tree_fuse)
from .gp import GpModel, KernelParams, fit_hyperparameters, gp_predict, \
    ingest, local_trajectory_pdf
from .mat2 import det2, inv2
from .network import MessageLedger, build_topology
from .planner import (PlanResult, pursuit_controls, rollout_positions,
                      sequential_round)
from .world import (ControlInput, TargetState, sense, spawn_target,
                    step_sensor, step_target)

FUSING_PLANNERS = ("resin", "nearest-target", "random")


@dataclass
class MetricsRow:
    """Per-step prediction errors for every (sensor, target) pair."""

    step: int
    planner: str
    sensor_ids: tuple
    target_ids: tuple
    errors: np.ndarray  # (N, M), NaN where the target is not being tracked

    @property
    def mean_error(self) -> float:
        vals = self.errors[~np.isnan(self.errors)]
        return float(vals.mean()) if vals.size else math.nan

    def target_means(self) -> np.ndarray:
        out = np.full(len(self.target_ids), np.nan)
        for col in range(len(self.target_ids)):
            vals = self.errors[:, col]
            vals = vals[~np.isnan(vals)]
            if vals.size:
                out[col] = vals.mean()
        return out


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: list
    ledger: MessageLedger
    trajectory: list  # (step, kind, id, x, y)
    manifest: dict

    @property
    def overall_mean_error(self) -> float:
        vals = np.concatenate([r.errors.ravel() for r in self.metrics])
        vals = vals[~np.isnan(vals)]
        return float(vals.mean()) if vals.size else math.nan


def _seed_for(*tags) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(tags)))


def precompute_truth(cfg: ScenarioConfig):
    """Ground-truth target positions/velocities for steps 0..steps+H."""
    gens = cfg.generators()
    total = cfg.steps + cfg.horizon + 1
    m = len(gens)
    pos = np.full((m, total, 2), np.nan)
    vel = np.zeros((m, total, 2))
    active = np.zeros((m, total), dtype=bool)
    for i, gen in gens.items():
        if gen.entry_step >= total:
            continue
        state = spawn_target(gen, i, cfg.dt)
        k = gen.entry_step
        pos[i, k] = state.position
        vel[i, k] = state.velocity
        active[i, k] = True
        while k < total - 1 and state.active:
            state = step_target(gen, state, k * cfg.dt, cfg.dt)
            k += 1
            pos[i, k] = state.position
            vel[i, k] = state.velocity
            active[i, k] = state.active
    return pos, vel, active


# -- baseline planning strategies -------------------------------------------


def baseline_random(sensors: dict, mobile: list, bounds, horizon: int,
                    dt: float, workspace, seed: int, round_id: int) -> dict:
    """Uniform random controls inside the box, reproducible from the seed."""
    plans = {}
    for j in sorted(sensors):
        if j in mobile:
            rng = _seed_for(seed, 13, round_id, j)
            c = rng.uniform([bounds.accel_min, bounds.turn_min],
                            [bounds.accel_max, bounds.turn_max],
                            size=(horizon, 2))
        else:
            c = np.zeros((horizon, 2))
        states, _ = rollout_positions(sensors[j], c, dt, bounds, workspace)
        plans[j] = PlanResult(c, states, 0.0, 0)
    return plans


def baseline_nearest(sensors: dict, estimates: dict, mobile: list, bounds,
                     horizon: int, dt: float, workspace) -> dict:
    """Proportional pursuit of the closest locally estimated target."""
    plans = {}
    for j in sorted(sensors):
        goal = None
        if j in mobile and estimates.get(j):
            dists = [(float(np.linalg.norm(p - sensors[j].position)), tid)
                     for tid, p in estimates[j].items()]
            dists.sort()
            goal = estimates[j][dists[0][1]]
        if goal is None:
            c = np.zeros((horizon, 2))
        else:
            c = pursuit_controls(sensors[j], goal, horizon, dt, bounds)
        states, _ = rollout_positions(sensors[j], c, dt, bounds, workspace)
        plans[j] = PlanResult(c, states, 0.0, 0)
    return plans


def baseline_no_fusion(sensors: dict, local_pdfs: dict, noise_cov, mobile,
                       bounds, budget: int, dt: float, seed: int,
                       workspace, psi_mode: str, round_id: int,
                       warm_starts: dict | None = None) -> dict:
    """Independent per-sensor planning on each sensor's own prediction."""
    plans = {}
    for j in sorted(sensors):
        if j not in mobile or not local_pdfs.get(j):
            c = np.zeros((len(next(iter(local_pdfs[j].values())).pdf.cov_blocks)
                          if local_pdfs.get(j) else 0, 2))
            if c.shape[0] == 0:
                plans[j] = PlanResult(np.zeros((0, 2)), [sensors[j]], 0.0, 0)
                continue
            states, _ = rollout_positions(sensors[j], c, dt, bounds, workspace)
            plans[j] = PlanResult(c, states, 0.0, 0)
            continue
        ids = tuple(sorted(local_pdfs[j]))
        h = local_pdfs[j][ids[0]].pdf.horizon
        counts = planner_mod.DetectionCounts(
            local_pdfs[j][ids[0]].pdf.start_step, h, ids)
        prior = planner_mod.make_planning_prior(local_pdfs[j], counts,
                                                noise_cov)
        warm = None
        if warm_starts is not None and j in warm_starts:
            warm = [warm_starts[j]]
        plans[j] = planner_mod.optimize_local(
            sensors[j], prior, bounds, budget, dt,
            seed=planner_mod._plan_seed(seed, round_id, j),
            workspace=workspace, psi_mode=psi_mode, warm_starts=warm)
    return plans


def joint_objective(controls_by_sensor: dict, sensors: dict, nominal,
                    fuse_blocks, noise_cov, dt, bounds, workspace,
                    psi_mode: str) -> float:
    """Smoothed joint information of all sensors' candidate plans.

    Coverage adds up: the per-(target, step) posterior conditions on the sum
    of the sensors' smooth FOV factors, so overlapping coverage is not double
    counted the way a per-sensor sum would.
    """
    h = nominal.shape[1]
    psi_sum = np.zeros(nominal.shape[:2])
    for j, c in controls_by_sensor.items():
        _, positions = rollout_positions(sensors[j], c, dt, bounds, workspace)
        d = np.linalg.norm(nominal - positions[None, :, :], axis=2)
        half = 0.5 * sensors[j].sensing_radius
        if psi_mode == "bump":
            psi_sum += np.maximum(0.0, 1.0 - ((d - half) / half) ** 2)
        else:
            psi_sum += np.maximum(0.0,
                                  1.0 - (d / sensors[j].sensing_radius) ** 2)
    noise_prec = inv2(np.asarray(noise_cov, dtype=float))
    post = inv2(inv2(fuse_blocks) + psi_sum[..., None, None] * noise_prec)
    return float(np.sum(np.maximum(
        0.0, 0.5 * np.log(det2(fuse_blocks) / det2(post)))))


def baseline_centralized(sensors: dict, fused: dict, noise_cov, mobile,
                         bounds, budget: int, dt: float, seed: int,
                         workspace, psi_mode: str, round_id: int,
                         topology=None, ledger=None,
                         warm_starts: dict | None = None) -> dict:
    """Joint planning over all mobile sensors with a budget scaled by N.

    Warm-started from each sensor's independent optimum, then polished over
    the stacked control box. The chosen plans are broadcast over the tree.
    """
    ids = tuple(sorted(fused))
    mobile = sorted(mobile)
    h = fused[ids[0]].pdf.horizon
    counts = planner_mod.DetectionCounts(fused[ids[0]].pdf.start_step, h, ids)
    prior = planner_mod.make_planning_prior(fused, counts, noise_cov)
    nominal, fuse_blocks = prior.nominal, prior.fuse_blocks

    # coordinated warm start: greedy sensor-by-sensor pass, then joint polish
    warm_plans = sequential_round(
        {j: sensors[j] for j in mobile}, fused, list(mobile), dt, noise_cov,
        bounds, budget=budget, seed=seed, workspace=workspace,
        psi_mode=psi_mode, round_id=round_id, warm_starts=warm_starts)
    warm = {j: warm_plans[j].controls for j in mobile}
    evals = sum(p.evaluations for p in warm_plans.values())

    def unpack(u):
        flat = u.reshape(len(mobile), h, 2)
        return {j: flat[idx] for idx, j in enumerate(mobile)}

    def neg(u):
        nonlocal evals
        evals += 1
        return -joint_objective(unpack(u), sensors, nominal, fuse_blocks,
                                noise_cov, dt, bounds, workspace, psi_mode)

    u0 = np.concatenate([warm[j].ravel() for j in mobile])
    best_u, best_v = u0, -neg(u0)
    joint_budget = budget * max(1, len(mobile))
    if joint_budget > 16:
        box = [(bounds.accel_min, bounds.accel_max),
               (bounds.turn_min, bounds.turn_max)] * (h * len(mobile))
        res = minimize(neg, u0, method="Powell", bounds=box,
                       options={"maxfev": joint_budget, "xtol": 1e-3,
                                "ftol": 1e-6})
        if -res.fun > best_v:
            best_u, best_v = res.x, float(-res.fun)

    plans = {}
    chosen = unpack(best_u)
    for j in sorted(sensors):
        c = chosen.get(j, np.zeros((h, 2)))
        states, _ = rollout_positions(sensors[j], c, dt, bounds, workspace)
        plans[j] = PlanResult(np.asarray(c), states, best_v, evals)
    if ledger is not None and topology is not None:
        for j in sorted(sensors):
            if j == topology.root:
                continue
            ledger.route(round_id, topology.root, j, network.KIND_PLAN,
                         network.encode_plan(round_id, j, plans[j].controls),
                         topology)
    return plans


# -- scenario execution ------------------------------------------------------


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Execute one scenario end to end. Deterministic given the config."""
    truth_pos, truth_vel, truth_active = precompute_truth(cfg)
    sensors = cfg.sensor_states()
    stationary = cfg.stationary_flags()
    mobile = [j for j in sorted(sensors) if not stationary[j]]
    gens = cfg.generators()
    target_ids = tuple(sorted(gens))
    sensor_ids = tuple(sorted(sensors))
    H, dt = cfg.horizon, cfg.dt
    mode = cfg.planner
    pooled_mode = mode == "centralized"
    fusing = mode in FUSING_PLANNERS

    kp = KernelParams(cfg.gp.signal_std, cfg.gp.length_space,
                      cfg.gp.length_time, cfg.gp_noise_std)
    noise_cov = (cfg.gp_noise_std ** 2) * np.eye(2)
    if pooled_mode:
        pooled = {i: GpModel(-1, i, kp, window_cap=cfg.gp.window_cap)
                  for i in target_ids}
    else:
        models = {(j, i): GpModel(j, i, kp, window_cap=cfg.gp.window_cap)
                  for j in sensor_ids for i in target_ids}

    ledger = MessageLedger()
    metrics = []
    trajectory = []
    prev_plans = {}

    for k in range(cfg.steps):
        entered = [i for i in target_ids
                   if gens[i].entry_step <= k and truth_active[i, k]]
        targets_now = [TargetState(i, truth_pos[i, k], truth_vel[i, k], True)
                       for i in entered]

        # topology for this round (rebuilt every round in proximity mode)
        topo = None
        if len(sensor_ids) > 1:
            topo = build_topology(
                {j: sensors[j].position for j in sensor_ids},
                mode=cfg.topology.mode,
                static_parent=cfg.topology.parent,
                static_root=cfg.topology.root,
                connectivity_radius=cfg.topology.connectivity_radius)

        # sense and ingest
        for j in sensor_ids:
            rng = _seed_for(cfg.seed, 11, k, j)
            meas = sense(j, sensors[j], targets_now, k, rng, cfg.noise_std)
            for m in meas:
                if pooled_mode:
                    pooled[m.target_id] = ingest(pooled[m.target_id], m, dt)
                else:
                    models[(j, m.target_id)] = ingest(models[(j, m.target_id)],
                                                      m, dt)

        # periodic hyperparameter refit
        if cfg.gp.refit_period > 0 and k > 0 and k % cfg.gp.refit_period == 0:
            if pooled_mode:
                for i in target_ids:
                    if pooled[i].n >= cfg.gp.window_min:
                        pooled[i] = replace(pooled[i], params=fit_hyperparameters(
                            pooled[i], cfg.gp.window_min, cfg.gp.fit_maxiter))
            else:
                for key, model in models.items():
                    if model.n >= cfg.gp.window_min:
                        models[key] = replace(model, params=fit_hyperparameters(
                            model, cfg.gp.window_min, cfg.gp.fit_maxiter))

        # predictions, each rolled out from the current target position (the
        # nominal path's initial condition; position tracking is not modeled)
        fused = {}
        local_pdfs = {j: {} for j in sensor_ids}
        if pooled_mode:
            for i in entered:
                pdf = local_trajectory_pdf(pooled[i], truth_pos[i, k], k, H, dt)
                fused[i] = FusedTrajectory(pdf, frozenset(sensor_ids))
        else:
            for j in sensor_ids:
                for i in entered:
                    pdf = local_trajectory_pdf(models[(j, i)],
                                               truth_pos[i, k], k, H, dt)
                    local_pdfs[j][i] = FusedTrajectory.local(pdf, j)
            if fusing:
                ref_entropy = prior_trajectory_entropy(cfg.gp.signal_std, dt, H)
                for i in entered:
                    locals_i = {j: local_pdfs[j][i] for j in sensor_ids}
                    betas = {
                        j: beta_weight(
                            prior_trajectory_entropy(
                                models[(j, i)].params.signal_std, dt, H),
                            locals_i[j].pdf)
                        for j in sensor_ids}
                    if topo is None:
                        fused[i] = locals_i[sensor_ids[0]]
                    else:
                        fused[i] = tree_fuse(locals_i, topo, ref_entropy,
                                             betas=betas, ledger=ledger,
                                             round_id=k, target_id=i)

        # metrics: prediction error over the planning interval
        if entered:
            errors = np.full((len(sensor_ids), len(target_ids)), np.nan)
            for col, i in enumerate(target_ids):
                if i not in entered:
                    continue
                for rowj, j in enumerate(sensor_ids):
                    if pooled_mode or fusing:
                        pred = fused[i].pdf.mean_points
                    else:
                        pred = local_pdfs[j][i].pdf.mean_points
                    errs = []
                    for tau in range(H):
                        if truth_active[i, k + tau + 1]:
                            errs.append(float(np.linalg.norm(
                                pred[tau] - truth_pos[i, k + tau + 1])))
                    if errs:
                        errors[rowj, col] = float(np.mean(errs))
            if not np.isnan(errors).all():
                metrics.append(MetricsRow(k, mode, sensor_ids, target_ids,
                                          errors))

        # trajectory dump
        for i in entered:
            trajectory.append((k, "target", i, float(truth_pos[i, k, 0]),
                               float(truth_pos[i, k, 1])))
            src = fused.get(i)
            if src is None and local_pdfs[sensor_ids[0]].get(i) is not None:
                src = local_pdfs[sensor_ids[0]][i]
            if src is not None:
                p = src.pdf.mean_points[0]
                trajectory.append((k, "nominal", i, float(p[0]), float(p[1])))
        for j in sensor_ids:
            trajectory.append((k, "sensor", j,
                               float(sensors[j].position[0]),
                               float(sensors[j].position[1])))

        # planning and actuation
        if mobile and entered:
            positions_now = {i: truth_pos[i, k] for i in entered}
            plans = _plan_step(cfg, mode, sensors, mobile, fused, local_pdfs,
                               noise_cov, k, topo, ledger, positions_now,
                               prev_plans)
            for j in mobile:
                if plans and j in plans and plans[j].controls.shape[0] > 0:
                    a, w = plans[j].controls[0]
                    nxt = step_sensor(sensors[j], ControlInput(float(a), float(w)),
                                      dt, cfg.bounds)
                    pos = cfg.workspace.clip(nxt.position)
                    sensors[j] = replace(nxt, position=pos)
            prev_plans = {
                j: np.vstack([p.controls[1:], np.zeros((1, 2))])
                for j, p in plans.items() if p.controls.shape[0] > 0}

    manifest = {
        "format_version": 1,
        "config": cfg.to_dict(),
        "config_sha256": config_hash(cfg),
        "seed": cfg.seed,
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    return RunResult(cfg, metrics, ledger, trajectory, manifest)


def _plan_step(cfg, mode, sensors, mobile, fused, local_pdfs, noise_cov, k,
               topo, ledger, target_positions, prev_plans=None):
    bounds, H, dt = cfg.bounds, cfg.horizon, cfg.dt
    ws, psi = cfg.workspace, cfg.planning.psi_mode
    if mode == "random":
        return baseline_random(sensors, mobile, bounds, H, dt, ws,
                               cfg.seed, k)
    if mode == "nearest-target":
        estimates = {j: dict(target_positions) for j in sensors}
        return baseline_nearest(sensors, estimates, mobile, bounds, H, dt, ws)
    if mode == "no-fusion":
        return baseline_no_fusion(sensors, local_pdfs, noise_cov, mobile,
                                  bounds, cfg.planning.budget, dt, cfg.seed,
                                  ws, psi, k, warm_starts=prev_plans)
    if mode == "centralized":
        return baseline_centralized(sensors, fused, noise_cov, mobile, bounds,
                                    cfg.planning.budget, dt, cfg.seed, ws,
                                    psi, k, topology=topo, ledger=ledger,
                                    warm_starts=prev_plans)
    # resin: sequential decentralized round over the fused prediction
    order = _plan_order(cfg, sensors, topo)
    plans = sequential_round(
        sensors, fused, order, dt, noise_cov, bounds,
        budget=cfg.planning.budget, seed=cfg.seed, workspace=ws,
        psi_mode=psi, topology=topo, ledger=ledger, round_id=k,
        warm_starts=prev_plans)
    for j in sorted(sensors):
        if j not in mobile:
            states, _ = rollout_positions(sensors[j],
                                          np.zeros((H, 2)), dt, bounds, ws)
            plans[j] = PlanResult(np.zeros((H, 2)), states, 0.0, 0)
    return plans


def _plan_order(cfg, sensors, topo):
    if cfg.planning.order == "tree-dfs" and topo is not None:
        order = []
        stack = [topo.root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(sorted(topo.children(node), reverse=True))
        return order
    return sorted(sensors)


# -- outputs ------------------------------------------------------------------


def emit_outputs(result: RunResult, outdir) -> dict:
    """Write metrics, message ledger, trajectory dump, and run manifest."""
    import os
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "metrics": os.path.join(outdir, "metrics.csv"),
        "messages": os.path.join(outdir, "messages.csv"),
        "trajectories": os.path.join(outdir, "trajectories.csv"),
        "manifest": os.path.join(outdir, "manifest.json"),
    }
    try:
        _write_metrics(result, paths["metrics"])
        result.ledger.to_csv(paths["messages"])
        _write_trajectories(result, paths["trajectories"])
        with open(paths["manifest"], "w") as fh:
            json.dump(result.manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing outputs under {outdir}: {exc}") from exc
    return paths


def _write_metrics(result: RunResult, path):
    target_ids = result.metrics[0].target_ids if result.metrics else ()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "planner", "mean_error"]
                   + [f"err_t{i}" for i in target_ids])
        for row in result.metrics:
            tm = row.target_means()
            w.writerow([row.step, row.planner, repr(row.mean_error)]
                       + ["" if math.isnan(v) else repr(float(v)) for v in tm])


def _write_trajectories(result: RunResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "kind", "id", "x", "y"])
        for step, kind, ident, x, y in result.trajectory:
            w.writerow([step, kind, ident, repr(x), repr(y)])


def run_experiment(cfg: ScenarioConfig, seeds, planners) -> dict:
    """Seed x planner grid; returns per-planner lists of run mean errors."""
    out = {p: [] for p in planners}
    for p in planners:
        for s in seeds:
            res = run_scenario(replace(cfg, seed=int(s), planner=p))
            out[p].append(res.overall_mean_error)
    return out
