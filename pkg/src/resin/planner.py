"""Sequential decentralized path planning with constant-size coordination.

Each sensor in turn receives only the per-target, per-step counts of how many
predecessors expect to cover each nominal target position, conditions the
shared fused prediction on those counts via conjugate updates, and maximizes
a smoothed information objective over its own control sequence. It then adds
its planned coverage to the counts and forwards them, so the message between
any two sensors has the same size regardless of how many came before.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from . import network
from .errors import BoundsViolation, ProtocolError
from .mat2 import det2, inv2, iso2
from .world import (ControlBounds, ControlInput, SensorState, WorkspaceSpec,
                    in_fov, step_sensor, wrap_angle)


@dataclass
class DetectionCounts:
    """Expected predecessor detections per (target, step); the planning message."""

    start_step: int
    horizon: int
    target_ids: tuple
    counts: np.ndarray = None

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((len(self.target_ids), self.horizon),
                                   dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.target_ids), self.horizon):
            raise ValueError("counts must have shape (M, H)")
        if (self.counts < 0).any():
            raise ValueError("counts must be nonnegative")

    def payload(self, round_id: int) -> bytes:
        return network.encode_detection_counts(round_id, self.start_step,
                                               self.counts)


def predecessor_update(prior_block: np.ndarray, n: int,
                       noise_cov: np.ndarray) -> np.ndarray:
    """Posterior covariance after n independent measurements of the prior."""
    if n < 0:
        raise ValueError("count must be nonnegative")
    prior = np.asarray(prior_block, dtype=float)
    if n == 0:
        return prior.copy()
    return inv2(inv2(prior) + n * inv2(np.asarray(noise_cov, dtype=float)))


def psi_weight(sensor_xy, target_xy, r: float, mode: str = "bump") -> float:
    """Smooth stand-in for the FOV indicator.

    The default is a quadratic bump peaking at half the sensing radius and
    vanishing at 0 and r; the monotone variant peaks at distance zero and is
    kept for ablations only.
    """
    if r <= 0:
        raise ValueError("sensing radius must be positive")
    d = math.hypot(float(sensor_xy[0]) - float(target_xy[0]),
                   float(sensor_xy[1]) - float(target_xy[1]))
    if mode == "bump":
        half = 0.5 * r
        return max(0.0, 1.0 - ((d - half) / half) ** 2)
    if mode == "monotone":
        return max(0.0, 1.0 - (d / r) ** 2)
    raise ValueError(f"unknown psi mode {mode!r}")


def step_mi(prior_block: np.ndarray, noise_cov: np.ndarray) -> float:
    """Information gained by one measurement under the linear-Gaussian model."""
    prior = np.asarray(prior_block, dtype=float)
    post = inv2(inv2(prior) + inv2(np.asarray(noise_cov, dtype=float)))
    return max(0.0, 0.5 * float(np.log(det2(prior) / det2(post))))


@dataclass
class PlanningPrior:
    """Per-target planning inputs: nominal paths and count-conditioned blocks."""

    target_ids: tuple
    nominal: np.ndarray      # (M, H, 2)
    fuse_blocks: np.ndarray  # (M, H, 2, 2)
    pre_blocks: np.ndarray   # (M, H, 2, 2)
    noise_cov: np.ndarray    # (2, 2)
    mi_table: np.ndarray = field(default=None)  # (M, H)

    def __post_init__(self):
        if self.mi_table is None:
            self.mi_table = _mi_table(self.pre_blocks, self.noise_cov)

    @property
    def horizon(self) -> int:
        return self.nominal.shape[1]


def _mi_table(pre_blocks: np.ndarray, noise_cov: np.ndarray) -> np.ndarray:
    noise_prec = inv2(np.asarray(noise_cov, dtype=float))
    post = inv2(inv2(pre_blocks) + noise_prec)
    return np.maximum(0.0, 0.5 * np.log(det2(pre_blocks) / det2(post)))


def make_planning_prior(fused: dict, counts: DetectionCounts,
                        noise_cov: np.ndarray) -> PlanningPrior:
    """Condition the fused per-target pdfs on the predecessor counts."""
    ids = counts.target_ids
    h = counts.horizon
    nominal = np.empty((len(ids), h, 2))
    fuse_blocks = np.empty((len(ids), h, 2, 2))
    for row, tid in enumerate(ids):
        pdf = fused[tid].pdf
        nominal[row] = pdf.mean_points
        fuse_blocks[row] = pdf.scaled_blocks
    noise_prec = inv2(np.asarray(noise_cov, dtype=float))
    pre = inv2(inv2(fuse_blocks)
               + counts.counts[:, :, None, None] * noise_prec)
    return PlanningPrior(ids, nominal, fuse_blocks, pre,
                         np.asarray(noise_cov, dtype=float))


def rollout_positions(sensor: SensorState, controls: np.ndarray, dt: float,
                      bounds: ControlBounds,
                      workspace: WorkspaceSpec | None = None):
    """Planned states after each control; positions clipped to the workspace."""
    states = [sensor]
    for a, w in controls:
        nxt = step_sensor(states[-1], ControlInput(float(a), float(w)), dt, bounds)
        if workspace is not None and not workspace.contains(nxt.position):
            nxt = replace(nxt, position=workspace.clip(nxt.position))
        states.append(nxt)
    positions = np.array([s.position for s in states[1:]])
    return states, positions


def objective(controls: np.ndarray, sensor: SensorState, prior: PlanningPrior,
              dt: float, bounds: ControlBounds = ControlBounds(),
              workspace: WorkspaceSpec | None = None,
              psi_mode: str = "bump") -> float:
    """Smoothed information captured by a candidate control sequence.

    Rolls the sensor forward, then sums the per-step information value of each
    target weighted by the smooth FOV factor at the planned positions.
    """
    c = np.asarray(controls, dtype=float).reshape(-1, 2)
    if c.shape[0] != prior.horizon:
        raise ValueError("controls must cover the planning horizon")
    if ((c[:, 0] < bounds.accel_min - 1e-12).any()
            or (c[:, 0] > bounds.accel_max + 1e-12).any()
            or (c[:, 1] < bounds.turn_min - 1e-12).any()
            or (c[:, 1] > bounds.turn_max + 1e-12).any()):
        raise BoundsViolation("control sequence leaves the admissible box")
    _, positions = rollout_positions(sensor, c, dt, bounds, workspace)
    d = np.linalg.norm(prior.nominal - positions[None, :, :], axis=2)
    half = 0.5 * sensor.sensing_radius
    if psi_mode == "bump":
        psi = np.maximum(0.0, 1.0 - ((d - half) / half) ** 2)
    elif psi_mode == "monotone":
        psi = np.maximum(0.0, 1.0 - (d / sensor.sensing_radius) ** 2)
    else:
        raise ValueError(f"unknown psi mode {psi_mode!r}")
    return float(np.sum(psi * prior.mi_table))


@dataclass
class PlanResult:
    """Outcome of one sensor's local optimization."""

    controls: np.ndarray
    states: list
    value: float
    evaluations: int
    budget_exhausted: bool = False


def pursuit_controls(sensor: SensorState, goal_xy, H: int, dt: float,
                     bounds: ControlBounds) -> np.ndarray:
    """Greedy steer-and-accelerate sequence toward a fixed goal point."""
    controls = np.zeros((H, 2))
    state = sensor
    goal = np.asarray(goal_xy, dtype=float)
    for i in range(H):
        delta = goal - state.position
        bearing = math.atan2(delta[1], delta[0])
        err = wrap_angle(bearing - state.heading)
        if err > math.pi:
            err -= 2.0 * math.pi
        turn = min(max(err / dt, bounds.turn_min), bounds.turn_max)
        accel = bounds.accel_max if abs(err) < 0.5 * math.pi else bounds.accel_min
        dist = float(np.linalg.norm(delta))
        if dist < 0.5 * sensor.sensing_radius and state.speed > 0:
            accel = bounds.accel_min  # brake near the standoff distance
        controls[i] = (accel, turn)
        state = step_sensor(state, ControlInput(accel, turn), dt, bounds)
    return controls


def optimize_local(sensor: SensorState, prior: PlanningPrior,
                   bounds: ControlBounds, budget: int, dt: float,
                   seed: int = 0, workspace: WorkspaceSpec | None = None,
                   psi_mode: str = "bump",
                   warm_starts: list | None = None) -> PlanResult:
    """Maximize the planning objective over the control box.

    Deterministic given the seed: fixed candidate plans (zero controls, any
    caller-provided warm starts, pursuit seeds toward the most valuable
    targets), seeded random shooting, then a bounded derivative-free polish of
    the best candidate. The returned value is never below the best evaluated
    seed. If the evaluation budget runs out the incumbent is returned with the
    flag set.
    """
    H = prior.horizon
    evals = 0
    exhausted = False

    def score(c):
        nonlocal evals
        evals += 1
        return objective(c, sensor, prior, dt, bounds, workspace, psi_mode)

    best_c = np.zeros((H, 2))
    best_v = score(best_c)

    candidates = []
    for w in warm_starts or ():
        w = np.asarray(w, dtype=float)
        if w.shape == (H, 2):
            candidates.append(np.clip(
                w, [bounds.accel_min, bounds.turn_min],
                [bounds.accel_max, bounds.turn_max]))
    worth = prior.mi_table.sum(axis=1)
    for row in np.argsort(worth)[::-1][:2]:
        if worth[row] <= 0:
            continue
        goal = prior.nominal[row, min(H - 1, H // 2)]
        candidates.append(pursuit_controls(sensor, goal, H, dt, bounds))

    rng = np.random.default_rng(seed)
    n_shoot = max(0, min(budget - evals - 1, max(16, budget // 3)))
    lo = np.array([bounds.accel_min, bounds.turn_min])
    hi = np.array([bounds.accel_max, bounds.turn_max])
    shots = rng.uniform(lo, hi, size=(n_shoot, H, 2))
    candidates.extend(shots)

    for c in candidates:
        if evals >= budget:
            exhausted = True
            break
        v = score(c)
        if v > best_v:
            best_c, best_v = np.array(c, dtype=float), v

    remaining = budget - evals
    if remaining > 8 and best_v > 0:
        box = [(bounds.accel_min, bounds.accel_max),
               (bounds.turn_min, bounds.turn_max)] * H
        res = minimize(lambda u: -score(u.reshape(H, 2)),
                       best_c.ravel(), method="Powell", bounds=box,
                       options={"maxfev": remaining, "xtol": 1e-3,
                                "ftol": 1e-6})
        if -res.fun > best_v:
            best_c, best_v = res.x.reshape(H, 2), float(-res.fun)
    elif remaining <= 0:
        exhausted = True

    states, _ = rollout_positions(sensor, best_c, dt, bounds, workspace)
    return PlanResult(best_c, states, best_v, evals, exhausted)


def sequential_round(sensors: dict, fused: dict, order: list, dt: float,
                     noise_cov: np.ndarray,
                     bounds: ControlBounds = ControlBounds(),
                     budget: int = 300, seed: int = 0,
                     workspace: WorkspaceSpec | None = None,
                     psi_mode: str = "bump",
                     topology=None, ledger=None, round_id: int = 0,
                     warm_starts: dict | None = None) -> dict:
    """One planning round: sensors optimize in sequence, forwarding counts.

    Every sensor conditions the shared fused prediction on the counts received
    from its predecessor, plans, adds its own expected detections, and sends
    the updated counts onward. The payload is always M*H counts, regardless of
    position in the sequence.
    """
    if sorted(order) != sorted(sensors):
        raise ProtocolError("planning order must be a permutation of sensor ids")
    target_ids = tuple(sorted(fused))
    if not target_ids:
        return {j: PlanResult(np.zeros((0, 2)), [sensors[j]], 0.0, 0)
                for j in order}
    h = fused[target_ids[0]].pdf.horizon
    start = fused[target_ids[0]].pdf.start_step
    counts = DetectionCounts(start, h, target_ids)
    plans = {}
    for idx, j in enumerate(order):
        prior = make_planning_prior(fused, counts, noise_cov)
        warm = None
        if warm_starts is not None and j in warm_starts:
            warm = [warm_starts[j]]
        res = optimize_local(sensors[j], prior, bounds, budget, dt,
                             seed=_plan_seed(seed, round_id, j),
                             workspace=workspace, psi_mode=psi_mode,
                             warm_starts=warm)
        plans[j] = res
        for row, tid in enumerate(target_ids):
            for tau in range(h):
                planned = res.states[tau + 1]
                if in_fov(planned, prior.nominal[row, tau]):
                    counts.counts[row, tau] += 1
        if idx + 1 < len(order):
            successor = order[idx + 1]
            if ledger is not None and topology is not None:
                ledger.route(round_id, j, successor,
                             network.KIND_DETECTION_COUNTS,
                             counts.payload(round_id), topology)
    return plans


def _plan_seed(seed: int, round_id: int, sensor_id: int) -> int:
    return int(np.random.SeedSequence([seed, 3, round_id, sensor_id])
               .generate_state(1)[0])
