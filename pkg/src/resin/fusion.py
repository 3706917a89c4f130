"""Rumor-robust fusion of trajectory Gaussians.

Pairs of local predictions are combined as a weighted exponential product.
Each side's exponent is the product of an entropy-based contribution weight
and a divergence-optimal split; the exponents are normalized to sum to one,
which makes fusing a density with itself an exact no-op. That idempotence is
what keeps repeated exchanges of the same information from shrinking the
fused covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HorizonMismatch, ProtocolError
from .gp import TrajectoryGaussian
from .mat2 import det2, inv2, matvec2, quad2

BETA_FLOOR = 1e-6

_LOG_2PI_E = math.log(2.0 * math.pi) + 1.0


def gaussian_entropy(blocks: np.ndarray) -> float:
    """Differential entropy of a block-diagonal Gaussian, summed over blocks."""
    b = np.asarray(blocks, dtype=float)
    return float(np.sum(_LOG_2PI_E + 0.5 * np.log(det2(b))))


def prior_trajectory_entropy(signal_std: float, dt: float, horizon: int) -> float:
    """Entropy of the no-data trajectory pdf: signal_std^2 dt^2 I per block."""
    v = signal_std * signal_std * dt * dt
    return horizon * (_LOG_2PI_E + math.log(v))


def beta_weight(prior_entropy: float, posterior: TrajectoryGaussian) -> float:
    """Contribution weight: entropy drop from the prior, floored at BETA_FLOOR."""
    return max(BETA_FLOOR, prior_entropy - gaussian_entropy(posterior.scaled_blocks))


@dataclass(frozen=True)
class FusionWeights:
    """Normalized exponents for one pairwise fusion."""

    beta_a: float
    beta_b: float
    chernoff_w: float

    def __post_init__(self):
        if not 0.0 <= self.chernoff_w <= 1.0:
            raise ValueError("chernoff_w must lie in [0, 1]")
        if self.beta_a < 0 or self.beta_b < 0:
            raise ValueError("beta weights must be nonnegative")
        total = self.beta_a * self.chernoff_w + self.beta_b * (1.0 - self.chernoff_w)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("weights must be normalized: beta_a*w + beta_b*(1-w) = 1")

    @property
    def coeff_a(self) -> float:
        return self.beta_a * self.chernoff_w

    @property
    def coeff_b(self) -> float:
        return self.beta_b * (1.0 - self.chernoff_w)


@dataclass(frozen=True)
class FusedTrajectory:
    """A trajectory pdf together with the sensors whose data shaped it."""

    pdf: TrajectoryGaussian
    contributors: frozenset

    @staticmethod
    def local(pdf: TrajectoryGaussian, sensor_id: int) -> "FusedTrajectory":
        return FusedTrajectory(pdf, frozenset([sensor_id]))


def chernoff_objective(w: float, mean_a, mean_b, blocks_a, blocks_b) -> float:
    """Divergence of the exponent split w, summed over per-step blocks."""
    M = w * blocks_a + (1.0 - w) * blocks_b
    det_m = det2(M)
    log_term = 0.5 * np.sum(np.log(det_m)
                            - w * np.log(det2(blocks_a))
                            - (1.0 - w) * np.log(det2(blocks_b)))
    d = mean_a - mean_b
    quad = 0.5 * w * (1.0 - w) * np.sum(quad2(inv2(M), d))
    return float(log_term + quad)


def chernoff_weight(a: TrajectoryGaussian, b: TrajectoryGaussian,
                    tol: float = 1e-6, max_iter: int = 200) -> float:
    """Optimal exponent split between two trajectory Gaussians.

    The divergence is zero at both endpoints and concave in between, so the
    optimum is the interior stationary point, found by golden-section search
    to tol. Identical inputs tie-break to 0.5.
    """
    if a.horizon != b.horizon:
        raise HorizonMismatch(f"horizons differ: {a.horizon} vs {b.horizon}")
    ma, mb = a.mean_points, b.mean_points
    ba, bb = a.scaled_blocks, b.scaled_blocks
    if np.array_equal(ma, mb) and np.array_equal(ba, bb):
        return 0.5

    def f(w):
        return -chernoff_objective(w, ma, mb, ba, bb)

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, 1.0
    x1 = hi - inv_phi * (hi - lo)
    x2 = lo + inv_phi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 < f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - inv_phi * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + inv_phi * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def fusion_weights(a: FusedTrajectory, b: FusedTrajectory,
                   beta_a: float, beta_b: float,
                   scale_before_weight: bool = True) -> FusionWeights:
    """Compute the normalized exponents for fusing a with b.

    scale_before_weight applies the contribution weights to the covariances
    before the split is optimized; the alternative searches on the raw pdfs.
    """
    if scale_before_weight:
        w = chernoff_weight(a.pdf.with_scale(beta_a), b.pdf.with_scale(beta_b))
    else:
        w = chernoff_weight(a.pdf, b.pdf)
    total = beta_a * w + beta_b * (1.0 - w)
    return FusionWeights(beta_a / total, beta_b / total, w)


def fuse_pair(a: FusedTrajectory, b: FusedTrajectory,
              beta_a: float, beta_b: float,
              scale_before_weight: bool = True) -> FusedTrajectory:
    """Weighted exponential product of two trajectory pdfs, block-wise.

    Exponents are normalized to sum to one, so fusing identical pdfs returns
    them unchanged regardless of the beta values.
    """
    if a.pdf.horizon != b.pdf.horizon:
        raise HorizonMismatch("cannot fuse trajectories with different horizons")
    if beta_a < BETA_FLOOR or beta_b < BETA_FLOOR:
        raise ValueError("beta weights must be at least the floor")
    fw = fusion_weights(a, b, beta_a, beta_b, scale_before_weight)
    prec_a = inv2(a.pdf.scaled_blocks)
    prec_b = inv2(b.pdf.scaled_blocks)
    prec = fw.coeff_a * prec_a + fw.coeff_b * prec_b
    blocks = inv2(prec)
    info = (fw.coeff_a * matvec2(prec_a, a.pdf.mean_points)
            + fw.coeff_b * matvec2(prec_b, b.pdf.mean_points))
    mean = matvec2(blocks, info)
    pdf = TrajectoryGaussian(a.pdf.start_step, mean.ravel(), blocks)
    return FusedTrajectory(pdf, a.contributors | b.contributors)


def tree_fuse(locals_: dict, tree, prior_entropy: float,
              betas: dict | None = None, ledger=None,
              round_id: int = 0, target_id: int = 0) -> FusedTrajectory:
    """Fuse all sensors' local pdfs along a spanning tree.

    Pairwise fusions fold the tree from the leaves inward, children visited in
    ascending id; the fold is anchored at the lowest sensor id so the result
    does not depend on which node is designated root. Contribution weights are
    recomputed against prior_entropy after every pairwise step (or seeded from
    betas for the leaves). When a ledger is given, one upward pdf message per
    edge and one downward broadcast per edge are recorded.
    """
    if set(locals_) != set(tree.nodes):
        raise ProtocolError("local pdfs do not match the topology's sensors")
    if len(locals_) == 1:
        return next(iter(locals_.values()))
    if betas is None:
        betas = {j: beta_weight(prior_entropy, locals_[j].pdf) for j in locals_}

    adj = tree.adjacency()

    def fold(node, came_from):
        value = locals_[node]
        beta = betas[node]
        for nb in sorted(adj[node]):
            if nb == came_from:
                continue
            child_value, child_beta = fold(nb, node)
            value = fuse_pair(value, child_value, beta, child_beta)
            beta = beta_weight(prior_entropy, value.pdf)
        return value, beta

    anchor = min(tree.nodes)
    fused, _ = fold(anchor, None)

    if ledger is not None:
        from . import network
        up_payload = None
        down_payload = network.encode_trajectory(
            network.KIND_FUSED_PDF, round_id, target_id, fused.pdf,
            len(fused.contributors))
        for node in tree.nodes:
            if node == tree.root:
                continue
            parent = tree.parent[node]
            up_payload = network.encode_trajectory(
                network.KIND_LOCAL_PDF, round_id, target_id,
                locals_[node].pdf, len(locals_[node].contributors))
            ledger.send(round_id, node, parent, network.KIND_LOCAL_PDF,
                        up_payload, tree)
            ledger.send(round_id, parent, node, network.KIND_FUSED_PDF,
                        down_payload, tree)
    return fused
