"""Render a tracking panel from a trajectory dump.

Reads a trajectories.csv produced by a scenario run and draws the true target
paths, the sensor paths with their final FOV disks, and the one-step-ahead
predicted positions.

Usage: python demos/plot_tracking.py <trajectories.csv> [out.png] [radius]
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    rows = defaultdict(lambda: defaultdict(list))
    with open(path) as fh:
        for rec in csv.DictReader(fh):
            rows[rec["kind"]][int(rec["id"])].append(
                (int(rec["step"]), float(rec["x"]), float(rec["y"])))
    return rows


def render(path, out="tracking.png", radius=5.0):
    rows = load(path)
    fig, ax = plt.subplots(figsize=(7, 7))
    for tid, pts in sorted(rows["target"].items()):
        pts.sort()
        ax.plot([p[1] for p in pts], [p[2] for p in pts], "-",
                lw=1.5, label=f"target {tid}")
        ax.plot(pts[-1][1], pts[-1][2], "o", ms=5, color=ax.lines[-1].get_color())
    for tid, pts in sorted(rows["nominal"].items()):
        pts.sort()
        ax.plot([p[1] for p in pts], [p[2] for p in pts], ":", lw=1.0,
                alpha=0.6)
    for sid, pts in sorted(rows["sensor"].items()):
        pts.sort()
        ax.plot([p[1] for p in pts], [p[2] for p in pts], "--", lw=2.0,
                color="k", alpha=0.5)
        last = pts[-1]
        ax.plot(last[1], last[2], "ks", ms=7)
        ax.add_patch(plt.Circle((last[1], last[2]), radius, fill=False,
                                color="k", alpha=0.3))
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.legend(fontsize=7, loc="upper right")
    ax.set_title("true paths (solid), predictions (dotted), sensors (dashed)")
    fig.tight_layout()
    fig.savefig(out, dpi=130)
    print(f"wrote {out}")
    return out


if __name__ == "__main__":
    if len(sys.argv) < 2:
        sys.exit(__doc__)
    render(sys.argv[1],
           sys.argv[2] if len(sys.argv) > 2 else "tracking.png",
           float(sys.argv[3]) if len(sys.argv) > 3 else 5.0)
