"""Optional PNG figures next to the text artifacts (requires matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .engine import PlanTrace  # noqa: E402
from .world import OCCUPIED  # noqa: E402

# fixed metadata keeps reruns byte-identical
_PNG_META = {"Software": None}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, metadata=_PNG_META)
    plt.close(fig)


def plan_figures(scenario, trace: PlanTrace, out: Path) -> list[Path]:
    """Trajectory over the map, and trace/charge against time."""
    grid = scenario.grid
    x0, y0, x1, y1 = grid.bounds
    fig, ax = plt.subplots(figsize=(8, 8 * (y1 - y0) / (x1 - x0) + 0.5))
    ax.imshow(grid.occupancy == OCCUPIED, origin="lower", extent=(x0, x1, y0, y1),
              cmap="Greys", interpolation="nearest")
    g = scenario.graph
    for (i, j) in sorted(g.edges):
        a, b = g[i].pose, g[j].pose
        ax.plot([a.x, b.x], [a.y, b.y], color="0.8", lw=0.5, zorder=1)
    ax.scatter([w.pose.x for w in g.waypoints], [w.pose.y for w in g.waypoints], s=8,
               color="tab:blue", zorder=2, label="waypoints")
    ax.scatter([lm.x for lm in scenario.landmarks], [lm.y for lm in scenario.landmarks],
               marker="s", color="tab:red", zorder=3, label="landmarks")
    if trace.records:
        xs = [r.x for r in trace.records]
        ys = [r.y for r in trace.records]
        ax.plot(xs, ys, color="tab:green", lw=2, zorder=4, label="plan (belief mean)")
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.legend(loc="upper left", fontsize="small")
    paths = [out / "trajectory.png"]
    _save(fig, paths[0])

    fig, ax = plt.subplots(figsize=(7, 4))
    t = np.array([r.clock for r in trace.records])
    ax.step(t, [r.trace for r in trace.records], where="post", color="tab:purple")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("trace of covariance")
    charges = [r.charge for r in trace.records]
    if charges and charges[0] is not None:
        ax2 = ax.twinx()
        ax2.plot(t, charges, color="tab:orange")
        ax2.set_ylabel("charge (%)")
    paths.append(out / "trace.png")
    _save(fig, paths[1])
    return paths


def sweep_figure(rows: list[dict], out: Path) -> Path:
    """States explored against delta, one line per dFactor."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for df in sorted({r["dFactor"] for r in rows}):
        pts = [(float(r["delta_s"]), int(r["states_explored"])) for r in rows
               if r["dFactor"] == df and r["states_explored"] != ""]
        if pts:
            ax.plot(*zip(*sorted(pts)), marker="o", label=f"dFactor {df}")
    ax.set_yscale("log")
    ax.set_xlabel("delta (s)")
    ax.set_ylabel("states explored")
    ax.legend()
    path = out / "sweep.png"
    _save(fig, path)
    return path
