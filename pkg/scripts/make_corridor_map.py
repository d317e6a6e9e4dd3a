"""Regenerate the bundled corridor map and landmark files.

The layout is a reconstructed benchmark corridor: a walled
10 m x 5 m area whose middle is blocked, leaving a short lower passage and a
longer upper passage lined with landmarks.
"""

from pathlib import Path

from beliefnav.world import GridMap, Landmark, landmarks_to_text

DATA = Path(__file__).resolve().parents[1] / "src" / "beliefnav" / "data"

W, H, RES = 10.0, 5.0, 0.05
WALL = 0.1


def corridor_map() -> GridMap:
    walls = [(0, 0, W, WALL), (0, H - WALL, W, H), (0, 0, WALL, H), (W - WALL, 0, W, H)]
    block = [(2.5, 2.0, 7.5, 3.6)]
    return GridMap.empty(W, H, RES).with_boxes(walls + block)


LANDMARKS = [
    Landmark(1, (3.5, 4.6)),
    Landmark(2, (5.5, 4.6)),
    Landmark(3, (7.0, 4.6)),
    Landmark(4, (9.3, 3.8)),
]

if __name__ == "__main__":
    (DATA / "corridor.map").write_text(corridor_map().to_text())
    header = "# corridor landmarks (reconstruction): id x_m y_m\n"
    (DATA / "corridor.lm").write_text(header + landmarks_to_text(LANDMARKS))
