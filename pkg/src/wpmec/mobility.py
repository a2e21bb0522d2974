"""Manhattan street-grid mobility for ground devices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# headings: east, north, west, south
DIRECTIONS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
_SNAP = 1e-9


class OffGridError(ValueError):
    pass


@dataclass(frozen=True)
class StreetGrid:
    area_side: float
    block_size: float
    turn_probs: tuple[float, float, float] = (0.5, 0.25, 0.25)

    @property
    def n(self) -> int:
        """Intersections per axis."""
        return int(np.floor(self.area_side / self.block_size + _SNAP)) + 1

    @property
    def limit(self) -> float:
        return (self.n - 1) * self.block_size

    def nodes(self) -> np.ndarray:
        ticks = np.arange(self.n) * self.block_size
        xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    def neighbors(self, i: int, j: int) -> list[tuple[int, int]]:
        out = []
        for di, dj in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            a, b = i + di, j + dj
            if 0 <= a < self.n and 0 <= b < self.n:
                out.append((a, b))
        return out

    def segments(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        segs = []
        for i in range(self.n):
            for j in range(self.n):
                if i + 1 < self.n:
                    segs.append(((i, j), (i + 1, j)))
                if j + 1 < self.n:
                    segs.append(((i, j), (i, j + 1)))
        return segs

    def _on_line(self, v: float) -> bool:
        k = round(v / self.block_size)
        return abs(v - k * self.block_size) <= 1e-6 and 0 <= k < self.n

    def on_street(self, pos) -> bool:
        x, y = float(pos[0]), float(pos[1])
        if not (-1e-6 <= x <= self.limit + 1e-6 and -1e-6 <= y <= self.limit + 1e-6):
            return False
        return self._on_line(x) or self._on_line(y)

    def is_node(self, pos) -> bool:
        return self._on_line(float(pos[0])) and self._on_line(float(pos[1]))

    def segment_of(self, pos, heading: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Street segment containing ``pos`` (nodes at a node resolve along ``heading``)."""
        b = self.block_size
        x, y = float(pos[0]), float(pos[1])
        if self.is_node(pos):
            i, j = round(x / b), round(y / b)
            d = DIRECTIONS[heading]
            a = (i + int(d[0]), j + int(d[1]))
            if not (0 <= a[0] < self.n and 0 <= a[1] < self.n):
                a = (i - int(d[0]), j - int(d[1]))
            return tuple(sorted([(i, j), a]))  # type: ignore[return-value]
        if self._on_line(x):
            i = round(x / b)
            j = min(int(np.floor(y / b)), self.n - 2)
            return ((i, j), (i, j + 1))
        j = round(y / b)
        i = min(int(np.floor(x / b)), self.n - 2)
        return ((i, j), (i + 1, j))

    def _valid(self, node: tuple[int, int], heading: int) -> bool:
        d = DIRECTIONS[heading]
        a, b = node[0] + int(d[0]), node[1] + int(d[1])
        return 0 <= a < self.n and 0 <= b < self.n

    def choose_heading(self, node: tuple[int, int], heading: int, rng: np.random.Generator) -> int:
        """Turn rule at an intersection: straight / left / right by ``turn_probs``.

        Options leaving the area are dropped and the rest renormalised; a U-turn is
        used only when nothing else is available.
        """
        options = [heading, (heading + 1) % 4, (heading + 3) % 4]
        probs = np.array(self.turn_probs, dtype=float)
        keep = np.array([self._valid(node, h) for h in options])
        u = rng.random()
        if not keep.any() or probs[keep].sum() <= 0:
            back = (heading + 2) % 4
            if self._valid(node, back):
                return back
            valid = [h for h in range(4) if self._valid(node, h)]
            return valid[0] if valid else heading
        p = np.where(keep, probs, 0.0)
        cdf = np.cumsum(p / p.sum())
        return options[int(min(np.searchsorted(cdf, u, side="right"), 2))]


def heading_along(grid: StreetGrid, pos, heading: int) -> int:
    """Project ``heading`` onto the street ``pos`` lies on (mid-block points only)."""
    if grid.is_node(pos):
        return heading
    vertical = grid._on_line(float(pos[0]))
    if vertical and heading in (0, 2):
        return 1 if heading == 0 else 3
    if not vertical and heading in (1, 3):
        return 0 if heading == 1 else 2
    return heading


def step_device(pos, heading: int, speed: float, grid: StreetGrid, rng: np.random.Generator,
                dt: float = 1.0) -> tuple[np.ndarray, int]:
    """Advance one device by ``speed * dt`` metres along the street grid.

    Returns the new position and heading.  When an intersection is reached the
    next heading is drawn immediately, so the returned heading always points
    along a street that stays inside the area.
    """
    if not grid.on_street(pos):
        raise OffGridError(f"position {tuple(map(float, pos))} is not on a street")
    if speed < 0:
        raise ValueError("speed must be non-negative")
    b = grid.block_size
    p = np.array(pos, dtype=float)
    heading = heading_along(grid, p, int(heading))
    if grid.is_node(p):
        p = np.round(p / b) * b
        node = (int(round(p[0] / b)), int(round(p[1] / b)))
        if not grid._valid(node, heading):
            heading = grid.choose_heading(node, heading, rng)

    remaining = speed * dt
    while remaining > 0:
        d = DIRECTIONS[heading]
        axis = 0 if d[0] != 0 else 1
        coord = p[axis]
        if d[axis] > 0:
            nxt = (np.floor(coord / b + _SNAP) + 1) * b
        else:
            nxt = (np.ceil(coord / b - _SNAP) - 1) * b
        gap = abs(nxt - coord)
        if remaining < gap - _SNAP:
            p[axis] = coord + d[axis] * remaining
            break
        p[axis] = nxt
        remaining -= gap
        node = (int(round(p[0] / b)), int(round(p[1] / b)))
        heading = grid.choose_heading(node, heading, rng)
        if remaining <= _SNAP:
            break
    return p, heading


def random_positions(grid: StreetGrid, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform-random intersections plus a valid heading for each."""
    nodes = grid.nodes()
    idx = rng.integers(0, len(nodes), size=count)
    pos = nodes[idx].astype(float)
    headings = np.empty(count, dtype=np.int64)
    for k in range(count):
        node = (int(round(pos[k, 0] / grid.block_size)), int(round(pos[k, 1] / grid.block_size)))
        valid = [h for h in range(4) if grid._valid(node, h)]
        headings[k] = valid[int(rng.integers(0, len(valid)))]
    return pos, headings


def step_all(pos: np.ndarray, headings: np.ndarray, grid: StreetGrid, max_speed: float,
             rng: np.random.Generator, dt: float = 1.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Move every device once, each with a fresh speed drawn from U[0, max_speed]."""
    speeds = rng.uniform(0.0, max_speed, size=len(pos))
    new_pos = np.empty_like(pos)
    new_head = np.empty_like(headings)
    for k in range(len(pos)):
        new_pos[k], new_head[k] = step_device(pos[k], int(headings[k]), float(speeds[k]), grid, rng, dt)
    return new_pos, new_head, speeds
