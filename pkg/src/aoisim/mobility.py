"""Manhattan-grid mobility with fixed transmitter-receiver pairing.

Roads form a square lattice on a torus (wrap-around keeps the vehicle count
constant).  Every road carries one lane per direction, offset from the road
axis.  Receivers trail their transmitter by pair_distance along the same
path: each turn decision the transmitter makes is queued and replayed by
the receiver when it reaches the same intersection, so the path distance
between the two stays exactly pair_distance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

# Decision codes drawn at intersections.
STRAIGHT, LEFT, RIGHT = 0, 1, 2

_HEADINGS = {(0, 1): "+x", (0, -1): "-x", (1, 1): "+y", (1, -1): "-y"}


@dataclass(frozen=True)
class RoadGrid:
    area_side: float
    block_spacing: float
    lane_offset: float
    n_roads: int

    def lines(self) -> np.ndarray:
        """Road axis coordinates, shared by both orientations."""
        return np.arange(self.n_roads) * self.block_spacing

    def road_coordinate(self, road) -> float:
        axis, idx = road
        return idx * self.block_spacing

    def locate_roads(self, point, tol: float = 0.5) -> list[tuple[int, int]]:
        """Roads whose lanes could contain the point (torus-aware).

        A point near an intersection is on both crossing roads.
        """
        point = np.asarray(point, dtype=float)
        reach = self.lane_offset + tol
        out = []
        for axis, coord in ((0, point[1]), (1, point[0])):
            offs = (coord - self.lines() + self.area_side / 2) % self.area_side \
                - self.area_side / 2
            for idx in np.nonzero(np.abs(offs) <= reach)[0]:
                out.append((axis, int(idx)))
        return out


@dataclass(frozen=True)
class VehicleState:
    position: np.ndarray     # (2,) meters
    heading: str             # one of +x, -x, +y, -y
    speed: float             # m/s


@dataclass(frozen=True)
class VuePair:
    id: int
    tx: VehicleState
    rx: VehicleState


class Topology:
    """Array-backed state of all 2K vehicles (tx block first, then rx).

    axis: 0 horizontal / 1 vertical; road: index of the occupied road;
    dirn: +1/-1 along the axis; s: longitudinal coordinate in [0, area).
    """

    def __init__(self, grid: RoadGrid, speed_ms: float, pair_distance: float,
                 axis, road, dirn, s):
        self.grid = grid
        self.speed = speed_ms
        self.pair_distance = pair_distance
        self.axis = np.asarray(axis, dtype=np.int8)
        self.road = np.asarray(road, dtype=np.int64)
        self.dirn = np.asarray(dirn, dtype=np.int8)
        self.s = np.asarray(s, dtype=float)
        self.k = len(self.axis) // 2
        self.turn_queues = [deque() for _ in range(self.k)]

    # -- views ------------------------------------------------------------

    def positions(self) -> np.ndarray:
        """(2K, 2) coordinates of every vehicle, wrapped into [0, area)."""
        line = self.road * self.grid.block_spacing
        off = self.dirn * self.grid.lane_offset
        side = self.grid.area_side
        x = np.where(self.axis == 0, self.s, (line + off) % side)
        y = np.where(self.axis == 0, (line - off) % side, self.s)
        return np.stack([x, y], axis=1)

    def tx_positions(self) -> np.ndarray:
        return self.positions()[: self.k]

    def rx_positions(self) -> np.ndarray:
        return self.positions()[self.k:]

    def tx_axis(self) -> np.ndarray:
        return self.axis[: self.k]

    def rx_axis(self) -> np.ndarray:
        return self.axis[self.k:]

    def tx_road(self) -> np.ndarray:
        return self.road[: self.k]

    def rx_road(self) -> np.ndarray:
        return self.road[self.k:]

    def pair_states(self) -> list[VuePair]:
        pos = self.positions()
        out = []
        for i in range(self.k):
            tx = VehicleState(pos[i].copy(),
                              _HEADINGS[(int(self.axis[i]), int(self.dirn[i]))],
                              self.speed)
            j = self.k + i
            rx = VehicleState(pos[j].copy(),
                              _HEADINGS[(int(self.axis[j]), int(self.dirn[j]))],
                              self.speed)
            out.append(VuePair(i, tx, rx))
        return out

    def pair_distances(self) -> np.ndarray:
        """Toroidal Euclidean tx-rx distance per pair."""
        d = self.rx_positions() - self.tx_positions()
        side = self.grid.area_side
        d = (d + side / 2) % side - side / 2
        return np.hypot(d[:, 0], d[:, 1])


def init_topology(cfg, rng) -> Topology:
    """Place K pairs on random lanes, receiver pair_distance behind its tx
    on the same road segment (so no un-replayed intersection separates
    them)."""
    if cfg.k < 1:
        raise ValueError("need at least one VUE pair")
    spacing = cfg.block_spacing if cfg.block_spacing is not None \
        else cfg.area_side / 4.0
    n_roads = int(round(cfg.area_side / spacing))
    if n_roads < 1 or abs(n_roads * spacing - cfg.area_side) > 1e-9 * cfg.area_side:
        raise ValueError("block_spacing must divide area_side evenly")
    if cfg.pair_distance >= spacing:
        raise ValueError("pair_distance must fit inside one block")
    grid = RoadGrid(cfg.area_side, spacing, cfg.lane_offset, n_roads)

    k = cfg.k
    axis = rng.integers(0, 2, size=k)
    road = rng.integers(0, n_roads, size=k)
    dirn = rng.choice([-1, 1], size=k)
    seg = rng.integers(0, n_roads, size=k)
    u = rng.uniform(cfg.pair_distance, spacing, size=k)
    tx_s = np.where(dirn > 0, seg * spacing + u, (seg + 1) * spacing - u)
    rx_s = tx_s - dirn * cfg.pair_distance
    area = cfg.area_side
    return Topology(
        grid,
        speed_ms=cfg.speed / 3.6,
        pair_distance=cfg.pair_distance,
        axis=np.concatenate([axis, axis]),
        road=np.concatenate([road, road]),
        dirn=np.concatenate([dirn, dirn]),
        s=np.concatenate([tx_s, rx_s]) % area,
    )


def _apply_turn(topo: Topology, i: int, decision: int) -> None:
    """Turn vehicle i standing exactly on an intersection."""
    if decision == STRAIGHT:
        return
    spacing = topo.grid.block_spacing
    cross_idx = int(round(topo.s[i] / spacing)) % topo.grid.n_roads
    old_line = int(topo.road[i])
    d = int(topo.dirn[i])
    if topo.axis[i] == 0:   # horizontal -> vertical
        new_dir = d if decision == LEFT else -d
    else:                   # vertical -> horizontal
        new_dir = -d if decision == LEFT else d
    topo.axis[i] = 1 - topo.axis[i]
    topo.road[i] = cross_idx
    topo.dirn[i] = new_dir
    topo.s[i] = old_line * spacing


def _advance_vehicle(topo: Topology, i: int, dist: float, decide) -> None:
    """Move vehicle i by path length dist, turning at intersections.

    decide() yields a decision code each time an intersection is reached.
    """
    spacing = topo.grid.block_spacing
    area = topo.grid.area_side
    remaining = dist
    while remaining > 1e-12:
        d = float(topo.dirn[i])
        frac = topo.s[i] % spacing
        ahead = spacing - frac if d > 0 else frac
        if ahead <= 1e-9:
            ahead = spacing  # standing on an intersection already handled
        if remaining < ahead:
            topo.s[i] = (topo.s[i] + d * remaining) % area
            return
        # land exactly on the intersection (snap against float drift)
        topo.s[i] = (round((topo.s[i] + d * ahead) / spacing) * spacing) % area
        remaining -= ahead
        _apply_turn(topo, i, decide())


def step_mobility(topo: Topology, dt: float, rng) -> Topology:
    """Advance every vehicle by speed*dt along its lane (in place).

    Transmitters draw a uniform straight/left/right decision at each
    intersection; receivers replay their transmitter's queued decisions.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    dist = topo.speed * dt
    if dist == 0.0:
        return topo
    spacing = topo.grid.block_spacing
    area = topo.grid.area_side

    frac = topo.s % spacing
    ahead = np.where(topo.dirn > 0, spacing - frac, frac)
    ahead[ahead <= 1e-9] = spacing
    clear = dist < ahead
    topo.s[clear] = (topo.s[clear] + topo.dirn[clear] * dist) % area

    for i in np.nonzero(~clear)[0]:
        i = int(i)
        if i < topo.k:
            queue = topo.turn_queues[i]

            def decide(q=queue):
                c = int(rng.integers(0, 3))
                q.append(c)
                return c
        else:
            queue = topo.turn_queues[i - topo.k]

            def decide(q=queue):
                return q.popleft() if q else STRAIGHT
        _advance_vehicle(topo, i, dist, decide)
    return topo


def pair_midpoints(topo: Topology) -> np.ndarray:
    """(K, 2) toroidal midpoints between each tx and its rx."""
    tx = topo.tx_positions()
    rx = topo.rx_positions()
    side = topo.grid.area_side
    delta = (rx - tx + side / 2) % side - side / 2
    return (tx + delta / 2) % side
