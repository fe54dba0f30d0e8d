"""Quadtree of boxes over a square domain and the leaf-edge enumeration.

The domain is tessellated into a uniform quadtree with 4**levels leaf boxes.
Every edge of every leaf box is enumerated exactly once (shared edges are
deduplicated) and tabulated at Gauss nodes. Each box, leaf or not, carries
four side lists (south, east, north, west) of the leaf edges covering that
side, ordered by increasing coordinate. All operator blocking in the rest of
the package is expressed in terms of these side lists.

Conventions fixed here and relied on everywhere:
  * side order is (south, east, north, west), indices 0..3;
  * children of a box are ordered (SW, NW, SE, NE), so children 0 and 2 tile
    the bottom half and children 1 and 3 the top half;
  * edge nodes are ordered by increasing coordinate along the edge;
  * box ids are assigned level by level starting at 1 for the root, so the
    root's children are 2..5.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .quadrature import GaussRule, map_to_segment

SOUTH, EAST, NORTH, WEST = 0, 1, 2, 3
SIDE_NAMES = ("south", "east", "north", "west")
# sign relating the coordinate-direction flux to the outward normal per side
OUTWARD_SIGN = (-1.0, 1.0, 1.0, -1.0)


@dataclass(frozen=True)
class Square:
    """Axis-aligned square given by its SW corner and side length."""

    x: float
    y: float
    side: float

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + 0.5 * self.side, self.y + 0.5 * self.side)

    def contains(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (
            (pts[:, 0] >= self.x - margin)
            & (pts[:, 0] <= self.x + self.side + margin)
            & (pts[:, 1] >= self.y - margin)
            & (pts[:, 1] <= self.y + self.side + margin)
        )


@dataclass(frozen=True)
class EdgeGeom:
    """One leaf edge: a horizontal or vertical segment with its Gauss nodes."""

    id: int
    orientation: str  # "h" or "v"
    p0: tuple[float, float]
    p1: tuple[float, float]
    is_exterior: bool
    nodes: np.ndarray  # (n_gauss, 2), increasing coordinate along the edge

    @property
    def length(self) -> float:
        return abs(self.p1[0] - self.p0[0]) + abs(self.p1[1] - self.p0[1])


@dataclass
class BoxNode:
    """A quadtree box with its side lists of leaf-edge ids."""

    id: int
    level: int
    box: Square
    grid: tuple[int, int]  # (ix, iy) position within its level
    children: tuple[int, int, int, int] | None = None
    side_edges: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def is_leaf(self) -> bool:
        return self.children is None


class QuadTree:
    """Uniform quadtree with deduplicated leaf-edge enumeration."""

    def __init__(self, root_box: Square, levels: int, rule: GaussRule):
        if levels < 1:
            raise InvalidArgumentError("levels must be >= 1; a single box has nothing to merge")
        if root_box.side <= 0:
            raise InvalidArgumentError("root box side must be positive")
        self.root_box = root_box
        self.levels = levels
        self.rule = rule
        self.n_leaf = 2**levels
        self.boxes: dict[int, BoxNode] = {}
        self.edges: list[EdgeGeom] = []
        self._build_edges()
        self._build_boxes()
        self._build_edge_adjacency()

    # -- construction -------------------------------------------------------

    def _build_edges(self):
        n = self.n_leaf
        h = self.root_box.side / n
        x0, y0 = self.root_box.x, self.root_box.y
        self._hid = np.empty((n, n + 1), dtype=int)  # [ix, iy]: row iy, column ix
        self._vid = np.empty((n + 1, n), dtype=int)
        eid = 0
        for iy in range(n + 1):
            for ix in range(n):
                p0 = (x0 + ix * h, y0 + iy * h)
                p1 = (x0 + (ix + 1) * h, y0 + iy * h)
                nodes = map_to_segment(self.rule, p0, p1)
                self.edges.append(
                    EdgeGeom(eid, "h", p0, p1, iy in (0, n), nodes)
                )
                self._hid[ix, iy] = eid
                eid += 1
        for ix in range(n + 1):
            for iy in range(n):
                p0 = (x0 + ix * h, y0 + iy * h)
                p1 = (x0 + ix * h, y0 + (iy + 1) * h)
                nodes = map_to_segment(self.rule, p0, p1)
                self.edges.append(
                    EdgeGeom(eid, "v", p0, p1, ix in (0, n), nodes)
                )
                self._vid[ix, iy] = eid
                eid += 1

    def _side_lists(self, level: int, gx: int, gy: int):
        """Side lists of the box at grid (gx, gy) on `level`."""
        span = 2 ** (self.levels - level)
        lx, ly = gx * span, gy * span
        south = tuple(self._hid[ix, ly] for ix in range(lx, lx + span))
        north = tuple(self._hid[ix, ly + span] for ix in range(lx, lx + span))
        west = tuple(self._vid[lx, iy] for iy in range(ly, ly + span))
        east = tuple(self._vid[lx + span, iy] for iy in range(ly, ly + span))
        return (south, east, north, west)

    def _build_boxes(self):
        x0, y0 = self.root_box.x, self.root_box.y
        side = self.root_box.side
        next_id = 1
        prev_level: list[int] = []
        for level in range(self.levels + 1):
            cell = side / 2**level
            if level == 0:
                positions = [(0, 0)]
                parents = [None]
            else:
                positions, parents = [], []
                for pid in prev_level:
                    pgx, pgy = self.boxes[pid].grid
                    # child order SW, NW, SE, NE
                    for dgx, dgy in ((0, 0), (0, 1), (1, 0), (1, 1)):
                        positions.append((2 * pgx + dgx, 2 * pgy + dgy))
                        parents.append(pid)
            ids = []
            for (gx, gy), pid in zip(positions, parents):
                node = BoxNode(
                    id=next_id,
                    level=level,
                    box=Square(x0 + gx * cell, y0 + gy * cell, cell),
                    grid=(gx, gy),
                    side_edges=self._side_lists(level, gx, gy),
                )
                self.boxes[next_id] = node
                ids.append(next_id)
                if pid is not None:
                    kids = self.boxes[pid].children or ()
                    self.boxes[pid].children = tuple(kids) + (next_id,)
                next_id += 1
            prev_level = ids
        self._leaf_ids = tuple(prev_level)

    def _build_edge_adjacency(self):
        self.edge_boxes: dict[int, list[int]] = {e.id: [] for e in self.edges}
        for bid in self._leaf_ids:
            for side in self.boxes[bid].side_edges:
                for eid in side:
                    self.edge_boxes[eid].append(bid)

    # -- queries -------------------------------------------------------------

    @property
    def leaf_ids(self) -> tuple[int, ...]:
        return self._leaf_ids

    def level_ids(self, level: int) -> list[int]:
        return [b.id for b in self.boxes.values() if b.level == level]

    @property
    def interior_edge_ids(self) -> list[int]:
        return [e.id for e in self.edges if not e.is_exterior]

    @property
    def exterior_edge_ids(self) -> list[int]:
        return [e.id for e in self.edges if e.is_exterior]

    def shared_edge(self, box_a: BoxNode, box_b: BoxNode) -> int | None:
        """The unique common edge id of two leaf boxes, or None."""
        if not (box_a.is_leaf and box_b.is_leaf):
            raise InvalidArgumentError("shared_edge expects two leaf boxes")
        a, b = box_a.side_edges, box_b.side_edges
        for sa, sb in ((EAST, WEST), (WEST, EAST), (NORTH, SOUTH), (SOUTH, NORTH)):
            if a[sa] == b[sb]:
                return a[sa][0]
        return None

    def child_order(self, parent: BoxNode) -> tuple[int, int, int, int]:
        """Children of `parent` ordered SW, NW, SE, NE."""
        if parent.is_leaf:
            raise InvalidArgumentError(f"box {parent.id} is a leaf; no children")
        return parent.children

    def boundary_side_of(self, edge: EdgeGeom) -> int:
        """Which side of the root box an exterior edge lies on."""
        if not edge.is_exterior:
            raise InvalidArgumentError(f"edge {edge.id} is interior")
        x0, y0 = self.root_box.x, self.root_box.y
        s = self.root_box.side
        if edge.orientation == "h":
            return SOUTH if edge.p0[1] == y0 else NORTH
        return WEST if edge.p0[0] == x0 else EAST

    def summary_rows(self) -> list[dict]:
        """Per-level box/edge bookkeeping, used by the debug CSV dump."""
        rows = []
        n_int = len(self.interior_edge_ids)
        n_ext = len(self.exterior_edge_ids)
        for level in range(self.levels + 1):
            per_side = 2 ** (self.levels - level)
            rows.append(
                {
                    "level": level,
                    "n_boxes": 4**level,
                    "edges_per_box_side": per_side,
                    "boundary_nodes_per_box": 4 * per_side * self.rule.order,
                    "interior_edges_total": n_int,
                    "exterior_edges_total": n_ext,
                }
            )
        return rows


def build_tree(root_box: Square, levels: int, rule: GaussRule) -> QuadTree:
    """Build the uniform quadtree with 4**levels leaves over `root_box`."""
    return QuadTree(root_box, levels, rule)


def write_summary_csv(tree: QuadTree, path) -> None:
    """Debug dump of per-level box/edge bookkeeping."""
    import csv

    rows = tree.summary_rows()
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
