"""The boundary-flux-to-boundary-potential operator of a box.

For a box with boundary edges stacked side by side (south, east, north, west;
edges and nodes by increasing coordinate), the operator is a dense matrix
mapping the stacked coordinate-direction fluxes to the stacked potentials.
It is only required to be accurate on data coming from actual solutions of
the PDE, which is all the solver ever feeds it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import OUTWARD_SIGN, QuadTree


@dataclass
class N2DOperator:
    """Dense Neumann-to-Dirichlet matrix of a box, blocked by fine edges."""

    box_id: int | None
    side_edges: tuple[tuple[int, ...], ...]
    n_gauss: int
    matrix: np.ndarray

    def __post_init__(self):
        self.edge_ids: tuple[int, ...] = tuple(
            eid for side in self.side_edges for eid in side
        )
        self._edge_pos = {eid: k for k, eid in enumerate(self.edge_ids)}

    @property
    def n_nodes(self) -> int:
        return len(self.edge_ids) * self.n_gauss

    def edge_slice(self, eid: int) -> slice:
        k = self._edge_pos[eid]
        return slice(k * self.n_gauss, (k + 1) * self.n_gauss)

    def side_slice(self, side: int) -> slice:
        start = sum(len(self.side_edges[s]) for s in range(side)) * self.n_gauss
        return slice(start, start + len(self.side_edges[side]) * self.n_gauss)

    def side_block(self, row_side: int, col_side: int) -> np.ndarray:
        return self.matrix[self.side_slice(row_side), self.side_slice(col_side)]

    def stack(self, per_edge: dict[int, np.ndarray]) -> np.ndarray:
        """Stack per-edge vectors into this operator's node order."""
        return np.concatenate([per_edge[eid] for eid in self.edge_ids])

    def scatter(self, values: np.ndarray) -> dict[int, np.ndarray]:
        """Split a stacked node vector back into per-edge vectors."""
        g = self.n_gauss
        return {
            eid: values[k * g : (k + 1) * g] for k, eid in enumerate(self.edge_ids)
        }


def boundary_nodes(op: N2DOperator, tree: QuadTree) -> np.ndarray:
    """All boundary node coordinates in the operator's stacking order."""
    return np.concatenate([tree.edges[eid].nodes for eid in op.edge_ids])


def boundary_quadrature(op: N2DOperator, tree: QuadTree):
    """Quadrature weights and outward-normal signs along the boundary.

    Weights integrate along the boundary curve; signs convert the stored
    coordinate-direction flux into the outward-normal flux (negative on the
    south and west sides).
    """
    w, s = [], []
    for side_idx, side in enumerate(op.side_edges):
        for eid in side:
            edge = tree.edges[eid]
            w.append(0.5 * edge.length * tree.rule.weights)
            s.append(np.full(tree.rule.order, OUTWARD_SIGN[side_idx]))
    return np.concatenate(w), np.concatenate(s)


def reciprocity_residual(
    op: N2DOperator,
    tree: QuadTree,
    a_field,
    v1: np.ndarray,
    v2: np.ndarray,
    u1: np.ndarray | None = None,
    u2: np.ndarray | None = None,
) -> float:
    """Relative residual of the discrete reciprocity identity on the box.

    For two solutions, the boundary integral of a * (u1 dn(u2) - u2 dn(u1))
    vanishes; here the potentials default to the operator's own predictions
    so the check exercises the operator as well as the quadrature and the
    sign conventions.
    """
    if u1 is None:
        u1 = op.matrix @ v1
    if u2 is None:
        u2 = op.matrix @ v2
    w, sign = boundary_quadrature(op, tree)
    a = a_field.value(boundary_nodes(op, tree))
    num = float(np.sum(w * a * sign * (u1 * v2 - u2 * v1)))
    scale = float(np.sum(w * a * np.abs(u1) * np.abs(v2)))
    return abs(num) / scale


def offdiag_side_ranks(op: N2DOperator, cutoffs=(1e-6, 1e-8, 1e-10)) -> list[dict]:
    """Ranks of every side-to-side off-diagonal block at relative cutoffs."""
    from .geometry import SIDE_NAMES

    rows = []
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            block = op.side_block(i, j)
            sv = np.linalg.svd(block, compute_uv=False)
            top = sv[0] if sv.size else 0.0
            row = {
                "block": f"{SIDE_NAMES[i]}-{SIDE_NAMES[j]}",
                "dim": min(block.shape),
            }
            for cut in cutoffs:
                row[f"rank@{cut:g}"] = int(np.sum(sv > cut * top)) if top > 0 else 0
            rows.append(row)
    return rows
