"""Pairwise merging of sibling operators by Schur-complement elimination.

Two adjacent boxes sharing an interface satisfy, on the shared edges, two
competing predictions of the same potential. Equating them gives a linear
system for the shared-edge fluxes; eliminating those fluxes produces the
operator of the union box, and the elimination map itself (from exterior
fluxes to shared fluxes) is stored so the downward solve can recover every
interior flux later. A merge of four siblings is three pairwise merges: the
two bottom children, the two top children, then the two half-slabs.

Nothing is ever re-interpolated: parent operators act on the union of the
fine leaf-edge nodes, and both children reference shared edges by the same
edge ids in the same node order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import InvalidArgumentError, MergeSingularityError
from .flops import lu_flops, lu_solve_flops, matmul_flops
from .geometry import EAST, NORTH, SOUTH, WEST
from .operators import N2DOperator


@dataclass
class MergeRecord:
    """The stored elimination map of one pairwise merge.

    solve_map takes the merged box's exterior fluxes, stacked in the parent
    operator's edge order, to the fluxes on the eliminated shared edges.
    """

    parent_id: int | None
    child_ids: tuple
    shared_edge_ids: tuple[int, ...]
    exterior_edge_ids: tuple[int, ...]
    solve_map: np.ndarray
    n_gauss: int

    def apply(self, flux_by_edge: dict[int, np.ndarray], counter=None) -> None:
        """Fill in the shared-edge fluxes from known exterior fluxes."""
        g = self.n_gauss
        v_ext = np.concatenate([flux_by_edge[eid] for eid in self.exterior_edge_ids])
        if counter is not None:
            counter.add("solve", matmul_flops(self.solve_map.shape[0], self.solve_map.shape[1], 1))
        v_sh = self.solve_map @ v_ext
        for k, eid in enumerate(self.shared_edge_ids):
            flux_by_edge[eid] = v_sh[k * g : (k + 1) * g]


def _merged_side_edges(a: N2DOperator, b: N2DOperator, direction: str):
    sa, sb = a.side_edges, b.side_edges
    if direction == "horizontal":
        # a is the west box, b the east box
        return (
            sa[SOUTH] + sb[SOUTH],
            sb[EAST],
            sa[NORTH] + sb[NORTH],
            sa[WEST],
        )
    return (
        sa[SOUTH],
        sa[EAST] + sb[EAST],
        sb[NORTH],
        sa[WEST] + sb[WEST],
    )


def _node_index(op: N2DOperator, edge_ids) -> np.ndarray:
    if not edge_ids:
        return np.empty(0, dtype=int)
    return np.concatenate(
        [np.arange(op.edge_slice(eid).start, op.edge_slice(eid).stop) for eid in edge_ids]
    )


def merge_two(
    op_a: N2DOperator,
    op_b: N2DOperator,
    direction: str,
    counter=None,
    parent_id: int | None = None,
) -> tuple[N2DOperator, MergeRecord]:
    """Merge two adjacent boxes into one, eliminating their shared edges.

    direction "horizontal" means op_a is the west box and op_b the east box
    (op_a's east side must list the same edges as op_b's west side);
    "vertical" means op_a is the bottom box and op_b the top box.
    """
    if direction not in ("horizontal", "vertical"):
        raise InvalidArgumentError(f"unknown merge direction {direction!r}")
    if op_a.n_gauss != op_b.n_gauss:
        raise InvalidArgumentError("operands tabulate different node counts per edge")
    if direction == "horizontal":
        shared_a, shared_b = op_a.side_edges[EAST], op_b.side_edges[WEST]
    else:
        shared_a, shared_b = op_a.side_edges[NORTH], op_b.side_edges[SOUTH]
    if shared_a != shared_b:
        raise InvalidArgumentError(
            f"boxes {op_a.box_id} and {op_b.box_id} do not share an interface "
            f"in direction {direction!r}: {shared_a} vs {shared_b}"
        )
    shared = shared_a
    g = op_a.n_gauss

    ia_sh = _node_index(op_a, shared)
    ib_sh = _node_index(op_b, shared)
    ext_a = tuple(e for e in op_a.edge_ids if e not in set(shared))
    ext_b = tuple(e for e in op_b.edge_ids if e not in set(shared))
    ia_ext = _node_index(op_a, ext_a)
    ib_ext = _node_index(op_b, ext_b)

    ta, tb = op_a.matrix, op_b.matrix
    # equate the two predictions of the shared potential and solve for the
    # shared flux: (A_sh,sh - B_sh,sh) v_sh = -A_sh,ext va + B_sh,ext vb
    d = ta[np.ix_(ia_sh, ia_sh)] - tb[np.ix_(ib_sh, ib_sh)]
    k = d.shape[0]
    coupling = np.hstack(
        [-ta[np.ix_(ia_sh, ia_ext)], tb[np.ix_(ib_sh, ib_ext)]]
    )

    if counter is not None:
        counter.add("merge", lu_flops(k))
    lu, piv = sla.lu_factor(d, check_finite=False)
    cond = _condition_estimate(d, lu, piv)
    if cond > 1e13:
        raise MergeSingularityError(
            f"shared-edge coupling between boxes {op_a.box_id} and {op_b.box_id} "
            f"is numerically singular (cond ~ {cond:.2e})"
        )
    if counter is not None:
        counter.add("merge", lu_solve_flops(k, coupling.shape[1]))
    solve_map = sla.lu_solve((lu, piv), coupling, check_finite=False)

    # parent operator on the exterior nodes, then reblocked to side order
    e_a, e_b = len(ia_ext), len(ib_ext)
    cross = np.vstack([ta[np.ix_(ia_ext, ia_sh)], tb[np.ix_(ib_ext, ib_sh)]])
    if counter is not None:
        counter.add("merge", matmul_flops(e_a + e_b, k, e_a + e_b))
    parent_unordered = cross @ solve_map
    parent_unordered[:e_a, :e_a] += ta[np.ix_(ia_ext, ia_ext)]
    parent_unordered[e_a:, e_a:] += tb[np.ix_(ib_ext, ib_ext)]

    side_edges = _merged_side_edges(op_a, op_b, direction)
    parent_edge_ids = tuple(e for side in side_edges for e in side)
    unordered = list(ext_a) + list(ext_b)
    pos = {eid: i for i, eid in enumerate(unordered)}
    perm = np.concatenate(
        [np.arange(pos[eid] * g, (pos[eid] + 1) * g) for eid in parent_edge_ids]
    )
    matrix = parent_unordered[np.ix_(perm, perm)]
    parent = N2DOperator(parent_id, side_edges, g, matrix)

    record = MergeRecord(
        parent_id=parent_id,
        child_ids=(op_a.box_id, op_b.box_id),
        shared_edge_ids=tuple(shared),
        exterior_edge_ids=parent_edge_ids,
        solve_map=solve_map[:, perm],
        n_gauss=g,
    )
    return parent, record


def _condition_estimate(d: np.ndarray, lu, piv) -> float:
    gecon = sla.get_lapack_funcs("gecon", (d,))
    rcond, _ = gecon(lu, np.linalg.norm(d, 1), norm="1")
    return np.inf if rcond == 0 else 1.0 / rcond


def merge_four(
    ops: tuple[N2DOperator, N2DOperator, N2DOperator, N2DOperator],
    counter=None,
    parent_id: int | None = None,
) -> tuple[N2DOperator, tuple[MergeRecord, MergeRecord, MergeRecord]]:
    """Merge the four children of a box, ordered (SW, NW, SE, NE).

    The bottom pair and top pair are merged horizontally into two half
    slabs, which are then merged vertically. Returns the parent operator
    and the records (bottom, top, final vertical).
    """
    sw, nw, se, ne = ops
    bottom, rec_bottom = merge_two(sw, se, "horizontal", counter=counter)
    top, rec_top = merge_two(nw, ne, "horizontal", counter=counter)
    parent, rec_final = merge_two(
        bottom, top, "vertical", counter=counter, parent_id=parent_id
    )
    rec_bottom.parent_id = parent_id
    rec_top.parent_id = parent_id
    return parent, (rec_bottom, rec_top, rec_final)


def merge_four_vertical_first(
    ops: tuple[N2DOperator, N2DOperator, N2DOperator, N2DOperator],
    counter=None,
    parent_id: int | None = None,
) -> tuple[N2DOperator, tuple[MergeRecord, MergeRecord, MergeRecord]]:
    """Alternative merge order used as a consistency check: the left pair
    and right pair are merged vertically, then the two halves horizontally."""
    sw, nw, se, ne = ops
    left, rec_left = merge_two(sw, nw, "vertical", counter=counter)
    right, rec_right = merge_two(se, ne, "vertical", counter=counter)
    parent, rec_final = merge_two(
        left, right, "horizontal", counter=counter, parent_id=parent_id
    )
    rec_left.parent_id = parent_id
    rec_right.parent_id = parent_id
    return parent, (rec_left, rec_right, rec_final)
